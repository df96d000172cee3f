"""Pure-numpy gate kernels.

Reference backend: vectorized over both the batch axis and the state axis,
no JIT involved. The numba backend in ``_kernels_nb`` implements the exact
same contract; ``_kernels`` picks one at import time.

State layout: ``amps`` is a (batch, 2**n) complex128 array. Qubit 0 is the
least significant bit of the basis-state index.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"

# Gate codes shared by both backends. Single-qubit gates first so the
# dispatch can branch on ``code <= G_Z``.
G_RX = 0
G_RY = 1
G_RZ = 2
G_H = 3
G_X = 4
G_Y = 5
G_Z = 6
G_CNOT = 7
G_CRX = 8
G_CRY = 9
G_CRZ = 10

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


def _halves(amps: np.ndarray, target: int):
    """Views of the target-bit=0 and target-bit=1 halves, batch axis first."""
    batch, dim = amps.shape
    view = amps.reshape(batch, dim >> (target + 1), 2, 1 << target)
    return view[:, :, 0, :], view[:, :, 1, :]


def _controlled_halves(amps: np.ndarray, control: int, target: int, n_qubits: int):
    """Target-bit halves restricted to the control-bit=1 subspace."""
    batch = amps.shape[0]
    view = amps.reshape((batch,) + (2,) * n_qubits)
    ax_c = 1 + (n_qubits - 1 - control)
    ax_t = 1 + (n_qubits - 1 - target)
    moved = np.moveaxis(view, (ax_c, ax_t), (1, 2))
    sub = moved[:, 1]
    return sub[:, 0], sub[:, 1]


def _bcast(x: np.ndarray, ndim: int) -> np.ndarray:
    return x.reshape((x.shape[0],) + (1,) * (ndim - 1))


def _rotate(a0: np.ndarray, a1: np.ndarray, code: int, theta: np.ndarray) -> None:
    half = 0.5 * theta
    c = _bcast(np.cos(half), a0.ndim)
    s = _bcast(np.sin(half), a0.ndim)
    if code == G_RX or code == G_CRX:
        t0 = c * a0 - 1j * s * a1
        a1[...] = -1j * s * a0 + c * a1
        a0[...] = t0
    elif code == G_RY or code == G_CRY:
        t0 = c * a0 - s * a1
        a1[...] = s * a0 + c * a1
        a0[...] = t0
    else:  # RZ / CRZ, phases e^{-i theta/2} and e^{+i theta/2}
        a0 *= c - 1j * s
        a1 *= c + 1j * s


def run_ops(
    amps: np.ndarray,
    codes: np.ndarray,
    targets: np.ndarray,
    controls: np.ndarray,
    angles: np.ndarray,
) -> None:
    """Apply a gate list in place.

    amps: (batch, 2**n) complex128, one statevector per batch row.
    codes/targets/controls: (n_gates,) int64; control is -1 where absent.
    angles: (n_gates, batch) float64; ignored for non-rotation gates.
    """
    n_qubits = int(amps.shape[1]).bit_length() - 1
    for g in range(codes.shape[0]):
        code = int(codes[g])
        target = int(targets[g])
        if code <= G_Z:
            a0, a1 = _halves(amps, target)
            if code == G_H:
                t0 = (a0 + a1) * _INV_SQRT2
                a1[...] = (a0 - a1) * _INV_SQRT2
                a0[...] = t0
            elif code == G_X:
                t0 = a0.copy()
                a0[...] = a1
                a1[...] = t0
            elif code == G_Y:
                t0 = -1j * a1
                a1[...] = 1j * a0
                a0[...] = t0
            elif code == G_Z:
                a1 *= -1.0
            else:
                _rotate(a0, a1, code, angles[g])
        else:
            a0, a1 = _controlled_halves(amps, int(controls[g]), target, n_qubits)
            if code == G_CNOT:
                t0 = a0.copy()
                a0[...] = a1
                a1[...] = t0
            else:
                _rotate(a0, a1, code, angles[g])


def z_expectations(amps: np.ndarray, n_qubits: int) -> np.ndarray:
    """Per-qubit Pauli-Z expectation for every batch row, shape (batch, n)."""
    batch, dim = amps.shape
    probs = amps.real**2 + amps.imag**2
    out = np.empty((batch, n_qubits), dtype=np.float64)
    for q in range(n_qubits):
        view = probs.reshape(batch, dim >> (q + 1), 2, 1 << q)
        out[:, q] = (view[:, :, 0, :] - view[:, :, 1, :]).sum(axis=(1, 2))
    return out
