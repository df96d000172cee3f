"""Numba gate kernels.

Same contract as ``_kernels_np`` but compiled with ``@njit``. One call walks
the whole gate list so the per-gate dispatch cost stays inside compiled code.
Loops are serial on purpose: results must be bit-identical from run to run
regardless of thread count.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ._kernels_np import (
    G_CNOT,
    G_CRX,
    G_CRY,
    G_H,
    G_RX,
    G_RZ,
    G_X,
    G_Y,
    G_Z,
)

NAME = "numba"

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


@njit(cache=True)
def run_ops(amps, codes, targets, controls, angles):
    batch, dim = amps.shape
    for g in range(codes.shape[0]):
        code = codes[g]
        tbit = np.int64(1) << targets[g]
        if code <= G_Z:
            if code == G_H:
                for b in range(batch):
                    for i in range(dim):
                        if i & tbit == 0:
                            j = i | tbit
                            a0 = amps[b, i]
                            a1 = amps[b, j]
                            amps[b, i] = (a0 + a1) * _INV_SQRT2
                            amps[b, j] = (a0 - a1) * _INV_SQRT2
            elif code == G_X:
                for b in range(batch):
                    for i in range(dim):
                        if i & tbit == 0:
                            j = i | tbit
                            a0 = amps[b, i]
                            amps[b, i] = amps[b, j]
                            amps[b, j] = a0
            elif code == G_Y:
                for b in range(batch):
                    for i in range(dim):
                        if i & tbit == 0:
                            j = i | tbit
                            a0 = amps[b, i]
                            amps[b, i] = -1j * amps[b, j]
                            amps[b, j] = 1j * a0
            elif code == G_Z:
                for b in range(batch):
                    for i in range(dim):
                        if i & tbit:
                            amps[b, i] = -amps[b, i]
            elif code == G_RZ:
                for b in range(batch):
                    half = 0.5 * angles[g, b]
                    p0 = np.cos(half) - 1j * np.sin(half)
                    p1 = np.cos(half) + 1j * np.sin(half)
                    for i in range(dim):
                        if i & tbit:
                            amps[b, i] = amps[b, i] * p1
                        else:
                            amps[b, i] = amps[b, i] * p0
            else:  # RX or RY
                for b in range(batch):
                    half = 0.5 * angles[g, b]
                    c = np.cos(half)
                    s = np.sin(half)
                    if code == G_RX:
                        for i in range(dim):
                            if i & tbit == 0:
                                j = i | tbit
                                a0 = amps[b, i]
                                a1 = amps[b, j]
                                amps[b, i] = c * a0 - 1j * s * a1
                                amps[b, j] = -1j * s * a0 + c * a1
                    else:
                        for i in range(dim):
                            if i & tbit == 0:
                                j = i | tbit
                                a0 = amps[b, i]
                                a1 = amps[b, j]
                                amps[b, i] = c * a0 - s * a1
                                amps[b, j] = s * a0 + c * a1
        else:
            cbit = np.int64(1) << controls[g]
            if code == G_CNOT:
                for b in range(batch):
                    for i in range(dim):
                        if (i & cbit) and (i & tbit == 0):
                            j = i | tbit
                            a0 = amps[b, i]
                            amps[b, i] = amps[b, j]
                            amps[b, j] = a0
            else:
                for b in range(batch):
                    half = 0.5 * angles[g, b]
                    c = np.cos(half)
                    s = np.sin(half)
                    for i in range(dim):
                        if (i & cbit) and (i & tbit == 0):
                            j = i | tbit
                            a0 = amps[b, i]
                            a1 = amps[b, j]
                            if code == G_CRX:
                                amps[b, i] = c * a0 - 1j * s * a1
                                amps[b, j] = -1j * s * a0 + c * a1
                            elif code == G_CRY:
                                amps[b, i] = c * a0 - s * a1
                                amps[b, j] = s * a0 + c * a1
                            else:
                                amps[b, i] = a0 * (c - 1j * s)
                                amps[b, j] = a1 * (c + 1j * s)


@njit(cache=True)
def z_expectations(amps, n_qubits):
    batch, dim = amps.shape
    out = np.zeros((batch, n_qubits), dtype=np.float64)
    for b in range(batch):
        for i in range(dim):
            a = amps[b, i]
            p = a.real * a.real + a.imag * a.imag
            for q in range(n_qubits):
                if (i >> q) & 1:
                    out[b, q] -= p
                else:
                    out[b, q] += p
    return out
