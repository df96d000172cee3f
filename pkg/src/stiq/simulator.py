"""Dense statevector simulator.

Qubit 0 is the least significant bit of the basis-state index, so the
amplitude at index 5 (binary 101) has qubits 0 and 2 set. All amplitudes are
complex128 and every operation returns a fresh state; nothing mutates its
input. RZ keeps its e^{-i theta/2} / e^{+i theta/2} phases rather than the
phase-gate normalization, and controlled rotations apply the same matrix on
the control=1 subspace.

Circuits are described by ``CircuitTemplate`` as a flat gate list whose
rotation angles come from one of three sources: a fixed value, a trainable
parameter slot, or an input feature slot. ``run_circuit_batch`` is the
workhorse: it compiles the template once, resolves angles for a whole batch
and hands the loop to the selected kernel backend (see ``_kernels``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels

MIN_QUBITS = 1
MAX_QUBITS = 16

GATE_KINDS = ("rx", "ry", "rz", "h", "x", "cnot", "crx", "cry", "crz")
ROTATION_KINDS = ("rx", "ry", "rz", "crx", "cry", "crz")
CONTROLLED_KINDS = ("cnot", "crx", "cry", "crz")

_KIND_TO_CODE = {
    "rx": _kernels.G_RX,
    "ry": _kernels.G_RY,
    "rz": _kernels.G_RZ,
    "h": _kernels.G_H,
    "x": _kernels.G_X,
    "cnot": _kernels.G_CNOT,
    "crx": _kernels.G_CRX,
    "cry": _kernels.G_CRY,
    "crz": _kernels.G_CRZ,
}

NORM_TOL = 1e-8


class NumericError(RuntimeError):
    """A numeric invariant was violated (norm drift, non-finite values)."""


class EvalCounter:
    """Counts circuit executions. One unit per statevector actually evolved."""

    __slots__ = ("count",)

    def __init__(self) -> None:
        self.count = 0

    def add(self, n: int = 1) -> None:
        self.count += n

    def reset(self) -> None:
        self.count = 0


#: Process-wide execution counter used by the experiment harness to report
#: circuit-evaluation overhead. Instrumentation only; numeric code never
#: reads it. Not thread-safe.
evals = EvalCounter()


@dataclass(frozen=True)
class Angle:
    """Where a rotation angle comes from: fixed radians, a trainable
    parameter slot, or an input feature slot."""

    source: str
    value: float = 0.0
    index: int = 0

    @staticmethod
    def fixed(value: float) -> "Angle":
        return Angle("fixed", value=float(value))

    @staticmethod
    def param(index: int) -> "Angle":
        return Angle("param", index=int(index))

    @staticmethod
    def feature(index: int) -> "Angle":
        return Angle("feature", index=int(index))

    def validate(self) -> None:
        if self.source not in ("fixed", "param", "feature"):
            raise ValueError(f"unknown angle source {self.source!r}")
        if self.source == "fixed" and not np.isfinite(self.value):
            raise ValueError("fixed angle must be finite")
        if self.source != "fixed" and self.index < 0:
            raise ValueError("angle slot index must be >= 0")


@dataclass(frozen=True)
class GateOp:
    kind: str
    target: int
    control: int | None = None
    angle: Angle | None = None

    def validate(self, n_qubits: int) -> None:
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if not 0 <= self.target < n_qubits:
            raise ValueError(f"target {self.target} out of range for {n_qubits} qubits")
        if self.kind in CONTROLLED_KINDS:
            if self.control is None:
                raise ValueError(f"{self.kind} needs a control qubit")
            if not 0 <= self.control < n_qubits:
                raise ValueError(f"control {self.control} out of range")
            if self.control == self.target:
                raise ValueError("control and target must differ")
        elif self.control is not None:
            raise ValueError(f"{self.kind} takes no control qubit")
        if self.kind in ROTATION_KINDS:
            if self.angle is None:
                raise ValueError(f"{self.kind} needs an angle")
            self.angle.validate()
        elif self.angle is not None:
            raise ValueError(f"{self.kind} takes no angle")


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        if not MIN_QUBITS <= self.n_qubits <= MAX_QUBITS:
            raise ValueError(f"n_qubits must be in [{MIN_QUBITS}, {MAX_QUBITS}]")
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (2**self.n_qubits,):
            raise ValueError("amplitude vector has wrong length")

    @staticmethod
    def zero(n_qubits: int) -> "StateVector":
        amps = np.zeros(2**n_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return StateVector(n_qubits, amps)

    def norm(self) -> float:
        return float(np.sqrt((self.amplitudes.real**2 + self.amplitudes.imag**2).sum()))

    def probabilities(self) -> np.ndarray:
        return self.amplitudes.real**2 + self.amplitudes.imag**2


@dataclass
class CircuitTemplate:
    """A gate list over a fixed qubit count, with angle slots.

    n_params counts the trainable slots, n_features the input slots. Every
    index below those counts must be referenced by at least one gate;
    validate() enforces it so a typo in a template cannot silently leave a
    parameter untrained.
    """

    n_qubits: int
    ops: tuple[GateOp, ...]
    n_params: int = 0
    n_features: int = 0
    _compiled: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.ops = tuple(self.ops)
        self.validate()

    def validate(self) -> None:
        if not MIN_QUBITS <= self.n_qubits <= MAX_QUBITS:
            raise ValueError(f"n_qubits must be in [{MIN_QUBITS}, {MAX_QUBITS}]")
        seen_params: set[int] = set()
        seen_features: set[int] = set()
        for op in self.ops:
            op.validate(self.n_qubits)
            if op.angle is not None and op.angle.source == "param":
                if op.angle.index >= self.n_params:
                    raise ValueError(f"param slot {op.angle.index} >= n_params")
                seen_params.add(op.angle.index)
            if op.angle is not None and op.angle.source == "feature":
                if op.angle.index >= self.n_features:
                    raise ValueError(f"feature slot {op.angle.index} >= n_features")
                seen_features.add(op.angle.index)
        if len(seen_params) != self.n_params:
            missing = sorted(set(range(self.n_params)) - seen_params)
            raise ValueError(f"param slots never referenced: {missing}")
        if len(seen_features) != self.n_features:
            missing = sorted(set(range(self.n_features)) - seen_features)
            raise ValueError(f"feature slots never referenced: {missing}")

    def compiled(self) -> tuple:
        """Gate list as flat arrays: codes, targets, controls, angle source
        codes (0 none / 1 fixed / 2 param / 3 feature), fixed values, slot
        indices."""
        if self._compiled is None:
            n = len(self.ops)
            codes = np.empty(n, dtype=np.int64)
            targets = np.empty(n, dtype=np.int64)
            controls = np.full(n, -1, dtype=np.int64)
            asrc = np.zeros(n, dtype=np.int64)
            aval = np.zeros(n, dtype=np.float64)
            aidx = np.zeros(n, dtype=np.int64)
            for i, op in enumerate(self.ops):
                codes[i] = _KIND_TO_CODE[op.kind]
                targets[i] = op.target
                if op.control is not None:
                    controls[i] = op.control
                if op.angle is not None:
                    if op.angle.source == "fixed":
                        asrc[i] = 1
                        aval[i] = op.angle.value
                    elif op.angle.source == "param":
                        asrc[i] = 2
                        aidx[i] = op.angle.index
                    else:
                        asrc[i] = 3
                        aidx[i] = op.angle.index
            self._compiled = (codes, targets, controls, asrc, aval, aidx)
        return self._compiled


def _resolve_angles(
    compiled: tuple, params: np.ndarray, features: np.ndarray, batch: int
) -> np.ndarray:
    _, _, _, asrc, aval, aidx = compiled
    angles = np.zeros((asrc.shape[0], batch), dtype=np.float64)
    fixed = asrc == 1
    if fixed.any():
        angles[fixed] = aval[fixed, None]
    par = asrc == 2
    if par.any():
        angles[par] = params[aidx[par]][:, None]
    feat = asrc == 3
    if feat.any():
        angles[feat] = features[:, aidx[feat]].T
    return angles


def _check_inputs(template: CircuitTemplate, params, features, batched: bool):
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (template.n_params,):
        raise ValueError(
            f"expected {template.n_params} params, got shape {params.shape}"
        )
    features = np.asarray(features, dtype=np.float64)
    if not batched:
        if features.shape != (template.n_features,):
            raise ValueError(
                f"expected {template.n_features} features, got shape {features.shape}"
            )
        features = features[None, :]
    elif features.ndim != 2 or features.shape[1] != template.n_features:
        raise ValueError(
            f"expected (batch, {template.n_features}) features, got {features.shape}"
        )
    if not np.isfinite(params).all() or not np.isfinite(features).all():
        raise NumericError("non-finite parameter or feature values")
    return params, features


def run_circuit_batch(
    template: CircuitTemplate, params: np.ndarray, features: np.ndarray
) -> np.ndarray:
    """Run the template once per feature row. Returns (batch, 2**n) amplitudes."""
    params, features = _check_inputs(template, params, features, batched=True)
    compiled = template.compiled()
    batch = features.shape[0]
    amps = np.zeros((batch, 2**template.n_qubits), dtype=np.complex128)
    amps[:, 0] = 1.0
    angles = _resolve_angles(compiled, params, features, batch)
    _kernels.run_ops(amps, compiled[0], compiled[1], compiled[2], angles)
    evals.add(batch)
    return amps


def run_circuit(
    template: CircuitTemplate,
    params: np.ndarray,
    features: np.ndarray | None = None,
) -> StateVector:
    if features is None:
        features = np.zeros(template.n_features, dtype=np.float64)
    params, features = _check_inputs(template, params, features, batched=False)
    amps = run_circuit_batch(template, params, features)
    return StateVector(template.n_qubits, amps[0])


def apply_gate(
    state: StateVector, op: GateOp, angle: float | None = None
) -> StateVector:
    """Apply one gate, returning a new state.

    For rotation gates the angle argument wins; if omitted the op must carry
    a fixed angle. Non-rotation gates reject an angle outright.
    """
    op.validate(state.n_qubits)
    if op.kind in ROTATION_KINDS:
        if angle is None:
            if op.angle is None or op.angle.source != "fixed":
                raise ValueError("rotation gate needs a resolved angle")
            angle = op.angle.value
        if not np.isfinite(angle):
            raise ValueError("rotation angle must be finite")
        theta = float(angle)
    else:
        if angle is not None:
            raise ValueError(f"{op.kind} takes no angle")
        theta = 0.0
    amps = state.amplitudes[None, :].copy()
    codes = np.array([_KIND_TO_CODE[op.kind]], dtype=np.int64)
    targets = np.array([op.target], dtype=np.int64)
    controls = np.array([-1 if op.control is None else op.control], dtype=np.int64)
    angles = np.array([[theta]], dtype=np.float64)
    _kernels.run_ops(amps, codes, targets, controls, angles)
    return StateVector(state.n_qubits, amps[0])


def _check_norm(probs: np.ndarray) -> None:
    total = probs.sum(axis=-1)
    if np.abs(total - 1.0).max() > NORM_TOL:
        raise NumericError(
            f"state norm drifted: sum of probabilities off by {np.abs(total - 1.0).max():.3e}"
        )


def expectation_z_all(state: StateVector) -> np.ndarray:
    """Exact per-qubit Pauli-Z expectations, shape (n_qubits,)."""
    _check_norm(state.probabilities())
    return _kernels.z_expectations(state.amplitudes[None, :], state.n_qubits)[0]


def z_expectations_batch(amps: np.ndarray, n_qubits: int) -> np.ndarray:
    probs = amps.real**2 + amps.imag**2
    _check_norm(probs)
    return _kernels.z_expectations(amps, n_qubits)


def sample_expectation_z(
    state: StateVector, shots: int, rng: np.random.Generator
) -> np.ndarray:
    """Estimate per-qubit Z expectations from a finite number of basis-state
    draws. Converges to expectation_z_all at the usual 1/sqrt(shots) rate."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    probs = state.probabilities()
    _check_norm(probs)
    draws = rng.choice(probs.shape[0], size=shots, p=probs / probs.sum())
    bits = (draws[:, None] >> np.arange(state.n_qubits)) & 1
    return 1.0 - 2.0 * bits.mean(axis=0)
