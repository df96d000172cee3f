"""Hardware-noise emulation by Monte-Carlo trajectories.

Each shot simulates the circuit as a pure state; after every gate a
depolarizing event fires with probability p1 (single-qubit gates) or p2
(two-qubit gates) and inserts a uniformly chosen non-identity Pauli on the
touched qubit(s): 3 choices for one qubit, 15 for a pair. Each shot then
draws one basis state and flips every readout bit with the configured
asymmetric probabilities. Per-qubit Z estimates are the +-1 means over
shots, and the classical head runs on those noisy estimates.

Shots sharing a seed always reproduce: one generator drives the whole
estimate with a fixed draw order (error pattern, basis uniforms, readout
uniforms, then per-trajectory Pauli picks in shot order). Trajectories
that fire no error share the noiseless state, which is simulated once.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels, model as qm, simulator, training
from .model import PredictionVector, QnnModel
from .simulator import CircuitTemplate

PRESETS = {
    "low": {"p1": 0.0005, "p2": 0.005, "readout": 0.01},
    "med": {"p1": 0.001, "p2": 0.01, "readout": 0.02},
    "high": {"p1": 0.002, "p2": 0.02, "readout": 0.03},
}

_CONTROLLED_CODES = (_kernels.G_CNOT, _kernels.G_CRX, _kernels.G_CRY, _kernels.G_CRZ)
_PAULI_CODES = (_kernels.G_X, _kernels.G_Y, _kernels.G_Z)


@dataclass(frozen=True)
class NoiseConfig:
    p1: float = 0.0
    p2: float = 0.0
    readout_01: float = 0.0  # P(read 1 | true 0)
    readout_10: float = 0.0  # P(read 0 | true 1)
    shots: int = 1000
    seed: int = 0

    def validate(self) -> None:
        for name in ("p1", "p2", "readout_01", "readout_10"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be a probability, got {v}")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")

    def with_seed(self, seed: int) -> "NoiseConfig":
        return replace(self, seed=int(seed))


def preset_config(name: str, shots: int = 1000, seed: int = 0) -> NoiseConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown noise preset {name!r}; have {sorted(PRESETS)}")
    level = PRESETS[name]
    return NoiseConfig(
        p1=level["p1"],
        p2=level["p2"],
        readout_01=level["readout"],
        readout_10=level["readout"],
        shots=shots,
        seed=seed,
    )


def _trajectory_probs(
    compiled, angles_col: np.ndarray, flags: np.ndarray, paulis: list, n_qubits: int
) -> np.ndarray:
    """Probabilities of one error trajectory: the base gate list with the
    drawn Pauli insertions spliced in after each flagged gate."""
    codes, targets, controls = compiled[0], compiled[1], compiled[2]
    ext_codes: list[int] = []
    ext_targets: list[int] = []
    ext_controls: list[int] = []
    ext_angles: list[float] = []
    pick = iter(paulis)

    def push(code: int, target: int, control: int = -1, angle: float = 0.0) -> None:
        ext_codes.append(code)
        ext_targets.append(target)
        ext_controls.append(control)
        ext_angles.append(angle)

    for g in range(codes.shape[0]):
        push(int(codes[g]), int(targets[g]), int(controls[g]), float(angles_col[g]))
        if flags[g]:
            if int(codes[g]) in _CONTROLLED_CODES:
                choice = next(pick)  # 0..14 over the 15 non-identity pairs
                pc, pt = divmod(choice + 1, 4)
                if pc:
                    push(_PAULI_CODES[pc - 1], int(controls[g]))
                if pt:
                    push(_PAULI_CODES[pt - 1], int(targets[g]))
            else:
                choice = next(pick)  # 0..2 -> X, Y, Z
                push(_PAULI_CODES[choice], int(targets[g]))
    amps = np.zeros((1, 2**n_qubits), dtype=np.complex128)
    amps[0, 0] = 1.0
    _kernels.run_ops(
        amps,
        np.asarray(ext_codes, dtype=np.int64),
        np.asarray(ext_targets, dtype=np.int64),
        np.asarray(ext_controls, dtype=np.int64),
        np.asarray(ext_angles, dtype=np.float64)[:, None],
    )
    simulator.evals.add(1)
    return amps[0].real ** 2 + amps[0].imag ** 2


def noisy_z_estimate(
    template: CircuitTemplate,
    params: np.ndarray,
    features: np.ndarray,
    cfg: NoiseConfig,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Per-qubit Z estimates for one input under the trajectory model."""
    cfg.validate()
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    features = np.asarray(features, dtype=np.float64)
    base = simulator.run_circuit(template, params, features)
    compiled = template.compiled()
    codes = compiled[0]
    n_gates = codes.shape[0]
    angles_col = simulator._resolve_angles(
        compiled, np.asarray(params, dtype=np.float64), features[None, :], 1
    )[:, 0]
    p_gate = np.where(np.isin(codes, _CONTROLLED_CODES), cfg.p2, cfg.p1)

    err = rng.random((cfg.shots, n_gates)) < p_gate[None, :]
    basis_u = rng.random(cfg.shots)
    readout_u = rng.random((cfg.shots, template.n_qubits))

    dim = 2**template.n_qubits
    draws = np.empty(cfg.shots, dtype=np.int64)
    base_cum = np.cumsum(base.probabilities())
    clean = ~err.any(axis=1)
    draws[clean] = np.minimum(
        np.searchsorted(base_cum, basis_u[clean], side="right"), dim - 1
    )
    for s in np.flatnonzero(~clean):
        flags = err[s]
        paulis = []
        for g in np.flatnonzero(flags):
            if int(codes[g]) in _CONTROLLED_CODES:
                paulis.append(int(rng.integers(0, 15)))
            else:
                paulis.append(int(rng.integers(0, 3)))
        probs = _trajectory_probs(compiled, angles_col, flags, paulis, template.n_qubits)
        cum = np.cumsum(probs)
        draws[s] = min(int(np.searchsorted(cum, basis_u[s], side="right")), dim - 1)

    bits = (draws[:, None] >> np.arange(template.n_qubits)) & 1
    flip = np.where(bits == 0, readout_u < cfg.readout_01, readout_u < cfg.readout_10)
    bits = bits ^ flip
    return 1.0 - 2.0 * bits.mean(axis=0)


def noisy_forward(
    model: QnnModel,
    features: np.ndarray,
    cfg: NoiseConfig,
    rng: np.random.Generator | None = None,
) -> PredictionVector:
    """Single-sample prediction from pre-scaled features under noise."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (model.n_features,):
        raise ValueError(
            f"expected {model.n_features} features, got shape {features.shape}"
        )
    z = noisy_z_estimate(model.template(), model.theta, features, cfg, rng)
    logits = qm.head_logits(model, z)
    return PredictionVector(logits=logits, probabilities=training.softmax(logits))


def _pair_members(target):
    # local import keeps module import order simple
    from .protocol import StiqPair

    if isinstance(target, StiqPair):
        return (target.model_a, target.model_b), target.loss_cfg.aggregator
    return (target,), None


def noisy_evaluate(
    target,
    features: np.ndarray,
    labels: np.ndarray,
    cfg: NoiseConfig | tuple[NoiseConfig, NoiseConfig],
) -> tuple[float, float]:
    """(accuracy, mean cross entropy) over raw features with trajectory
    noise. For a pair, pass one config (shared) or a (cfg_a, cfg_b) tuple
    to emulate heterogeneous providers; metrics are for the aggregated
    output. Per-sample generators are split from each config's seed."""
    models, aggregator = _pair_members(target)
    if isinstance(cfg, tuple):
        if len(models) != len(cfg):
            raise ValueError("one noise config per model, or a single shared one")
        cfgs = tuple(cfg)
    else:
        cfgs = tuple(cfg for _ in models)
    for c in cfgs:
        c.validate()
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    n = features.shape[0]
    streams = [np.random.default_rng(c.seed).spawn(n) for c in cfgs]
    logits = np.zeros((len(models), n, models[0].n_classes), dtype=np.float64)
    for m, (mod, c) in enumerate(zip(models, cfgs)):
        x_scaled = qm.scaled_inputs(mod, features)
        for i in range(n):
            pv = noisy_forward(mod, x_scaled[i], c, streams[m][i])
            logits[m, i] = pv.logits
    if len(models) == 2:
        final = training.aggregate(logits[0], logits[1], aggregator)
    else:
        final = logits[0]
    acc = float((final.argmax(axis=1) == labels).mean())
    loss = float(training.cross_entropy_rows(final, labels).mean())
    return acc, loss
