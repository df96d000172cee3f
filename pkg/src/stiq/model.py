"""Hybrid quantum-classical classifier.

A model is a circuit template (encoding plus layered parameterized gates),
a trainable angle vector theta, and a linear head mapping the per-qubit
Pauli-Z expectations to class logits. Features are angle-encoded, so inputs
must be scaled to rotation range before they reach the circuit; the scaling
bounds are learned from the training split only and travel with the model
so that checkpoints stay self-contained.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import simulator
from .simulator import CircuitTemplate, NumericError, StateVector
from .templates import EncoderSpec, PqcSpec, expand_template
from .training import softmax

TWO_PI = 2.0 * np.pi


@dataclass
class PredictionVector:
    logits: np.ndarray
    probabilities: np.ndarray


@dataclass
class QnnModel:
    n_qubits: int
    n_classes: int
    n_features: int
    encoder: EncoderSpec
    pqc: PqcSpec
    theta: np.ndarray
    head_w: np.ndarray  # (n_classes, n_qubits)
    head_b: np.ndarray  # (n_classes,)
    feature_lo: np.ndarray | None = None  # per-feature train-split minima
    feature_hi: np.ndarray | None = None
    _template: CircuitTemplate | None = field(default=None, repr=False, compare=False)

    def template(self) -> CircuitTemplate:
        if self._template is None:
            self._template = expand_template(
                self.n_qubits, self.encoder, self.pqc, self.n_features
            )
        return self._template

    @property
    def n_theta(self) -> int:
        return self.theta.shape[0]


def init_model(
    n_qubits: int,
    n_classes: int,
    n_features: int,
    encoder: EncoderSpec | None = None,
    pqc: PqcSpec | None = None,
    seed: int = 0,
) -> QnnModel:
    """Fresh model with theta ~ U(0, 2pi) and a small uniform head."""
    encoder = encoder or EncoderSpec()
    pqc = pqc or PqcSpec()
    template = expand_template(n_qubits, encoder, pqc, n_features)
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, TWO_PI, size=template.n_params)
    bound = 1.0 / np.sqrt(n_qubits)
    head_w = rng.uniform(-bound, bound, size=(n_classes, n_qubits))
    head_b = np.zeros(n_classes, dtype=np.float64)
    model = QnnModel(
        n_qubits=n_qubits,
        n_classes=n_classes,
        n_features=n_features,
        encoder=encoder,
        pqc=pqc,
        theta=theta,
        head_w=head_w,
        head_b=head_b,
        _template=template,
    )
    return model


def clone_model(model: QnnModel) -> QnnModel:
    return QnnModel(
        n_qubits=model.n_qubits,
        n_classes=model.n_classes,
        n_features=model.n_features,
        encoder=model.encoder,
        pqc=model.pqc,
        theta=model.theta.copy(),
        head_w=model.head_w.copy(),
        head_b=model.head_b.copy(),
        feature_lo=None if model.feature_lo is None else model.feature_lo.copy(),
        feature_hi=None if model.feature_hi is None else model.feature_hi.copy(),
        _template=model._template,
    )


def fit_feature_range(x_train: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature min/max of the training split."""
    x_train = np.asarray(x_train, dtype=np.float64)
    if not np.isfinite(x_train).all():
        raise ValueError("features must be finite")
    return x_train.min(axis=0), x_train.max(axis=0)


def scale_features(
    raw: np.ndarray,
    train_min: np.ndarray,
    train_max: np.ndarray,
    lo: float = 0.0,
    hi: float = TWO_PI,
) -> np.ndarray:
    """Map the training-split range [train_min, train_max] onto [lo, hi],
    feature by feature.

    Returns a scaled copy; the input is untouched. Values outside the
    training range (test-split stragglers) extrapolate linearly rather than
    clip. A constant feature maps to the midpoint of [lo, hi].
    """
    raw = np.asarray(raw, dtype=np.float64)
    if not np.isfinite(raw).all():
        raise ValueError("features must be finite")
    if hi <= lo:
        raise ValueError("need hi > lo")
    train_min = np.asarray(train_min, dtype=np.float64)
    train_max = np.asarray(train_max, dtype=np.float64)
    span = train_max - train_min
    constant = span == 0.0
    safe_span = np.where(constant, 1.0, span)
    scaled = lo + (raw - train_min) * (hi - lo) / safe_span
    mid = np.broadcast_to(0.5 * (lo + hi), scaled.shape)
    return np.where(constant, mid, scaled)


def set_feature_scaling(model: QnnModel, x_train: np.ndarray) -> None:
    model.feature_lo, model.feature_hi = fit_feature_range(x_train)


def scaled_inputs(model: QnnModel, x_raw: np.ndarray) -> np.ndarray:
    if model.feature_lo is None or model.feature_hi is None:
        raise ValueError("model has no feature scaling; train it or load a checkpoint")
    return scale_features(x_raw, model.feature_lo, model.feature_hi)


def z_batch(
    model: QnnModel,
    x_scaled: np.ndarray,
    theta: np.ndarray | None = None,
    shots: int | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Per-qubit Z expectations for a whole batch, exact or shot-sampled.

    theta overrides the stored parameters (used by shifted gradient
    evaluations without touching the model).
    """
    template = model.template()
    amps = simulator.run_circuit_batch(
        template, model.theta if theta is None else theta, x_scaled
    )
    if shots is None:
        return simulator.z_expectations_batch(amps, model.n_qubits)
    if rng is None:
        raise ValueError("shot-based execution needs an rng")
    out = np.empty((amps.shape[0], model.n_qubits), dtype=np.float64)
    for row in range(amps.shape[0]):
        state = StateVector(model.n_qubits, amps[row])
        out[row] = simulator.sample_expectation_z(state, shots, rng)
    return out


def head_logits(model: QnnModel, z: np.ndarray) -> np.ndarray:
    return z @ model.head_w.T + model.head_b


def forward_batch(
    model: QnnModel,
    x_scaled: np.ndarray,
    shots: int | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """(batch, n_classes) logits for pre-scaled features."""
    z = z_batch(model, x_scaled, shots=shots, rng=rng)
    logits = head_logits(model, z)
    if not np.isfinite(logits).all():
        raise NumericError("non-finite logits")
    return logits


def forward(
    model: QnnModel,
    features: np.ndarray,
    shots: int | None = None,
    rng: np.random.Generator | None = None,
) -> PredictionVector:
    """Single-sample prediction from pre-scaled features."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (model.n_features,):
        raise ValueError(
            f"expected {model.n_features} features, got shape {features.shape}"
        )
    logits = forward_batch(model, features[None, :], shots=shots, rng=rng)[0]
    return PredictionVector(logits=logits, probabilities=softmax(logits))


def predict_class(prediction: PredictionVector) -> int:
    """Index of the most probable class; ties break to the lowest index."""
    return int(np.argmax(prediction.probabilities))


def flat_params(model: QnnModel) -> np.ndarray:
    """theta ++ head weights ++ head bias as one vector."""
    return np.concatenate([model.theta, model.head_w.ravel(), model.head_b])


def assign_flat_params(model: QnnModel, vec: np.ndarray) -> None:
    n_t = model.n_theta
    n_w = model.head_w.size
    if vec.shape != (n_t + n_w + model.head_b.size,):
        raise ValueError("flat parameter vector has wrong length")
    model.theta = vec[:n_t].copy()
    model.head_w = vec[n_t : n_t + n_w].reshape(model.head_w.shape).copy()
    model.head_b = vec[n_t + n_w :].copy()
