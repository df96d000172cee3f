"""Losses, output aggregation, divergence penalties, gradient engines and
the Adam update.

The central objective combines a classification term with a weighted
divergence term:

    total = cross_entropy(aggregate(y1, y2), label) + penalty * divergence(y1, y2)

where y1, y2 are the raw logit vectors of the two co-trained models. The
divergence is signed so that *minimizing* the total pushes the two outputs
apart while the aggregated prediction still has to classify correctly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .simulator import NumericError

AGGREGATOR_KINDS = ("mean", "sum", "max", "prodnorm")
DIVERGENCE_KINDS = ("cosine", "l1", "l2", "none")
GRADIENT_KINDS = ("exact", "shift", "spsa")

_COSINE_EPS = 1e-12
_PROB_FLOOR = 1e-300


def softmax(logits: np.ndarray) -> np.ndarray:
    """Stable softmax over the last axis."""
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits: np.ndarray, label: int) -> float:
    """Negative log softmax probability of the true class."""
    logits = np.asarray(logits, dtype=np.float64)
    if not 0 <= label < logits.shape[-1]:
        raise ValueError(f"label {label} out of range for {logits.shape[-1]} classes")
    shifted = logits - logits.max()
    return float(np.log(np.exp(shifted).sum()) - shifted[label])


def cross_entropy_rows(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-sample cross entropy for a (batch, classes) logit matrix."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(shifted.shape[0]), labels]
    return logsumexp - picked


def aggregate(y1: np.ndarray, y2: np.ndarray, kind: str = "mean") -> np.ndarray:
    """Combine two logit vectors (or batches of them) elementwise.

    prodnorm multiplies the two softmax distributions, renormalizes, and
    returns the log of the result as pseudo-logits, so downstream softmax
    recovers exactly the normalized product.
    """
    y1 = np.asarray(y1, dtype=np.float64)
    y2 = np.asarray(y2, dtype=np.float64)
    if y1.shape != y2.shape:
        raise ValueError("logit shapes differ")
    if kind == "mean":
        return 0.5 * (y1 + y2)
    if kind == "sum":
        return y1 + y2
    if kind == "max":
        return np.maximum(y1, y2)
    if kind == "prodnorm":
        p = softmax(y1) * softmax(y2)
        p = p / p.sum(axis=-1, keepdims=True)
        return np.log(np.maximum(p, _PROB_FLOOR))
    raise ValueError(f"unknown aggregator {kind!r}")


def divergence(y1: np.ndarray, y2: np.ndarray, kind: str = "cosine") -> float:
    """Similarity penalty between two output vectors; lower means further
    apart. l1/l2 are negated distances for exactly that reason."""
    return float(divergence_rows(np.atleast_2d(y1), np.atleast_2d(y2), kind)[0])


def divergence_rows(y1: np.ndarray, y2: np.ndarray, kind: str) -> np.ndarray:
    y1 = np.asarray(y1, dtype=np.float64)
    y2 = np.asarray(y2, dtype=np.float64)
    if y1.shape != y2.shape:
        raise ValueError("logit shapes differ")
    if kind == "none":
        return np.zeros(y1.shape[0], dtype=np.float64)
    if kind == "cosine":
        dots = (y1 * y2).sum(axis=1)
        norms = np.linalg.norm(y1, axis=1) * np.linalg.norm(y2, axis=1)
        return dots / np.maximum(norms, _COSINE_EPS)
    if kind == "l1":
        return -np.abs(y1 - y2).sum(axis=1)
    if kind == "l2":
        return -((y1 - y2) ** 2).sum(axis=1)
    raise ValueError(f"unknown divergence {kind!r}")


@dataclass(frozen=True)
class LossConfig:
    aggregator: str = "mean"
    divergence: str = "cosine"
    penalty_lambda: float = 0.3
    divergence_on: str = "logits"  # or "probabilities"

    def validate(self) -> None:
        if self.aggregator not in AGGREGATOR_KINDS:
            raise ValueError(f"unknown aggregator {self.aggregator!r}")
        if self.divergence not in DIVERGENCE_KINDS:
            raise ValueError(f"unknown divergence {self.divergence!r}")
        if self.divergence_on not in ("logits", "probabilities"):
            raise ValueError("divergence_on must be 'logits' or 'probabilities'")
        lam = self.penalty_lambda
        if self.divergence == "none":
            if not 0.0 <= lam <= 1.0:
                raise ValueError("penalty_lambda must be in [0, 1]")
        elif not 0.0 < lam <= 1.0:
            raise ValueError("penalty_lambda must be in (0, 1]")


def per_sample_losses(
    y1: np.ndarray, y2: np.ndarray, labels: np.ndarray, cfg: LossConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(total, classification, divergence) per sample, each (batch,)."""
    combined = aggregate(y1, y2, cfg.aggregator)
    lc = cross_entropy_rows(combined, labels)
    if cfg.divergence == "none":
        ld = np.zeros_like(lc)
    else:
        d1, d2 = (y1, y2)
        if cfg.divergence_on == "probabilities":
            d1, d2 = softmax(y1), softmax(y2)
        ld = divergence_rows(d1, d2, cfg.divergence)
    return lc + cfg.penalty_lambda * ld, lc, ld


def total_loss(
    y1: np.ndarray, y2: np.ndarray, label: int, cfg: LossConfig
) -> tuple[float, float, float]:
    """Single-sample combined objective. Returns (total, classification,
    divergence); total == classification + penalty * divergence exactly."""
    cfg.validate()
    labels = np.asarray([label])
    lt, lc, ld = per_sample_losses(
        np.atleast_2d(y1), np.atleast_2d(y2), labels, cfg
    )
    return float(lt[0]), float(lc[0]), float(ld[0])


def total_loss_batch(
    y1: np.ndarray, y2: np.ndarray, labels: np.ndarray, cfg: LossConfig
) -> tuple[float, float, float]:
    """Batch means of the three loss components."""
    cfg.validate()
    lt, lc, ld = per_sample_losses(y1, y2, np.asarray(labels), cfg)
    return float(lt.mean()), float(lc.mean()), float(ld.mean())


@dataclass(frozen=True)
class GradientEngine:
    """How gradients are estimated.

    exact: central differences with step h on every coordinate.
    shift: +-pi/2 evaluations on rotation-angle coordinates (exact for
        losses that are expectations of the shifted gates; model trainers
        chain it through their classical stage), central differences on the
        rest.
    spsa: simultaneous-perturbation estimate, averaged over `reps`
        Rademacher draws with perturbation size c. No decay schedule; the
        hyperparameters are recorded alongside every run that uses them.
    """

    kind: str = "shift"
    h: float = 1e-5
    c: float = 0.1
    reps: int = 4
    seed: int = 0

    def validate(self) -> None:
        if self.kind not in GRADIENT_KINDS:
            raise ValueError(f"unknown gradient engine {self.kind!r}")
        if self.h <= 0 or self.c <= 0 or self.reps < 1:
            raise ValueError("need h > 0, c > 0, reps >= 1")

    def with_seed(self, seed: int) -> "GradientEngine":
        return replace(self, seed=seed)


def _central_diff(loss_fn, params: np.ndarray, idx: int, h: float) -> float:
    step = np.zeros_like(params)
    step[idx] = h
    return (loss_fn(params + step) - loss_fn(params - step)) / (2.0 * h)


def gradient(
    loss_fn,
    params: np.ndarray,
    engine: GradientEngine,
    shift_mask: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Estimate d loss_fn / d params with the configured engine.

    shift_mask marks which coordinates are rotation angles (shift engine
    only; default all of them). loss_fn must be deterministic.
    """
    engine.validate()
    params = np.asarray(params, dtype=np.float64)
    grad = np.empty_like(params)
    if engine.kind == "exact":
        for i in range(params.shape[0]):
            grad[i] = _central_diff(loss_fn, params, i, engine.h)
        return grad
    if engine.kind == "shift":
        if shift_mask is None:
            shift_mask = np.ones(params.shape[0], dtype=bool)
        half_pi = 0.5 * np.pi
        for i in range(params.shape[0]):
            if shift_mask[i]:
                step = np.zeros_like(params)
                step[i] = half_pi
                grad[i] = 0.5 * (loss_fn(params + step) - loss_fn(params - step))
            else:
                grad[i] = _central_diff(loss_fn, params, i, engine.h)
        return grad
    # spsa
    if rng is None:
        rng = np.random.default_rng(engine.seed)
    grad[:] = 0.0
    for _ in range(engine.reps):
        delta = rng.integers(0, 2, size=params.shape[0]) * 2.0 - 1.0
        bump = engine.c * delta
        scale = (loss_fn(params + bump) - loss_fn(params - bump)) / (2.0 * engine.c)
        grad += scale * delta  # delta is +-1, so 1/delta == delta
    grad /= engine.reps
    return grad


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(n_params: int, lr: float = 0.01) -> AdamState:
    return AdamState(
        m=np.zeros(n_params, dtype=np.float64),
        v=np.zeros(n_params, dtype=np.float64),
        lr=lr,
    )


def adam_step(
    state: AdamState, params: np.ndarray, grads: np.ndarray
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update. Returns fresh arrays; neither input
    is mutated."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError("parameter/gradient/state shapes differ")
    if not np.isfinite(grads).all():
        raise NumericError("non-finite gradient")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads**2
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(
        m=m, v=v, t=t, lr=state.lr, beta1=state.beta1, beta2=state.beta2, eps=state.eps
    )
    return new_params, new_state
