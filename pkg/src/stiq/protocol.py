"""Concurrent training of a model pair with obfuscated individual outputs.

Two hybrid models are updated side by side. Each batch step evaluates both
models at their current parameters, then computes each model's gradient of
the combined objective while holding the *other* model's logits fixed.
Because the objective depends on a model's parameters only through its own
logits, this is the exact partial derivative, and it halves the circuit
cost compared to differentiating a naive joint closure. A run flag restores
the joint closure (exact or spsa engines) for comparison.

Gradients through the circuits follow the engine choice; gradients through
the classical head are always cheap central differences at the logit level,
chained analytically through the linear head (no circuit runs involved).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import model as qm
from . import simulator, training
from .data import Dataset
from .harness import MetricsRow
from .model import QnnModel
from .templates import EncoderSpec, PqcSpec
from .training import AdamState, GradientEngine, LossConfig


@dataclass
class StiqPair:
    model_a: QnnModel
    model_b: QnnModel
    opt_a: AdamState
    opt_b: AdamState
    loss_cfg: LossConfig


@dataclass
class TrainRun:
    """Knobs for one training run. seed drives every stream the run uses
    (shuffling, spsa perturbations, shot sampling), split off a single
    SeedSequence so runs are reproducible bit for bit."""

    epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    lr: float = 0.01
    engine: GradientEngine = field(default_factory=GradientEngine)
    eval_shots: int | None = None
    joint_grad: bool = False

    def validate(self) -> None:
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        self.engine.validate()


# purpose tags for deriving independent child streams from one root seed
TAG_INIT_A = 0
TAG_INIT_B = 1
TAG_SHUFFLE = 2
TAG_SPSA = 3
TAG_SPLIT = 4
TAG_NOISE_A = 5
TAG_NOISE_B = 6


def child_seed(root: int, tag: int) -> int:
    """Deterministic per-purpose child seed from one root seed."""
    return int(np.random.SeedSequence(root, spawn_key=(tag,)).generate_state(1)[0])


def init_pair(
    n_qubits: int,
    n_classes: int,
    n_features: int,
    encoder: EncoderSpec | None = None,
    pqc: PqcSpec | None = None,
    loss_cfg: LossConfig | None = None,
    seed: int = 0,
    lr: float = 0.01,
) -> StiqPair:
    """Two independently initialized models sharing one architecture."""
    loss_cfg = loss_cfg or LossConfig()
    loss_cfg.validate()
    seed_a = child_seed(seed, TAG_INIT_A)
    seed_b = child_seed(seed, TAG_INIT_B)
    model_a = qm.init_model(n_qubits, n_classes, n_features, encoder, pqc, seed=seed_a)
    model_b = qm.init_model(n_qubits, n_classes, n_features, encoder, pqc, seed=seed_b)
    n_flat = qm.flat_params(model_a).shape[0]
    return StiqPair(
        model_a=model_a,
        model_b=model_b,
        opt_a=training.adam_init(n_flat, lr),
        opt_b=training.adam_init(n_flat, lr),
        loss_cfg=loss_cfg,
    )


def pair_for_inference(
    model_a: QnnModel, model_b: QnnModel, loss_cfg: LossConfig | None = None
) -> StiqPair:
    """Wrap two already-trained models for evaluation. The optimizer slots
    are fresh and only matter if the pair is trained further."""
    if model_a.n_classes != model_b.n_classes:
        raise ValueError("members disagree on class count")
    if model_a.n_features != model_b.n_features:
        raise ValueError("members disagree on feature count")
    loss_cfg = loss_cfg or LossConfig()
    loss_cfg.validate()
    n_flat = qm.flat_params(model_a).shape[0]
    return StiqPair(
        model_a=model_a,
        model_b=model_b,
        opt_a=training.adam_init(n_flat),
        opt_b=training.adam_init(qm.flat_params(model_b).shape[0]),
        loss_cfg=loss_cfg,
    )


# Four-point shift weights for controlled rotations. Their generator has
# eigenvalues {0, +-1/2}, so the response mixes a half and a full frequency;
# a second evaluation pair at +-3pi/2 separates the two. The same weights
# reproduce the plain two-point rule when the half frequency is absent.
_RT2 = np.sqrt(2.0)
_SHIFT_NEAR = (_RT2 + 1.0) / (4.0 * _RT2)
_SHIFT_FAR = -(_RT2 - 1.0) / (4.0 * _RT2)


def _controlled_param_slots(model: QnnModel) -> frozenset:
    """Trainable slots whose angle feeds a controlled rotation."""
    slots = set()
    for op in model.template().ops:
        if (
            op.angle is not None
            and op.angle.source == "param"
            and op.kind in simulator.CONTROLLED_KINDS
        ):
            slots.add(op.angle.index)
    return frozenset(slots)


def _logit_jacobian(rowfn, logits: np.ndarray, h: float) -> np.ndarray:
    """Per-sample d(loss_s)/d(logit_si) by central differences, (batch, k)."""
    jac = np.empty_like(logits)
    for i in range(logits.shape[1]):
        up = logits.copy()
        up[:, i] += h
        down = logits.copy()
        down[:, i] -= h
        jac[:, i] = (rowfn(up) - rowfn(down)) / (2.0 * h)
    return jac


def _head_gradients(rowfn, model: QnnModel, z: np.ndarray, h: float):
    """Central-difference gradients of the batch-mean loss for head weights
    and bias, reusing cached expectations (no circuit runs)."""
    g_w = np.empty_like(model.head_w)
    g_b = np.empty_like(model.head_b)
    for i in range(model.n_classes):
        for j in range(model.n_qubits):
            w_up = model.head_w.copy()
            w_up[i, j] += h
            w_dn = model.head_w.copy()
            w_dn[i, j] -= h
            up = rowfn(z @ w_up.T + model.head_b).mean()
            dn = rowfn(z @ w_dn.T + model.head_b).mean()
            g_w[i, j] = (up - dn) / (2.0 * h)
        b_up = model.head_b.copy()
        b_up[i] += h
        b_dn = model.head_b.copy()
        b_dn[i] -= h
        up = rowfn(z @ model.head_w.T + b_up).mean()
        dn = rowfn(z @ model.head_w.T + b_dn).mean()
        g_b[i] = (up - dn) / (2.0 * h)
    return g_w, g_b


def model_gradients(
    model: QnnModel,
    x_scaled: np.ndarray,
    rowfn,
    engine: GradientEngine,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Flat gradient (theta ++ head) of mean(rowfn(logits)) for one model.

    rowfn maps a (batch, n_classes) logit matrix to per-sample losses; any
    context (labels, the partner model's logits, loss weights) is baked into
    the closure. Engines:

    * shift: exact parameter-shift per circuit parameter, chained through
      the classical stage via a numeric logit jacobian.
    * exact: central differences on every coordinate.
    * spsa: simultaneous perturbation over the whole flat vector.
    """
    engine.validate()
    n_theta = model.n_theta

    if engine.kind == "spsa":
        base = qm.flat_params(model)
        n_w = model.head_w.size

        def loss_at(vec: np.ndarray) -> float:
            theta = vec[:n_theta]
            head_w = vec[n_theta : n_theta + n_w].reshape(model.head_w.shape)
            head_b = vec[n_theta + n_w :]
            z = qm.z_batch(model, x_scaled, theta=theta)
            return float(rowfn(z @ head_w.T + head_b).mean())

        return training.gradient(loss_at, base, engine, rng=rng)

    z = qm.z_batch(model, x_scaled)
    g_w, g_b = _head_gradients(rowfn, model, z, engine.h)
    g_theta = np.empty(n_theta, dtype=np.float64)
    batch = x_scaled.shape[0]

    if engine.kind == "shift":
        jac = _logit_jacobian(rowfn, qm.head_logits(model, z), engine.h)
        jac_z = jac @ model.head_w  # (batch, n_qubits): d loss_s / d z_sq
        controlled = _controlled_param_slots(model)
        half_pi = 0.5 * np.pi

        def z_at(slot: int, delta: float) -> np.ndarray:
            shifted = model.theta.copy()
            shifted[slot] += delta
            return qm.z_batch(model, x_scaled, theta=shifted)

        for i in range(n_theta):
            near = z_at(i, half_pi) - z_at(i, -half_pi)
            if i in controlled:
                far = z_at(i, 3.0 * half_pi) - z_at(i, -3.0 * half_pi)
                dz = _SHIFT_NEAR * near + _SHIFT_FAR * far
            else:
                dz = 0.5 * near
            g_theta[i] = float((jac_z * dz).sum()) / batch
    else:  # exact
        for i in range(n_theta):
            theta_up = model.theta.copy()
            theta_up[i] += engine.h
            theta_dn = model.theta.copy()
            theta_dn[i] -= engine.h
            up = rowfn(qm.head_logits(model, qm.z_batch(model, x_scaled, theta=theta_up))).mean()
            dn = rowfn(qm.head_logits(model, qm.z_batch(model, x_scaled, theta=theta_dn))).mean()
            g_theta[i] = (up - dn) / (2.0 * engine.h)

    return np.concatenate([g_theta, g_w.ravel(), g_b])


def _solo_rowfn(labels: np.ndarray):
    def rowfn(logits: np.ndarray) -> np.ndarray:
        return training.cross_entropy_rows(logits, labels)

    return rowfn


def _pair_rowfn(other_logits: np.ndarray, labels: np.ndarray, cfg: LossConfig):
    def rowfn(logits: np.ndarray) -> np.ndarray:
        return training.per_sample_losses(logits, other_logits, labels, cfg)[0]

    return rowfn


def _joint_gradients(
    pair: StiqPair,
    x_scaled: np.ndarray,
    labels: np.ndarray,
    engine: GradientEngine,
    rng: np.random.Generator | None,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the combined objective over both models' flat parameters
    at once. Comparison path; equal to the partial gradients up to the
    engine's own estimation error, at roughly twice the circuit cost."""
    if engine.kind == "shift":
        raise ValueError("joint gradients support the exact and spsa engines only")
    model_a, model_b = pair.model_a, pair.model_b
    flat_a = qm.flat_params(model_a)
    flat_b = qm.flat_params(model_b)
    n_a = flat_a.shape[0]
    cfg = pair.loss_cfg

    def loss_at(vec: np.ndarray) -> float:
        shadow_a = qm.clone_model(model_a)
        shadow_b = qm.clone_model(model_b)
        qm.assign_flat_params(shadow_a, vec[:n_a])
        qm.assign_flat_params(shadow_b, vec[n_a:])
        y1 = qm.head_logits(shadow_a, qm.z_batch(shadow_a, x_scaled))
        y2 = qm.head_logits(shadow_b, qm.z_batch(shadow_b, x_scaled))
        total, _, _ = training.total_loss_batch(y1, y2, labels, cfg)
        return total

    grad = training.gradient(loss_at, np.concatenate([flat_a, flat_b]), engine, rng=rng)
    return grad[:n_a], grad[n_a:]


def train_stiq_step(
    pair: StiqPair,
    x_scaled: np.ndarray,
    labels: np.ndarray,
    engine: GradientEngine,
    rng: np.random.Generator | None = None,
    joint: bool = False,
) -> tuple[StiqPair, tuple[float, float, float]]:
    """One synchronized batch update of both models.

    Both gradients are taken at the incoming parameters, then both Adam
    updates apply, so neither model sees the other's update mid-step.
    Returns the pre-update loss components (total, classification,
    divergence)."""
    cfg = pair.loss_cfg
    y1 = qm.forward_batch(pair.model_a, x_scaled)
    y2 = qm.forward_batch(pair.model_b, x_scaled)
    losses = training.total_loss_batch(y1, y2, labels, cfg)
    if not np.isfinite(losses[0]):
        raise simulator.NumericError("non-finite training loss")

    if joint:
        grad_a, grad_b = _joint_gradients(pair, x_scaled, labels, engine, rng)
    else:
        grad_a = model_gradients(
            pair.model_a, x_scaled, _pair_rowfn(y2, labels, cfg), engine, rng
        )
        grad_b = model_gradients(
            pair.model_b, x_scaled, _pair_rowfn(y1, labels, cfg), engine, rng
        )

    new_a, opt_a = training.adam_step(pair.opt_a, qm.flat_params(pair.model_a), grad_a)
    new_b, opt_b = training.adam_step(pair.opt_b, qm.flat_params(pair.model_b), grad_b)
    model_a = qm.clone_model(pair.model_a)
    model_b = qm.clone_model(pair.model_b)
    qm.assign_flat_params(model_a, new_a)
    qm.assign_flat_params(model_b, new_b)
    return (
        StiqPair(model_a, model_b, opt_a, opt_b, cfg),
        losses,
    )


def _eval_rng(seed: int, epoch: int, tag: int) -> np.random.Generator:
    return np.random.default_rng([seed, epoch, tag])


def evaluate(
    target: QnnModel | StiqPair,
    features: np.ndarray,
    labels: np.ndarray,
    shots: int | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[float, float]:
    """(accuracy, mean cross entropy) on raw features.

    For a pair the metrics are those of the aggregated output; individual
    series come from evaluate_pair_full."""
    if isinstance(target, StiqPair):
        full = evaluate_pair_full(target, features, labels, shots=shots, rng=rng)
        return full["combined_acc"], full["combined_loss"]
    labels = np.asarray(labels)
    logits = qm.forward_batch(target, qm.scaled_inputs(target, features), shots=shots, rng=rng)
    acc = float((logits.argmax(axis=1) == labels).mean())
    loss = float(training.cross_entropy_rows(logits, labels).mean())
    return acc, loss


def evaluate_pair_full(
    pair: StiqPair,
    features: np.ndarray,
    labels: np.ndarray,
    shots: int | None = None,
    rng: np.random.Generator | None = None,
) -> dict:
    """Individual and combined metrics from one pass (each circuit runs
    once; the combined series reuses the individual logits)."""
    labels = np.asarray(labels)
    y1 = qm.forward_batch(
        pair.model_a, qm.scaled_inputs(pair.model_a, features), shots=shots, rng=rng
    )
    y2 = qm.forward_batch(
        pair.model_b, qm.scaled_inputs(pair.model_b, features), shots=shots, rng=rng
    )
    combined = training.aggregate(y1, y2, pair.loss_cfg.aggregator)
    out = {}
    for tag, logits in (("qnn1", y1), ("qnn2", y2), ("combined", combined)):
        out[f"{tag}_acc"] = float((logits.argmax(axis=1) == labels).mean())
        out[f"{tag}_loss"] = float(training.cross_entropy_rows(logits, labels).mean())
    return out


def _split_arrays(dataset: Dataset):
    if dataset.split is None:
        raise ValueError("dataset has no train/test split")
    train_idx, test_idx = dataset.split
    return (
        dataset.features[train_idx],
        dataset.labels[train_idx],
        dataset.features[test_idx],
        dataset.labels[test_idx],
    )


def _batches(n: int, batch_size: int, order: np.ndarray):
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def train_baseline(
    model: QnnModel, dataset: Dataset, run: TrainRun
) -> tuple[QnnModel, list[MetricsRow]]:
    """Plain cross-entropy training of a single model. Returns the trained
    model and one metrics row per epoch (test-split accuracy/loss)."""
    run.validate()
    model = qm.clone_model(model)
    x_train_raw, y_train, x_test_raw, y_test = _split_arrays(dataset)
    qm.set_feature_scaling(model, x_train_raw)
    x_train = qm.scaled_inputs(model, x_train_raw)
    rng_shuffle = np.random.default_rng(child_seed(run.seed, TAG_SHUFFLE))
    rng_spsa = np.random.default_rng(child_seed(run.seed, TAG_SPSA))
    opt = training.adam_init(qm.flat_params(model).shape[0], run.lr)
    rows: list[MetricsRow] = []
    evals_start = simulator.evals.count
    t0 = time.perf_counter()
    for epoch in range(1, run.epochs + 1):
        order = rng_shuffle.permutation(x_train.shape[0])
        for idx in _batches(x_train.shape[0], run.batch_size, order):
            rowfn = _solo_rowfn(y_train[idx])
            grad = model_gradients(model, x_train[idx], rowfn, run.engine, rng_spsa)
            flat, opt = training.adam_step(opt, qm.flat_params(model), grad)
            qm.assign_flat_params(model, flat)
        acc, loss = evaluate(
            model,
            x_test_raw,
            y_test,
            shots=run.eval_shots,
            rng=_eval_rng(run.seed, epoch, 0) if run.eval_shots else None,
        )
        rows.append(
            MetricsRow(
                epoch=epoch,
                baseline_acc=acc,
                baseline_loss=loss,
                circuit_evals=simulator.evals.count - evals_start,
                wall_time_s=time.perf_counter() - t0,
            )
        )
    return model, rows


def train_stiq(
    pair: StiqPair, dataset: Dataset, run: TrainRun
) -> tuple[StiqPair, list[MetricsRow]]:
    """Concurrent pair training. Per-epoch rows carry the individual and
    combined test series; accuracies are fractions."""
    run.validate()
    pair.loss_cfg.validate()
    x_train_raw, y_train, x_test_raw, y_test = _split_arrays(dataset)
    pair = StiqPair(
        qm.clone_model(pair.model_a),
        qm.clone_model(pair.model_b),
        pair.opt_a,
        pair.opt_b,
        pair.loss_cfg,
    )
    qm.set_feature_scaling(pair.model_a, x_train_raw)
    qm.set_feature_scaling(pair.model_b, x_train_raw)
    x_train = qm.scaled_inputs(pair.model_a, x_train_raw)
    rng_shuffle = np.random.default_rng(child_seed(run.seed, TAG_SHUFFLE))
    rng_spsa = np.random.default_rng(child_seed(run.seed, TAG_SPSA))
    rows: list[MetricsRow] = []
    evals_start = simulator.evals.count
    t0 = time.perf_counter()
    for epoch in range(1, run.epochs + 1):
        order = rng_shuffle.permutation(x_train.shape[0])
        for idx in _batches(x_train.shape[0], run.batch_size, order):
            pair, _ = train_stiq_step(
                pair,
                x_train[idx],
                y_train[idx],
                run.engine,
                rng_spsa,
                joint=run.joint_grad,
            )
        metrics = evaluate_pair_full(
            pair,
            x_test_raw,
            y_test,
            shots=run.eval_shots,
            rng=_eval_rng(run.seed, epoch, 1) if run.eval_shots else None,
        )
        rows.append(
            MetricsRow(
                epoch=epoch,
                circuit_evals=simulator.evals.count - evals_start,
                wall_time_s=time.perf_counter() - t0,
                **metrics,
            )
        )
    return pair, rows
