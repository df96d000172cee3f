"""Run artifacts: metrics rows, obfuscation ratios, checkpoints and
two-provider split inference.

Accuracies are fractions everywhere in memory and become percentages only
in rendered CSV tables. Metrics CSVs carry no timing columns on purpose:
repeated runs with the same seed must produce byte-identical files, and
wall time never cooperates. Timings live in report.json instead.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import model as qm
from .data import DataError
from .model import QnnModel, PredictionVector
from .templates import EncoderSpec, PqcSpec
from .training import LossConfig, aggregate, softmax

CHECKPOINT_FORMAT = 1

METRICS_COLUMNS = (
    "epoch",
    "baseline_acc_pct",
    "baseline_loss",
    "qnn1_acc_pct",
    "qnn1_loss",
    "qnn2_acc_pct",
    "qnn2_loss",
    "combined_acc_pct",
    "combined_loss",
    "circuit_evals",
)

adversary_log = logging.getLogger("stiq.adversary")


@dataclass
class MetricsRow:
    epoch: int
    baseline_acc: float | None = None
    baseline_loss: float | None = None
    qnn1_acc: float | None = None
    qnn1_loss: float | None = None
    qnn2_acc: float | None = None
    qnn2_loss: float | None = None
    combined_acc: float | None = None
    combined_loss: float | None = None
    wall_time_s: float = 0.0
    circuit_evals: int = 0


def _fmt_acc(value: float | None) -> str:
    return "" if value is None else f"{100.0 * value:.4f}"


def _fmt_loss(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"


def metrics_to_csv(rows: list[MetricsRow], path) -> None:
    """Deterministic CSV rendering; accuracies as percentages, fixed
    decimals, no timing columns."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(METRICS_COLUMNS) + "\n")
        for row in rows:
            cells = [
                str(row.epoch),
                _fmt_acc(row.baseline_acc),
                _fmt_loss(row.baseline_loss),
                _fmt_acc(row.qnn1_acc),
                _fmt_loss(row.qnn1_loss),
                _fmt_acc(row.qnn2_acc),
                _fmt_loss(row.qnn2_loss),
                _fmt_acc(row.combined_acc),
                _fmt_loss(row.combined_loss),
                str(row.circuit_evals),
            ]
            fh.write(",".join(cells) + "\n")


@dataclass(frozen=True)
class ObfuscationReport:
    """Ratios of pair metrics to the baseline, all in matching units.

    accuracy_obfuscation: mean individual accuracy over baseline accuracy
    (small is good). loss_obfuscation: mean individual loss over baseline
    loss (large is good). accuracy_delta / loss_delta: combined over
    baseline (near 1 is good).
    """

    accuracy_obfuscation: float
    loss_obfuscation: float
    accuracy_delta: float
    loss_delta: float


def compute_obfuscation(
    baseline: tuple[float, float],
    qnn1: tuple[float, float],
    qnn2: tuple[float, float],
    combined: tuple[float, float],
) -> ObfuscationReport:
    """Each argument is (accuracy, loss) for its series; fractions or
    percentages both work as long as everything matches."""
    base_acc, base_loss = baseline
    if base_acc <= 0 or base_loss <= 0:
        raise ValueError("baseline accuracy and loss must be positive")
    return ObfuscationReport(
        accuracy_obfuscation=0.5 * (qnn1[0] + qnn2[0]) / base_acc,
        loss_obfuscation=0.5 * (qnn1[1] + qnn2[1]) / base_loss,
        accuracy_delta=combined[0] / base_acc,
        loss_delta=combined[1] / base_loss,
    )


def _encoder_dict(encoder: EncoderSpec) -> dict:
    return {
        "gate_kind": encoder.gate_kind,
        "features_per_qubit": encoder.features_per_qubit,
        "layout": encoder.layout,
        "h_prefix": encoder.h_prefix,
    }


def _loss_cfg_dict(cfg: LossConfig) -> dict:
    return {
        "aggregator": cfg.aggregator,
        "divergence": cfg.divergence,
        "penalty_lambda": cfg.penalty_lambda,
        "divergence_on": cfg.divergence_on,
    }


def loss_cfg_from_dict(blob: dict) -> LossConfig:
    cfg = LossConfig(
        aggregator=blob["aggregator"],
        divergence=blob["divergence"],
        penalty_lambda=blob["penalty_lambda"],
        divergence_on=blob.get("divergence_on", "logits"),
    )
    cfg.validate()
    return cfg


def save_checkpoint(
    model: QnnModel,
    path,
    loss_cfg: LossConfig | None = None,
    seed_lineage: dict | str = "",
    metrics: dict | None = None,
) -> None:
    """JSON checkpoint with everything needed to reload and run the model:
    architecture, parameters, head, feature-scaling bounds, and the loss
    configuration it was trained under (aggregator compatibility is checked
    at split-inference time). Floats serialize at full round-trip precision."""
    if model.feature_lo is None or model.feature_hi is None:
        raise ValueError("model has no feature scaling; refusing to checkpoint")
    blob = {
        "format_version": CHECKPOINT_FORMAT,
        "n_qubits": model.n_qubits,
        "n_classes": model.n_classes,
        "n_features": model.n_features,
        "encoder": _encoder_dict(model.encoder),
        "pqc": {"template_id": model.pqc.template_id, "n_layers": model.pqc.n_layers},
        "theta": model.theta.tolist(),
        "head_w": model.head_w.tolist(),
        "head_b": model.head_b.tolist(),
        "feature_lo": model.feature_lo.tolist(),
        "feature_hi": model.feature_hi.tolist(),
        "loss_cfg": None if loss_cfg is None else _loss_cfg_dict(loss_cfg),
        "seed_lineage": seed_lineage,
        "metrics": metrics or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(blob, fh, indent=1)
        fh.write("\n")


def load_checkpoint(path) -> tuple[QnnModel, dict]:
    """Returns the reconstructed model and the full checkpoint dict."""
    try:
        with open(path, encoding="utf-8") as fh:
            blob = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON: {exc}") from exc
    version = blob.get("format_version")
    if version != CHECKPOINT_FORMAT:
        raise DataError(f"{path}: unsupported checkpoint format {version!r}")
    required = (
        "n_qubits",
        "n_classes",
        "n_features",
        "encoder",
        "pqc",
        "theta",
        "head_w",
        "head_b",
        "feature_lo",
        "feature_hi",
    )
    missing = [key for key in required if key not in blob]
    if missing:
        raise DataError(f"{path}: checkpoint missing fields {missing}")
    enc = blob["encoder"]
    encoder = EncoderSpec(
        gate_kind=enc["gate_kind"],
        features_per_qubit=enc["features_per_qubit"],
        layout=enc.get("layout", "round_robin"),
        h_prefix=enc["h_prefix"],
    )
    pqc = PqcSpec(
        template_id=blob["pqc"]["template_id"], n_layers=blob["pqc"]["n_layers"]
    )
    model = QnnModel(
        n_qubits=blob["n_qubits"],
        n_classes=blob["n_classes"],
        n_features=blob["n_features"],
        encoder=encoder,
        pqc=pqc,
        theta=np.asarray(blob["theta"], dtype=np.float64),
        head_w=np.asarray(blob["head_w"], dtype=np.float64),
        head_b=np.asarray(blob["head_b"], dtype=np.float64),
        feature_lo=np.asarray(blob["feature_lo"], dtype=np.float64),
        feature_hi=np.asarray(blob["feature_hi"], dtype=np.float64),
    )
    if model.theta.shape != (model.template().n_params,):
        raise DataError(f"{path}: theta length does not match the architecture")
    if model.head_w.shape != (model.n_classes, model.n_qubits):
        raise DataError(f"{path}: head weight shape mismatch")
    return model, blob


def _fmt_vec(vec: np.ndarray) -> str:
    return "[" + ", ".join(f"{v:.6f}" for v in vec) + "]"


def split_infer(
    ckpt_a_path,
    ckpt_b_path,
    features: np.ndarray,
    shots: int | None = None,
    rng: np.random.Generator | None = None,
) -> list[tuple[np.ndarray, np.ndarray, PredictionVector]]:
    """Two-provider inference: each checkpoint produces its logits in
    isolation, aggregation happens only at the very end (client side).

    Per query and per provider one "adversary view" line is logged with
    that provider's logits alone; the aggregated output never appears in
    the log, mirroring what an eavesdropper at either provider could see.
    """
    model_a, meta_a = load_checkpoint(ckpt_a_path)
    model_b, meta_b = load_checkpoint(ckpt_b_path)
    if model_a.n_classes != model_b.n_classes:
        raise DataError("checkpoints disagree on the number of classes")
    if model_a.n_features != model_b.n_features:
        raise DataError("checkpoints disagree on the feature dimension")
    cfg_a, cfg_b = meta_a.get("loss_cfg"), meta_b.get("loss_cfg")
    if cfg_a is None or cfg_b is None:
        raise DataError("both checkpoints must record their loss configuration")
    if cfg_a["aggregator"] != cfg_b["aggregator"]:
        raise DataError(
            f"aggregator mismatch: {cfg_a['aggregator']!r} vs {cfg_b['aggregator']!r}"
        )
    aggregator = cfg_a["aggregator"]
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if features.shape[1] != model_a.n_features:
        raise DataError(
            f"queries have {features.shape[1]} features, models expect {model_a.n_features}"
        )
    y1 = qm.forward_batch(model_a, qm.scaled_inputs(model_a, features), shots=shots, rng=rng)
    y2 = qm.forward_batch(model_b, qm.scaled_inputs(model_b, features), shots=shots, rng=rng)
    results = []
    for i in range(features.shape[0]):
        adversary_log.info("query %d provider a logits %s", i, _fmt_vec(y1[i]))
        adversary_log.info("query %d provider b logits %s", i, _fmt_vec(y2[i]))
        combined = aggregate(y1[i], y2[i], aggregator)
        results.append(
            (y1[i], y2[i], PredictionVector(logits=combined, probabilities=softmax(combined)))
        )
    return results
