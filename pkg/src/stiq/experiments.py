"""Experiment orchestration shared by the CLI and tests.

Every experiment here is deterministic given its seed: dataset splits,
model initialization, batch shuffling and any sampling all derive their
streams from the one root seed via tagged children, so rerunning a command
reproduces its metrics files byte for byte. Timing goes to report.json
only, never into metrics CSVs.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import harness, model as qm, noise, protocol, vqa
from .data import Dataset
from .harness import MetricsRow
from .model import QnnModel
from .protocol import TrainRun, child_seed
from .templates import EncoderSpec, PqcSpec
from .training import GradientEngine, LossConfig

#: Per-divergence penalty weights used by compare_divergences when the
#: caller does not override them. Cosine is bounded by 1, so it tolerates a
#: larger weight; the signed distances grow with logit scale and need a
#: smaller one to keep the classification term in charge.
DEFAULT_DIVERGENCE_LAMBDAS = {"cosine": 0.3, "l1": 0.05, "l2": 0.05}


@dataclass(frozen=True)
class Architecture:
    n_qubits: int = 4
    n_layers: int = 2
    template_id: str = "circuit4"
    encoder: EncoderSpec = field(default_factory=EncoderSpec)

    def pqc(self) -> PqcSpec:
        return PqcSpec(template_id=self.template_id, n_layers=self.n_layers)

    def as_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "n_layers": self.n_layers,
            "template_id": self.template_id,
            "encoder": {
                "gate_kind": self.encoder.gate_kind,
                "features_per_qubit": self.encoder.features_per_qubit,
                "layout": self.encoder.layout,
                "h_prefix": self.encoder.h_prefix,
            },
        }


def engine_dict(engine: GradientEngine) -> dict:
    return {
        "kind": engine.kind,
        "h": engine.h,
        "c": engine.c,
        "reps": engine.reps,
    }


def run_dict(run: TrainRun) -> dict:
    return {
        "epochs": run.epochs,
        "batch_size": run.batch_size,
        "seed": run.seed,
        "lr": run.lr,
        "engine": engine_dict(run.engine),
        "eval_shots": run.eval_shots,
        "joint_grad": run.joint_grad,
    }


def _check_capacity(dataset: Dataset, arch: Architecture) -> None:
    capacity = arch.n_qubits * arch.encoder.features_per_qubit
    if dataset.dim > capacity:
        from .data import DataError

        raise DataError(
            f"dataset has {dataset.dim} features but {arch.n_qubits} qubits "
            f"x {arch.encoder.features_per_qubit} per qubit hold only {capacity}"
        )


def baseline_model(dataset: Dataset, arch: Architecture, seed: int) -> QnnModel:
    """Untrained reference model. Uses the same init stream as a pair's
    first member so baseline-vs-pair comparisons start from shared weights."""
    return qm.init_model(
        arch.n_qubits,
        dataset.n_classes,
        dataset.dim,
        arch.encoder,
        arch.pqc(),
        seed=child_seed(seed, protocol.TAG_INIT_A),
    )


def train_baseline_experiment(
    dataset: Dataset, arch: Architecture, run: TrainRun
) -> tuple[QnnModel, list[MetricsRow]]:
    _check_capacity(dataset, arch)
    model = baseline_model(dataset, arch, run.seed)
    return protocol.train_baseline(model, dataset, run)


def train_stiq_experiment(
    dataset: Dataset,
    arch: Architecture,
    loss_cfg: LossConfig,
    run: TrainRun,
    with_baseline: bool = True,
) -> dict:
    """Train a pair (and optionally the matching baseline) and assemble the
    merged per-epoch rows plus the final obfuscation ratios."""
    _check_capacity(dataset, arch)
    result: dict = {"loss_cfg": harness._loss_cfg_dict(loss_cfg)}
    baseline_rows: list[MetricsRow] = []
    if with_baseline:
        base, baseline_rows = train_baseline_experiment(dataset, arch, run)
        result["baseline"] = base
        result["baseline_rows"] = baseline_rows
    pair = protocol.init_pair(
        arch.n_qubits,
        dataset.n_classes,
        dataset.dim,
        arch.encoder,
        arch.pqc(),
        loss_cfg,
        seed=run.seed,
        lr=run.lr,
    )
    pair, rows = protocol.train_stiq(pair, dataset, run)
    for i, row in enumerate(rows):
        if i < len(baseline_rows):
            row.baseline_acc = baseline_rows[i].baseline_acc
            row.baseline_loss = baseline_rows[i].baseline_loss
    result["pair"] = pair
    result["rows"] = rows
    if with_baseline and rows:
        last = rows[-1]
        blast = baseline_rows[-1]
        result["obfuscation"] = harness.compute_obfuscation(
            (blast.baseline_acc, blast.baseline_loss),
            (last.qnn1_acc, last.qnn1_loss),
            (last.qnn2_acc, last.qnn2_loss),
            (last.combined_acc, last.combined_loss),
        )
    return result


def sweep_penalty(
    dataset: Dataset,
    arch: Architecture,
    lambdas: tuple[float, ...],
    run: TrainRun,
    divergence: str = "cosine",
    aggregator: str = "mean",
) -> list[dict]:
    """One baseline plus one pair per penalty weight, all sharing the run
    seed so only the penalty changes between cells."""
    _check_capacity(dataset, arch)
    base, base_rows = train_baseline_experiment(dataset, arch, run)
    base_acc = base_rows[-1].baseline_acc if base_rows else None
    base_loss = base_rows[-1].baseline_loss if base_rows else None
    out = []
    for lam in lambdas:
        cfg = LossConfig(
            aggregator=aggregator, divergence=divergence, penalty_lambda=lam
        )
        pair = protocol.init_pair(
            arch.n_qubits,
            dataset.n_classes,
            dataset.dim,
            arch.encoder,
            arch.pqc(),
            cfg,
            seed=run.seed,
            lr=run.lr,
        )
        pair, rows = protocol.train_stiq(pair, dataset, run)
        last = rows[-1]
        out.append(
            {
                "penalty_lambda": lam,
                "baseline_acc": base_acc,
                "baseline_loss": base_loss,
                "qnn1_acc": last.qnn1_acc,
                "qnn1_loss": last.qnn1_loss,
                "qnn2_acc": last.qnn2_acc,
                "qnn2_loss": last.qnn2_loss,
                "combined_acc": last.combined_acc,
                "combined_loss": last.combined_loss,
                "circuit_evals": last.circuit_evals,
            }
        )
    return out


def compare_divergences(
    dataset: Dataset,
    arch: Architecture,
    run: TrainRun,
    kinds: tuple[str, ...] = ("cosine", "l1", "l2"),
    lambda_by_kind: dict[str, float] | None = None,
    aggregator: str = "mean",
) -> list[dict]:
    _check_capacity(dataset, arch)
    weights = dict(DEFAULT_DIVERGENCE_LAMBDAS)
    if lambda_by_kind:
        weights.update(lambda_by_kind)
    base, base_rows = train_baseline_experiment(dataset, arch, run)
    base_acc = base_rows[-1].baseline_acc if base_rows else None
    base_loss = base_rows[-1].baseline_loss if base_rows else None
    out = []
    for kind in kinds:
        if kind not in weights:
            raise ValueError(f"no penalty weight known for divergence {kind!r}")
        cfg = LossConfig(
            aggregator=aggregator, divergence=kind, penalty_lambda=weights[kind]
        )
        pair = protocol.init_pair(
            arch.n_qubits,
            dataset.n_classes,
            dataset.dim,
            arch.encoder,
            arch.pqc(),
            cfg,
            seed=run.seed,
            lr=run.lr,
        )
        pair, rows = protocol.train_stiq(pair, dataset, run)
        last = rows[-1]
        out.append(
            {
                "divergence": kind,
                "penalty_lambda": weights[kind],
                "baseline_acc": base_acc,
                "baseline_loss": base_loss,
                "qnn1_acc": last.qnn1_acc,
                "qnn1_loss": last.qnn1_loss,
                "qnn2_acc": last.qnn2_acc,
                "qnn2_loss": last.qnn2_loss,
                "combined_acc": last.combined_acc,
                "combined_loss": last.combined_loss,
            }
        )
    return out


def scalability_sweep(
    dataset: Dataset,
    sizes: tuple[int, ...],
    run: TrainRun,
    arch: Architecture | None = None,
    loss_cfg: LossConfig | None = None,
) -> list[dict]:
    """Grow the qubit count at fixed data/objective. Means SPSA in practice;
    per-size rows carry final metrics, wall time and the eval counter."""
    base_arch = arch or Architecture()
    loss_cfg = loss_cfg or LossConfig()
    rows = []
    for size in sizes:
        cell_arch = Architecture(
            n_qubits=size,
            n_layers=base_arch.n_layers,
            template_id=base_arch.template_id,
            encoder=base_arch.encoder,
        )
        _check_capacity(dataset, cell_arch)
        t0 = time.perf_counter()
        result = train_stiq_experiment(dataset, cell_arch, loss_cfg, run)
        wall = time.perf_counter() - t0
        last = result["rows"][-1]
        rows.append(
            {
                "n_qubits": size,
                "baseline_acc": last.baseline_acc,
                "qnn1_acc": last.qnn1_acc,
                "qnn2_acc": last.qnn2_acc,
                "combined_acc": last.combined_acc,
                "circuit_evals": last.circuit_evals,
                "wall_time_s": wall,
            }
        )
    return rows


def noisy_eval_experiment(
    target,
    dataset: Dataset,
    cfg: noise.NoiseConfig | tuple[noise.NoiseConfig, noise.NoiseConfig],
) -> tuple[float, float]:
    if dataset.split is None:
        raise ValueError("dataset has no split")
    _, test_idx = dataset.split
    return noise.noisy_evaluate(
        target, dataset.features[test_idx], dataset.labels[test_idx], cfg
    )


def vqa_demo_experiment(
    hamiltonian_text: str,
    steps: int = 200,
    penalty_lambda: float = 0.1,
    seed: int = 0,
    lr: float = 0.1,
    template_id: str | None = None,
    n_layers: int = 1,
) -> dict:
    ham = vqa.parse_hamiltonian(hamiltonian_text)
    template = None
    if template_id is not None:
        from .templates import expand_template

        template = expand_template(
            ham.n_qubits,
            EncoderSpec(h_prefix=False),
            PqcSpec(template_id=template_id, n_layers=n_layers),
            n_features=0,
        )
    return vqa.vqa_train_demo(
        ham,
        template=template,
        steps=steps,
        penalty_lambda=penalty_lambda,
        seed=seed,
        lr=lr,
    )


# ---------------------------------------------------------------------------
# output files


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def write_table(path, columns: tuple[str, ...], rows: list[dict]) -> None:
    """Small deterministic CSV for sweep-style outputs. Accuracy columns
    (*_acc) render as percentages with fixed decimals."""

    def fmt(col: str, value) -> str:
        if value is None:
            return ""
        if col.endswith("_acc"):
            return f"{100.0 * value:.4f}"
        if isinstance(value, float):
            return f"{value:.6f}"
        return str(value)

    with open(path, "w", encoding="utf-8") as fh:
        header = [c + "_pct" if c.endswith("_acc") else c for c in columns]
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(c, row.get(c)) for c in columns) + "\n")


def write_report(path, payload: dict) -> None:
    import json

    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if hasattr(obj, "__dict__"):
        return vars(obj)
    raise TypeError(f"cannot serialize {type(obj)!r}")
