"""Command line entry point.

Exit codes: 0 success, 2 usage error (bad flags or values), 3 data error
(unreadable or malformed dataset / checkpoint), 4 numeric failure during
training or evaluation.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from . import experiments, harness, noise, protocol
from .data import DataError, Dataset, load_csv, save_csv, subset_classes, synth_blobs
from .experiments import Architecture
from .protocol import TAG_SPLIT, TrainRun, child_seed
from .simulator import NumericError
from .templates import TEMPLATE_IDS, EncoderSpec
from .training import (
    AGGREGATOR_KINDS,
    DIVERGENCE_KINDS,
    GRADIENT_KINDS,
    GradientEngine,
    LossConfig,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _dataset_from_arg(spec: str, class_subset) -> Dataset:
    """Either a CSV path or an inline synthetic recipe like
    synth:classes=4,dim=8,samples=1000,sep=10,seed=0."""
    if spec.startswith("synth:") or spec == "synth":
        opts = {"classes": 4, "dim": 8, "samples": 1000, "sep": 10.0, "seed": 0}
        body = spec[len("synth:"):] if spec.startswith("synth:") else ""
        if body:
            for chunk in body.split(","):
                if not chunk:
                    continue
                if "=" not in chunk:
                    raise DataError(f"bad synth option {chunk!r}, expected key=value")
                key, value = chunk.split("=", 1)
                if key not in opts:
                    raise DataError(f"unknown synth option {key!r}")
                opts[key] = float(value) if key == "sep" else int(value)
        data = synth_blobs(
            n_classes=opts["classes"],
            dim=opts["dim"],
            n_samples=opts["samples"],
            separation=opts["sep"],
            seed=opts["seed"],
        )
    else:
        return load_csv(spec, class_subset=class_subset)
    if class_subset is not None:
        return subset_classes(data, class_subset)
    return data


def _noise_from_arg(spec: str, shots: int, seed: int) -> noise.NoiseConfig:
    if spec in noise.PRESETS:
        return noise.preset_config(spec, shots=shots, seed=seed)
    parts = spec.split(",")
    if len(parts) != 4:
        raise DataError(
            f"noise spec {spec!r} is neither a preset "
            f"({', '.join(sorted(noise.PRESETS))}) nor p1,p2,r01,r10"
        )
    p1, p2, r01, r10 = (float(p) for p in parts)
    return noise.NoiseConfig(
        p1=p1, p2=p2, readout_01=r01, readout_10=r10, shots=shots, seed=seed
    )


def _add_dataset_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--dataset",
        default="synth:classes=4,dim=8,samples=1000,sep=10,seed=0",
        help="CSV path or synth:classes=..,dim=..,samples=..,sep=..,seed=..",
    )
    p.add_argument(
        "--class-subset",
        type=int,
        nargs="+",
        default=None,
        help="keep only these original labels, remapped to 0..k-1",
    )
    p.add_argument("--train-fraction", type=float, default=0.7)


def _add_arch_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--qubits", type=int, default=4)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--template", choices=sorted(TEMPLATE_IDS), default="circuit4")
    p.add_argument(
        "--features-per-qubit",
        type=int,
        default=2,
        help="encoder slots per qubit (round robin)",
    )
    p.add_argument(
        "--encoder-gate", choices=("rx", "ry", "rz"), default="rz"
    )
    p.add_argument(
        "--no-h-prefix",
        action="store_true",
        help="skip the Hadamard column before feature rotations",
    )


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grad", choices=sorted(GRADIENT_KINDS), default="shift")
    p.add_argument("--grad-h", type=float, default=1e-5)
    p.add_argument("--spsa-c", type=float, default=0.1)
    p.add_argument("--spsa-reps", type=int, default=4)
    p.add_argument(
        "--joint-grad",
        action="store_true",
        help="differentiate through both members at once (exact/spsa only)",
    )


def _add_loss_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--lambda", dest="penalty_lambda", type=float, default=0.3
    )
    p.add_argument(
        "--divergence", choices=sorted(DIVERGENCE_KINDS), default="cosine"
    )
    p.add_argument(
        "--aggregator", choices=sorted(AGGREGATOR_KINDS), default="mean"
    )
    p.add_argument(
        "--divergence-on", choices=("logits", "probabilities"), default="logits"
    )


def _arch_from_args(args) -> Architecture:
    return Architecture(
        n_qubits=args.qubits,
        n_layers=args.layers,
        template_id=args.template,
        encoder=EncoderSpec(
            gate_kind=args.encoder_gate,
            features_per_qubit=args.features_per_qubit,
            h_prefix=not args.no_h_prefix,
        ),
    )


def _run_from_args(args) -> TrainRun:
    engine = GradientEngine(
        kind=args.grad,
        h=args.grad_h,
        c=args.spsa_c,
        reps=args.spsa_reps,
        seed=child_seed(args.seed, protocol.TAG_SPSA),
    )
    return TrainRun(
        epochs=args.epochs,
        batch_size=args.batch,
        seed=args.seed,
        lr=args.lr,
        engine=engine,
        joint_grad=getattr(args, "joint_grad", False),
    )


def _loss_from_args(args) -> LossConfig:
    return LossConfig(
        aggregator=args.aggregator,
        divergence=args.divergence,
        penalty_lambda=args.penalty_lambda,
        divergence_on=args.divergence_on,
    )


def _load_split_dataset(args) -> Dataset:
    data = _dataset_from_arg(args.dataset, args.class_subset)
    return data.with_split(
        train_fraction=args.train_fraction,
        seed=child_seed(args.seed, TAG_SPLIT),
    )


def _base_report(args, arch: Architecture | None, run: TrainRun | None) -> dict:
    report: dict = {"command": args.command, "dataset": args.dataset}
    if arch is not None:
        report["architecture"] = arch.as_dict()
    if run is not None:
        report["run"] = experiments.run_dict(run)
    return report


# ---------------------------------------------------------------------------
# subcommands


def cmd_train_baseline(args) -> int:
    data = _load_split_dataset(args)
    arch = _arch_from_args(args)
    run = _run_from_args(args)
    out = experiments.ensure_dir(args.out)
    t0 = time.perf_counter()
    model, rows = experiments.train_baseline_experiment(data, arch, run)
    wall = time.perf_counter() - t0
    harness.metrics_to_csv(rows, os.path.join(out, "metrics.csv"))
    harness.save_checkpoint(
        model,
        os.path.join(out, "baseline.json"),
        seed_lineage={"root": run.seed, "tag": protocol.TAG_INIT_A},
        metrics={
            "test_acc": rows[-1].baseline_acc if rows else None,
            "test_loss": rows[-1].baseline_loss if rows else None,
        },
    )
    report = _base_report(args, arch, run)
    report["wall_time_s"] = wall
    report["final"] = {
        "baseline_acc": rows[-1].baseline_acc if rows else None,
        "baseline_loss": rows[-1].baseline_loss if rows else None,
    }
    experiments.write_report(os.path.join(out, "report.json"), report)
    if rows:
        print(f"baseline test accuracy {100.0 * rows[-1].baseline_acc:.2f}%")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_train_stiq(args) -> int:
    data = _load_split_dataset(args)
    arch = _arch_from_args(args)
    run = _run_from_args(args)
    loss_cfg = _loss_from_args(args)
    out = experiments.ensure_dir(args.out)
    t0 = time.perf_counter()
    result = experiments.train_stiq_experiment(
        data, arch, loss_cfg, run, with_baseline=not args.no_baseline
    )
    wall = time.perf_counter() - t0
    rows = result["rows"]
    harness.metrics_to_csv(rows, os.path.join(out, "metrics.csv"))
    pair = result["pair"]
    lineage = {"root": run.seed}
    harness.save_checkpoint(
        pair.model_a,
        os.path.join(out, "qnn1.json"),
        loss_cfg=loss_cfg,
        seed_lineage=dict(lineage, tag=protocol.TAG_INIT_A),
        metrics={"test_acc": rows[-1].qnn1_acc, "test_loss": rows[-1].qnn1_loss},
    )
    harness.save_checkpoint(
        pair.model_b,
        os.path.join(out, "qnn2.json"),
        loss_cfg=loss_cfg,
        seed_lineage=dict(lineage, tag=protocol.TAG_INIT_B),
        metrics={"test_acc": rows[-1].qnn2_acc, "test_loss": rows[-1].qnn2_loss},
    )
    report = _base_report(args, arch, run)
    report["loss_cfg"] = result["loss_cfg"]
    report["wall_time_s"] = wall
    last = rows[-1]
    report["final"] = {
        "qnn1_acc": last.qnn1_acc,
        "qnn2_acc": last.qnn2_acc,
        "combined_acc": last.combined_acc,
        "combined_loss": last.combined_loss,
    }
    if "baseline" in result:
        harness.save_checkpoint(
            result["baseline"],
            os.path.join(out, "baseline.json"),
            seed_lineage=dict(lineage, tag=protocol.TAG_INIT_A),
            metrics={
                "test_acc": rows[-1].baseline_acc,
                "test_loss": rows[-1].baseline_loss,
            },
        )
        report["final"]["baseline_acc"] = last.baseline_acc
        rep = result["obfuscation"]
        report["obfuscation"] = {
            "accuracy_obfuscation": rep.accuracy_obfuscation,
            "loss_obfuscation": rep.loss_obfuscation,
            "accuracy_delta": rep.accuracy_delta,
            "loss_delta": rep.loss_delta,
        }
    experiments.write_report(os.path.join(out, "report.json"), report)
    print(
        "combined test accuracy "
        f"{100.0 * last.combined_acc:.2f}% "
        f"(members {100.0 * last.qnn1_acc:.2f}% / {100.0 * last.qnn2_acc:.2f}%)"
    )
    print(f"wrote {out}")
    return EXIT_OK


def cmd_sweep_penalty(args) -> int:
    data = _load_split_dataset(args)
    arch = _arch_from_args(args)
    run = _run_from_args(args)
    out = experiments.ensure_dir(args.out)
    rows = experiments.sweep_penalty(
        data,
        arch,
        tuple(args.lambdas),
        run,
        divergence=args.divergence,
        aggregator=args.aggregator,
    )
    columns = (
        "penalty_lambda",
        "baseline_acc",
        "qnn1_acc",
        "qnn2_acc",
        "combined_acc",
        "combined_loss",
        "circuit_evals",
    )
    experiments.write_table(os.path.join(out, "penalty_sweep.csv"), columns, rows)
    report = _base_report(args, arch, run)
    report["divergence"] = args.divergence
    report["cells"] = rows
    experiments.write_report(os.path.join(out, "report.json"), report)
    for row in rows:
        print(
            f"lambda={row['penalty_lambda']:.2f} "
            f"members {100.0 * row['qnn1_acc']:.2f}%/{100.0 * row['qnn2_acc']:.2f}% "
            f"combined {100.0 * row['combined_acc']:.2f}%"
        )
    print(f"wrote {out}")
    return EXIT_OK


def cmd_compare_divergence(args) -> int:
    data = _load_split_dataset(args)
    arch = _arch_from_args(args)
    run = _run_from_args(args)
    out = experiments.ensure_dir(args.out)
    rows = experiments.compare_divergences(
        data, arch, run, kinds=tuple(args.kinds), aggregator=args.aggregator
    )
    columns = (
        "divergence",
        "penalty_lambda",
        "baseline_acc",
        "qnn1_acc",
        "qnn2_acc",
        "combined_acc",
        "combined_loss",
    )
    experiments.write_table(os.path.join(out, "divergences.csv"), columns, rows)
    report = _base_report(args, arch, run)
    report["cells"] = rows
    experiments.write_report(os.path.join(out, "report.json"), report)
    for row in rows:
        print(
            f"{row['divergence']}: members "
            f"{100.0 * row['qnn1_acc']:.2f}%/{100.0 * row['qnn2_acc']:.2f}% "
            f"combined {100.0 * row['combined_acc']:.2f}%"
        )
    print(f"wrote {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model, _ = harness.load_checkpoint(args.checkpoint)
    data = _dataset_from_arg(args.dataset, args.class_subset)
    rng = np.random.default_rng(args.seed) if args.shots else None
    acc, loss = protocol.evaluate(
        model, data.features, data.labels, shots=args.shots, rng=rng
    )
    print(f"accuracy {100.0 * acc:.2f}% loss {loss:.6f} on {data.n_samples} rows")
    return EXIT_OK


def cmd_noisy_eval(args) -> int:
    data = _dataset_from_arg(args.dataset, args.class_subset)
    if args.checkpoint_b is not None:
        model_a, blob_a = harness.load_checkpoint(args.checkpoint)
        model_b, _ = harness.load_checkpoint(args.checkpoint_b)
        cfg_a = _noise_from_arg(
            args.noise, args.shots, child_seed(args.seed, protocol.TAG_NOISE_A)
        )
        spec_b = args.noise_b if args.noise_b is not None else args.noise
        cfg_b = _noise_from_arg(
            spec_b, args.shots, child_seed(args.seed, protocol.TAG_NOISE_B)
        )
        loss_cfg = harness.loss_cfg_from_dict(blob_a.get("loss_cfg") or {})
        pair = protocol.pair_for_inference(model_a, model_b, loss_cfg)
        acc, loss = noise.noisy_evaluate(
            pair, data.features, data.labels, (cfg_a, cfg_b)
        )
        print(
            f"noisy pair accuracy {100.0 * acc:.2f}% loss {loss:.6f} "
            f"({cfg_a.shots} shots, p1={cfg_a.p1}/{cfg_b.p1})"
        )
    else:
        model, _ = harness.load_checkpoint(args.checkpoint)
        cfg = _noise_from_arg(
            args.noise, args.shots, child_seed(args.seed, protocol.TAG_NOISE_A)
        )
        acc, loss = noise.noisy_evaluate(model, data.features, data.labels, cfg)
        print(
            f"noisy accuracy {100.0 * acc:.2f}% loss {loss:.6f} "
            f"({cfg.shots} shots, p1={cfg.p1})"
        )
    return EXIT_OK


def cmd_split_infer(args) -> int:
    logging.basicConfig(level=logging.INFO, format="%(name)s %(message)s")
    data = _dataset_from_arg(args.dataset, args.class_subset)
    rows = data.features[: args.limit] if args.limit else data.features
    rng = np.random.default_rng(args.seed) if args.shots else None
    results = harness.split_infer(
        args.checkpoint, args.checkpoint_b, rows, shots=args.shots, rng=rng
    )
    correct = 0
    for i, (_, _, pred) in enumerate(results):
        klass = int(np.argmax(pred.probabilities))
        if i < len(data.labels) and klass == int(data.labels[i]):
            correct += 1
        print(f"query {i}: class {klass}")
    if len(results):
        print(f"agreement with labels: {correct}/{len(results)}")
    return EXIT_OK


def cmd_scalability(args) -> int:
    data = _load_split_dataset(args)
    run = _run_from_args(args)
    arch = _arch_from_args(args)
    out = experiments.ensure_dir(args.out)
    rows = experiments.scalability_sweep(
        data, tuple(args.sizes), run, arch=arch, loss_cfg=_loss_from_args(args)
    )
    columns = (
        "n_qubits",
        "baseline_acc",
        "qnn1_acc",
        "qnn2_acc",
        "combined_acc",
        "circuit_evals",
        "wall_time_s",
    )
    experiments.write_table(os.path.join(out, "scalability.csv"), columns, rows)
    report = _base_report(args, arch, run)
    report["cells"] = rows
    experiments.write_report(os.path.join(out, "report.json"), report)
    for row in rows:
        print(
            f"{row['n_qubits']} qubits: combined "
            f"{100.0 * row['combined_acc']:.2f}% paid {row['circuit_evals']} "
            f"circuit runs in {row['wall_time_s']:.1f}s"
        )
    print(f"wrote {out}")
    return EXIT_OK


def cmd_vqa_demo(args) -> int:
    result = experiments.vqa_demo_experiment(
        args.hamiltonian,
        steps=args.steps,
        penalty_lambda=args.penalty_lambda,
        seed=args.seed,
        lr=args.lr,
        template_id=args.template,
        n_layers=args.layers,
    )
    if args.out:
        out = experiments.ensure_dir(args.out)
        experiments.write_report(os.path.join(out, "report.json"), result)
    print(
        f"member energies {result['energy_a']:.6f} / {result['energy_b']:.6f}, "
        f"combined {result['combined_energy']:.6f}, "
        f"exact ground {result['ground_energy']:.6f}"
    )
    return EXIT_OK


def cmd_synth_data(args) -> int:
    data = synth_blobs(
        n_classes=args.classes,
        dim=args.dim,
        n_samples=args.samples,
        separation=args.sep,
        seed=args.seed,
    )
    save_csv(data, args.out)
    print(f"wrote {data.n_samples} rows ({data.n_classes} classes) to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stiq",
        description="concurrent twin-model training with obfuscated outputs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-baseline", help="train a single reference model")
    _add_dataset_flags(p)
    _add_arch_flags(p)
    _add_train_flags(p)
    p.add_argument("--out", default="runs/baseline")
    p.set_defaults(func=cmd_train_baseline)

    p = sub.add_parser("train-stiq", help="train an obfuscated pair")
    _add_dataset_flags(p)
    _add_arch_flags(p)
    _add_train_flags(p)
    _add_loss_flags(p)
    p.add_argument("--no-baseline", action="store_true")
    p.add_argument("--out", default="runs/stiq")
    p.set_defaults(func=cmd_train_stiq)

    p = sub.add_parser("sweep-penalty", help="train pairs over penalty weights")
    _add_dataset_flags(p)
    _add_arch_flags(p)
    _add_train_flags(p)
    p.add_argument(
        "--lambdas", type=float, nargs="+", default=[0.1, 0.3, 0.5, 0.7, 0.9]
    )
    p.add_argument(
        "--divergence",
        choices=sorted(k for k in DIVERGENCE_KINDS if k != "none"),
        default="cosine",
    )
    p.add_argument("--aggregator", choices=sorted(AGGREGATOR_KINDS), default="mean")
    p.add_argument("--out", default="runs/penalty")
    p.set_defaults(func=cmd_sweep_penalty)

    p = sub.add_parser("compare-divergence", help="train pairs per divergence kind")
    _add_dataset_flags(p)
    _add_arch_flags(p)
    _add_train_flags(p)
    p.add_argument(
        "--kinds", nargs="+", choices=("cosine", "l1", "l2"),
        default=["cosine", "l1", "l2"],
    )
    p.add_argument("--aggregator", choices=sorted(AGGREGATOR_KINDS), default="mean")
    p.add_argument("--out", default="runs/divergence")
    p.set_defaults(func=cmd_compare_divergence)

    p = sub.add_parser("eval", help="score a checkpoint on a dataset")
    p.add_argument("checkpoint")
    _add_dataset_flags(p)
    p.add_argument("--shots", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("noisy-eval", help="score under sampling and gate noise")
    p.add_argument("checkpoint")
    p.add_argument("--checkpoint-b", default=None)
    _add_dataset_flags(p)
    p.add_argument("--noise", default="med", help="low|med|high or p1,p2,r01,r10")
    p.add_argument(
        "--noise-b", default=None, help="override noise for the second member"
    )
    p.add_argument("--shots", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_noisy_eval)

    p = sub.add_parser(
        "split-infer", help="query two checkpoints and aggregate locally"
    )
    p.add_argument("checkpoint")
    p.add_argument("checkpoint_b")
    _add_dataset_flags(p)
    p.add_argument("--limit", type=int, default=8)
    p.add_argument("--shots", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_split_infer)

    p = sub.add_parser("scalability", help="pair training across qubit counts")
    _add_dataset_flags(p)
    _add_arch_flags(p)
    _add_train_flags(p)
    _add_loss_flags(p)
    p.add_argument("--sizes", type=int, nargs="+", default=[4, 6, 8])
    p.add_argument("--out", default="runs/scalability")
    p.set_defaults(func=cmd_scalability)

    p = sub.add_parser("vqa-demo", help="twin variational energy minimization")
    p.add_argument("--hamiltonian", default="Z")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--lambda", dest="penalty_lambda", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--template", choices=sorted(TEMPLATE_IDS), default=None)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_vqa_demo)

    p = sub.add_parser("synth-data", help="write a synthetic blob dataset CSV")
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--sep", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="blobs.csv")
    p.set_defaults(func=cmd_synth_data)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
