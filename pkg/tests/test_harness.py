"""Metrics files, obfuscation arithmetic, checkpoints and split inference."""

import json
import logging

import numpy as np
import pytest

from stiq import model as qm
from stiq.data import DataError
from stiq.harness import (
    MetricsRow,
    compute_obfuscation,
    load_checkpoint,
    loss_cfg_from_dict,
    metrics_to_csv,
    save_checkpoint,
    split_infer,
)
from stiq.model import forward, init_model, set_feature_scaling
from stiq.templates import EncoderSpec, PqcSpec
from stiq.training import LossConfig, aggregate, softmax


class TestObfuscationArithmetic:
    def test_published_four_class_digit_row(self):
        """Frozen reference numbers for an 8-qubit pair on a 4-class digit
        task: baseline (98.3%, 0.099), members (22.6%, 5.346) and
        (37.6%, 2.915), combined (98.3%, 0.137)."""
        rep = compute_obfuscation(
            (98.3, 0.099), (22.6, 5.346), (37.6, 2.915), (98.3, 0.137)
        )
        assert rep.accuracy_obfuscation == pytest.approx(0.306, abs=1e-3)
        assert rep.loss_delta == pytest.approx(1.38, abs=1e-2)
        assert rep.accuracy_delta == pytest.approx(1.0, abs=1e-6)
        assert rep.loss_obfuscation == pytest.approx(41.72, abs=0.01)

    def test_units_cancel(self):
        rep_pct = compute_obfuscation((90.0, 1.0), (30.0, 3.0), (60.0, 5.0), (90.0, 1.5))
        rep_frac = compute_obfuscation((0.9, 1.0), (0.3, 3.0), (0.6, 5.0), (0.9, 1.5))
        assert rep_pct.accuracy_obfuscation == pytest.approx(
            rep_frac.accuracy_obfuscation
        )
        assert rep_pct.accuracy_obfuscation == pytest.approx(0.5)

    def test_zero_baseline_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            compute_obfuscation((0.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0))


class TestMetricsCsv:
    def test_format_and_blanks(self, tmp_path):
        rows = [
            MetricsRow(epoch=1, baseline_acc=0.5, baseline_loss=1.25, circuit_evals=10),
            MetricsRow(
                epoch=2,
                qnn1_acc=0.25,
                qnn1_loss=2.0,
                qnn2_acc=0.375,
                qnn2_loss=1.5,
                combined_acc=0.875,
                combined_loss=0.75,
                circuit_evals=20,
            ),
        ]
        path = tmp_path / "m.csv"
        metrics_to_csv(rows, path)
        lines = path.read_text().splitlines()
        assert lines[0] == (
            "epoch,baseline_acc_pct,baseline_loss,qnn1_acc_pct,qnn1_loss,"
            "qnn2_acc_pct,qnn2_loss,combined_acc_pct,combined_loss,circuit_evals"
        )
        assert lines[1] == "1,50.0000,1.250000,,,,,,,10"
        assert lines[2] == "2,,,25.0000,2.000000,37.5000,1.500000,87.5000,0.750000,20"

    def test_no_timing_column(self, tmp_path):
        rows = [MetricsRow(epoch=1, baseline_acc=1.0, wall_time_s=123.0)]
        path = tmp_path / "t.csv"
        metrics_to_csv(rows, path)
        text = path.read_text()
        assert "wall" not in text and "123" not in text

    def test_deterministic_bytes(self, tmp_path):
        rows = [MetricsRow(epoch=1, baseline_acc=1 / 3, baseline_loss=2 / 3)]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        metrics_to_csv(rows, a)
        metrics_to_csv(rows, b)
        assert a.read_bytes() == b.read_bytes()


def fitted_model(seed=0, n_classes=3):
    model = init_model(
        2, n_classes, 4, EncoderSpec(), PqcSpec("circuit4", 2), seed=seed
    )
    rng = np.random.default_rng(seed + 100)
    set_feature_scaling(model, rng.normal(size=(30, 4)))
    return model


class TestCheckpoints:
    def test_round_trip_bit_exact_forward(self, tmp_path):
        model = fitted_model(seed=1)
        path = tmp_path / "m.json"
        save_checkpoint(model, path, loss_cfg=LossConfig())
        back, blob = load_checkpoint(path)
        np.testing.assert_array_equal(back.theta, model.theta)
        np.testing.assert_array_equal(back.head_w, model.head_w)
        np.testing.assert_array_equal(back.feature_lo, model.feature_lo)
        x = np.random.default_rng(0).uniform(0, 2 * np.pi, size=4)
        np.testing.assert_array_equal(
            forward(back, x).logits, forward(model, x).logits
        )
        assert blob["format_version"] == 1
        assert blob["loss_cfg"]["aggregator"] == "mean"

    def test_unfitted_model_refused(self, tmp_path):
        model = init_model(2, 2, 2, seed=0)
        with pytest.raises(ValueError, match="feature scaling"):
            save_checkpoint(model, tmp_path / "x.json")

    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(DataError, match="JSON"):
            load_checkpoint(path)

    def test_wrong_version(self, tmp_path):
        path = tmp_path / "v.json"
        path.write_text(json.dumps({"format_version": 99}))
        with pytest.raises(DataError, match="format"):
            load_checkpoint(path)

    def test_missing_fields(self, tmp_path):
        path = tmp_path / "f.json"
        path.write_text(json.dumps({"format_version": 1, "n_qubits": 2}))
        with pytest.raises(DataError, match="missing"):
            load_checkpoint(path)

    def test_shape_mismatch_detected(self, tmp_path):
        model = fitted_model(seed=2)
        path = tmp_path / "s.json"
        save_checkpoint(model, path)
        blob = json.loads(path.read_text())
        blob["theta"] = blob["theta"][:-1]
        path.write_text(json.dumps(blob))
        with pytest.raises(DataError, match="theta"):
            load_checkpoint(path)

    def test_seed_lineage_and_metrics_stored(self, tmp_path):
        model = fitted_model(seed=3)
        path = tmp_path / "l.json"
        save_checkpoint(
            model,
            path,
            seed_lineage={"root": 42, "tag": 0},
            metrics={"test_acc": 0.5},
        )
        _, blob = load_checkpoint(path)
        assert blob["seed_lineage"] == {"root": 42, "tag": 0}
        assert blob["metrics"]["test_acc"] == 0.5


def save_pair(tmp_path, aggregator="mean", n_classes=3):
    paths = []
    for i, seed in enumerate((5, 6)):
        model = fitted_model(seed=seed, n_classes=n_classes)
        path = tmp_path / f"m{i}.json"
        save_checkpoint(model, path, loss_cfg=LossConfig(aggregator=aggregator))
        paths.append(path)
    return paths


class TestSplitInfer:
    def test_aggregation_matches_direct_computation(self, tmp_path):
        path_a, path_b = save_pair(tmp_path)
        model_a, _ = load_checkpoint(path_a)
        model_b, _ = load_checkpoint(path_b)
        queries = np.random.default_rng(1).normal(size=(3, 4))
        results = split_infer(path_a, path_b, queries)
        assert len(results) == 3
        for i, (y1, y2, pred) in enumerate(results):
            xa = qm.scaled_inputs(model_a, queries[i : i + 1])
            xb = qm.scaled_inputs(model_b, queries[i : i + 1])
            np.testing.assert_allclose(
                y1, qm.forward_batch(model_a, xa)[0], atol=1e-12
            )
            want = aggregate(y1, y2, "mean")
            np.testing.assert_allclose(pred.logits, want, atol=1e-12)
            np.testing.assert_allclose(pred.probabilities, softmax(want), atol=1e-12)

    def test_adversary_log_never_contains_aggregate(self, tmp_path, caplog):
        """Each provider-side log line shows one model's logits only; the
        combined vector must not be derivable from any single line."""
        path_a, path_b = save_pair(tmp_path)
        queries = np.random.default_rng(2).normal(size=(2, 4))
        with caplog.at_level(logging.INFO, logger="stiq.adversary"):
            results = split_infer(path_a, path_b, queries)
        lines = [r.getMessage() for r in caplog.records]
        assert len(lines) == 4  # 2 queries x 2 providers
        for _, _, pred in results:
            combined_repr = ", ".join(f"{v:.6f}" for v in pred.logits)
            for line in lines:
                assert combined_repr not in line
        assert sum("provider a" in line for line in lines) == 2
        assert sum("provider b" in line for line in lines) == 2

    def test_class_count_mismatch(self, tmp_path):
        model_a = fitted_model(seed=1, n_classes=2)
        model_b = fitted_model(seed=2, n_classes=3)
        pa, pb = tmp_path / "a.json", tmp_path / "b.json"
        save_checkpoint(model_a, pa, loss_cfg=LossConfig())
        save_checkpoint(model_b, pb, loss_cfg=LossConfig())
        with pytest.raises(DataError, match="classes"):
            split_infer(pa, pb, np.zeros((1, 4)))

    def test_aggregator_mismatch(self, tmp_path):
        dir_a, dir_b = tmp_path / "a", tmp_path / "b"
        dir_a.mkdir()
        dir_b.mkdir()
        pa = save_pair(dir_a, aggregator="mean")[0]
        pb = save_pair(dir_b, aggregator="max")[1]
        with pytest.raises(DataError, match="aggregator"):
            split_infer(pa, pb, np.zeros((1, 4)))

    def test_missing_loss_cfg_rejected(self, tmp_path):
        model = fitted_model(seed=5)
        pa, pb = tmp_path / "a.json", tmp_path / "b.json"
        save_checkpoint(model, pa)  # no loss_cfg recorded
        save_checkpoint(model, pb, loss_cfg=LossConfig())
        with pytest.raises(DataError, match="loss configuration"):
            split_infer(pa, pb, np.zeros((1, 4)))

    def test_query_dimension_checked(self, tmp_path):
        pa, pb = save_pair(tmp_path)
        with pytest.raises(DataError, match="features"):
            split_infer(pa, pb, np.zeros((1, 7)))


def test_loss_cfg_from_dict_round_trip():
    cfg = LossConfig(
        aggregator="prodnorm", divergence="l2", penalty_lambda=0.25,
        divergence_on="probabilities",
    )
    from stiq.harness import _loss_cfg_dict

    back = loss_cfg_from_dict(_loss_cfg_dict(cfg))
    assert back == cfg


def test_loss_cfg_from_dict_validates():
    with pytest.raises(ValueError):
        loss_cfg_from_dict(
            {"aggregator": "vote", "divergence": "cosine", "penalty_lambda": 0.3}
        )
