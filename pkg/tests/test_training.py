"""Loss pieces, gradient engines and the optimizer."""

import numpy as np
import pytest

from stiq.simulator import Angle, CircuitTemplate, GateOp, run_circuit
from stiq.simulator import NumericError, expectation_z_all
from stiq.training import (
    AdamState,
    GradientEngine,
    LossConfig,
    adam_init,
    adam_step,
    aggregate,
    cross_entropy,
    cross_entropy_rows,
    divergence,
    gradient,
    per_sample_losses,
    softmax,
    total_loss,
    total_loss_batch,
)


class TestSoftmaxAndCe:
    def test_softmax_sums_to_one(self):
        p = softmax(np.array([1.0, 2.0, 3.0]))
        assert p.sum() == pytest.approx(1.0, abs=1e-14)
        assert (np.diff(p) > 0).all()

    def test_softmax_shift_invariant(self):
        x = np.array([0.3, -1.2, 2.2, 0.0])
        np.testing.assert_allclose(softmax(x), softmax(x + 1000.0), atol=1e-9)

    def test_softmax_extreme_logits_stable(self):
        p = softmax(np.array([1e4, 0.0]))
        assert np.isfinite(p).all()
        assert p[0] == pytest.approx(1.0)

    def test_cross_entropy_uniform(self):
        assert cross_entropy(np.zeros(2), 0) == pytest.approx(np.log(2.0))
        assert cross_entropy(np.zeros(4), 3) == pytest.approx(np.log(4.0))

    def test_cross_entropy_matches_manual(self):
        logits = np.array([2.0, -1.0, 0.5])
        want = -np.log(softmax(logits)[1])
        assert cross_entropy(logits, 1) == pytest.approx(want, abs=1e-12)

    def test_cross_entropy_label_range(self):
        with pytest.raises(ValueError, match="label"):
            cross_entropy(np.zeros(3), 3)

    def test_rows_match_scalar(self):
        rng = np.random.default_rng(0)
        logits = rng.normal(size=(6, 4))
        labels = rng.integers(0, 4, size=6)
        rows = cross_entropy_rows(logits, labels)
        for i in range(6):
            assert rows[i] == pytest.approx(
                cross_entropy(logits[i], int(labels[i])), abs=1e-12
            )


class TestAggregate:
    def test_mean_sum_max(self):
        y1 = np.array([1.0, 2.0, 3.0])
        y2 = np.array([3.0, 0.0, 3.0])
        np.testing.assert_allclose(aggregate(y1, y2, "mean"), [2.0, 1.0, 3.0])
        np.testing.assert_allclose(aggregate(y1, y2, "sum"), [4.0, 2.0, 6.0])
        np.testing.assert_allclose(aggregate(y1, y2, "max"), [3.0, 2.0, 3.0])

    def test_prodnorm_is_normalized_product_of_probs(self):
        rng = np.random.default_rng(1)
        y1 = rng.normal(size=(3, 4))
        y2 = rng.normal(size=(3, 4))
        combined = aggregate(y1, y2, "prodnorm")
        got = softmax(combined)
        prod = softmax(y1) * softmax(y2)
        want = prod / prod.sum(axis=1, keepdims=True)
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="aggregator"):
            aggregate(np.zeros(2), np.zeros(2), "median")

    def test_batch_shapes(self):
        y = np.zeros((5, 3))
        assert aggregate(y, y, "mean").shape == (5, 3)


class TestDivergence:
    def test_cosine_orthogonal(self):
        assert divergence(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_cosine_identical(self):
        assert divergence(np.array([1.0, 1.0]), np.array([1.0, 1.0])) == pytest.approx(
            1.0
        )

    def test_cosine_opposite(self):
        got = divergence(np.array([2.0, 1.0]), np.array([-2.0, -1.0]))
        assert got == pytest.approx(-1.0)

    def test_cosine_zero_vector_guarded(self):
        got = divergence(np.zeros(3), np.array([1.0, 0.0, 0.0]))
        assert np.isfinite(got)

    def test_l1_l2_are_negated_distances(self):
        y1 = np.array([1.0, -2.0])
        y2 = np.array([0.0, 2.0])
        assert divergence(y1, y2, "l1") == pytest.approx(-5.0)
        assert divergence(y1, y2, "l2") == pytest.approx(-17.0)

    def test_none_is_zero(self):
        assert divergence(np.ones(3), -np.ones(3), "none") == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shapes"):
            divergence(np.zeros(2), np.zeros(3))


class TestLossConfig:
    def test_defaults_valid(self):
        LossConfig().validate()

    def test_lambda_range(self):
        with pytest.raises(ValueError, match="penalty"):
            LossConfig(penalty_lambda=0.0).validate()
        with pytest.raises(ValueError, match="penalty"):
            LossConfig(penalty_lambda=1.5).validate()
        LossConfig(penalty_lambda=1.0).validate()

    def test_lambda_zero_needs_divergence_off(self):
        LossConfig(divergence="none", penalty_lambda=0.0).validate()

    def test_bad_kinds(self):
        with pytest.raises(ValueError):
            LossConfig(aggregator="vote").validate()
        with pytest.raises(ValueError):
            LossConfig(divergence="kl").validate()
        with pytest.raises(ValueError):
            LossConfig(divergence_on="z").validate()


class TestTotalLoss:
    def test_identity_total_eq_ce_plus_lambda_div(self):
        rng = np.random.default_rng(3)
        cfg = LossConfig(penalty_lambda=0.7)
        for _ in range(10):
            y1 = rng.normal(size=4)
            y2 = rng.normal(size=4)
            lt, lc, ld = total_loss(y1, y2, 2, cfg)
            assert lt == pytest.approx(lc + 0.7 * ld, abs=1e-12)

    def test_divergence_none_reduces_to_ce(self):
        cfg = LossConfig(divergence="none", penalty_lambda=0.0)
        y1 = np.array([1.0, 0.0])
        y2 = np.array([0.0, 1.0])
        lt, lc, ld = total_loss(y1, y2, 0, cfg)
        assert ld == 0.0
        assert lt == pytest.approx(lc)
        assert lc == pytest.approx(cross_entropy(aggregate(y1, y2, "mean"), 0))

    def test_divergence_on_probabilities(self):
        y1 = np.array([5.0, 0.0])
        y2 = np.array([5.0, 0.0]) + 3.0  # same probs, shifted logits
        on_logits = LossConfig(divergence_on="logits")
        on_probs = LossConfig(divergence_on="probabilities")
        _, _, ld_logits = total_loss(y1, y2, 0, on_logits)
        _, _, ld_probs = total_loss(y1, y2, 0, on_probs)
        assert ld_probs == pytest.approx(1.0, abs=1e-12)  # identical probs
        assert ld_logits < 1.0 - 1e-6  # shifted logits are not parallel

    def test_batch_mean_matches_per_sample(self):
        rng = np.random.default_rng(4)
        cfg = LossConfig()
        y1 = rng.normal(size=(8, 3))
        y2 = rng.normal(size=(8, 3))
        labels = rng.integers(0, 3, size=8)
        lt, lc, ld = total_loss_batch(y1, y2, labels, cfg)
        pt, pc, pd = per_sample_losses(y1, y2, labels, cfg)
        assert lt == pytest.approx(pt.mean(), abs=1e-12)
        assert lc == pytest.approx(pc.mean(), abs=1e-12)
        assert ld == pytest.approx(pd.mean(), abs=1e-12)

    def test_loss_is_separable_over_samples(self):
        """Batch loss is the mean of single-sample losses, so gradient
        accumulation over sub-batches is legitimate."""
        rng = np.random.default_rng(5)
        cfg = LossConfig(penalty_lambda=0.4, divergence="l2")
        y1 = rng.normal(size=(6, 4))
        y2 = rng.normal(size=(6, 4))
        labels = rng.integers(0, 4, size=6)
        whole, _, _ = total_loss_batch(y1, y2, labels, cfg)
        singles = [
            total_loss(y1[i], y2[i], int(labels[i]), cfg)[0] for i in range(6)
        ]
        assert whole == pytest.approx(np.mean(singles), abs=1e-12)


def ry_expectation_loss(theta_vec: np.ndarray) -> float:
    """<Z> of a single qubit after RY(theta); analytic value cos(theta)."""
    ops = (GateOp("ry", target=0, angle=Angle.param(0)),)
    template = CircuitTemplate(n_qubits=1, ops=ops, n_params=1)
    state = run_circuit(template, theta_vec)
    return float(expectation_z_all(state)[0])


class TestGradientEngines:
    def test_engine_validation(self):
        with pytest.raises(ValueError):
            GradientEngine(kind="adjoint").validate()
        with pytest.raises(ValueError):
            GradientEngine(h=0.0).validate()
        with pytest.raises(ValueError):
            GradientEngine(c=-0.1).validate()
        with pytest.raises(ValueError):
            GradientEngine(reps=0).validate()

    def test_exact_on_quadratic(self):
        def loss(p):
            return float((p**2).sum())

        params = np.array([1.0, -2.0, 0.5])
        g = gradient(loss, params, GradientEngine(kind="exact"))
        np.testing.assert_allclose(g, 2 * params, atol=1e-8)

    def test_shift_exact_for_rotation_expectation(self):
        """Parameter shift on an expectation-valued loss is exact, not an
        approximation: d<Z>/dtheta of RY is -sin(theta) to machine precision."""
        for theta in (0.0, 0.3, 0.7, 2.0, -1.1):
            params = np.array([theta])
            g = gradient(
                ry_expectation_loss,
                params,
                GradientEngine(kind="shift"),
                shift_mask=np.array([True]),
            )
            assert g[0] == pytest.approx(-np.sin(theta), abs=1e-10)

    def test_shift_mask_mixes_with_central_diff(self):
        def loss(p):
            return ry_expectation_loss(p[:1]) + 3.0 * p[1] ** 2

        params = np.array([0.7, 2.0])
        g = gradient(
            loss,
            params,
            GradientEngine(kind="shift"),
            shift_mask=np.array([True, False]),
        )
        assert g[0] == pytest.approx(-np.sin(0.7), abs=1e-10)
        assert g[1] == pytest.approx(12.0, abs=1e-6)

    def test_spsa_without_rng_uses_engine_seed(self):
        def loss(p):
            return float((p**3).sum())

        params = np.array([0.4, -0.2])
        eng = GradientEngine(kind="spsa", seed=13)
        a = gradient(loss, params, eng)
        b = gradient(loss, params, eng)
        c = gradient(loss, params, eng, rng=np.random.default_rng(13))
        np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(a, c)

    def test_spsa_single_param_close_to_derivative(self):
        params = np.array([0.7])
        g = gradient(
            ry_expectation_loss,
            params,
            GradientEngine(kind="spsa", c=0.1, reps=4),
            rng=np.random.default_rng(0),
        )
        assert g[0] == pytest.approx(-np.sin(0.7), abs=0.01)

    def test_spsa_seeded_repeatable(self):
        def loss(p):
            return float(np.sin(p).sum())

        params = np.array([0.1, 0.2, 0.3])
        eng = GradientEngine(kind="spsa", reps=3)
        a = gradient(loss, params, eng, rng=np.random.default_rng(42))
        b = gradient(loss, params, eng, rng=np.random.default_rng(42))
        np.testing.assert_array_equal(a, b)

    def test_spsa_multi_param_unbiased_in_expectation(self):
        """Average many independent estimates of grad(0.5*|p|^2) = p."""
        params = np.array([1.0, -0.5, 0.25])

        def loss(p):
            return float(0.5 * (p**2).sum())

        rng = np.random.default_rng(7)
        acc = np.zeros_like(params)
        n = 400
        for _ in range(n):
            acc += gradient(
                loss, params, GradientEngine(kind="spsa", reps=1, c=0.05), rng=rng
            )
        np.testing.assert_allclose(acc / n, params, atol=0.15)


class TestAdam:
    def test_first_step_is_lr_sized(self):
        state = adam_init(3, lr=0.01)
        params = np.zeros(3)
        grads = np.array([1.0, -1.0, 1e-3])
        new_params, new_state = adam_step(state, params, grads)
        # bias correction makes the first step lr * g/|g| (up to eps)
        np.testing.assert_allclose(
            new_params, [-0.01, 0.01, -0.01], atol=1e-5
        )
        assert new_state.t == 1
        assert state.t == 0  # input state untouched

    def test_inputs_not_mutated(self):
        state = adam_init(2)
        params = np.ones(2)
        grads = np.full(2, 0.5)
        adam_step(state, params, grads)
        np.testing.assert_array_equal(params, np.ones(2))
        np.testing.assert_array_equal(state.m, np.zeros(2))

    def test_converges_on_quadratic(self):
        state = adam_init(2, lr=0.05)
        params = np.array([2.0, -3.0])
        for _ in range(500):
            grads = 2.0 * params
            params, state = adam_step(state, params, grads)
        np.testing.assert_allclose(params, [0.0, 0.0], atol=1e-3)

    def test_defaults(self):
        state = adam_init(1)
        assert state.beta1 == 0.9
        assert state.beta2 == 0.999
        assert state.eps == 1e-8
        assert state.lr == 0.01

    def test_nonfinite_grads_rejected(self):
        state = adam_init(1)
        with pytest.raises(NumericError):
            adam_step(state, np.zeros(1), np.array([np.nan]))

    def test_shape_mismatch_rejected(self):
        state = adam_init(2)
        with pytest.raises(ValueError):
            adam_step(state, np.zeros(3), np.zeros(3))
