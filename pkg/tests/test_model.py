"""Hybrid model: initialization, feature scaling, forward pass, heads."""

import numpy as np
import pytest

from stiq import model as qm
from stiq.model import (
    PredictionVector,
    assign_flat_params,
    clone_model,
    fit_feature_range,
    flat_params,
    forward,
    forward_batch,
    init_model,
    predict_class,
    scale_features,
    scaled_inputs,
    set_feature_scaling,
    z_batch,
)
from stiq.templates import EncoderSpec, PqcSpec


def small_model(seed=0, encoder=None):
    return init_model(
        3, 4, 6, encoder or EncoderSpec(), PqcSpec("circuit4", 2), seed=seed
    )


class TestInit:
    def test_shapes(self):
        m = small_model()
        assert m.theta.shape == (16,)  # 2 layers x (3*3 - 1)
        assert m.head_w.shape == (4, 3)
        assert m.head_b.shape == (4,)
        assert m.n_theta == 16

    def test_theta_range(self):
        m = small_model(seed=3)
        assert (m.theta >= 0.0).all() and (m.theta < 2 * np.pi).all()

    def test_head_scale(self):
        m = small_model(seed=3)
        bound = 1.0 / np.sqrt(m.n_qubits)
        assert (np.abs(m.head_w) <= bound).all()
        assert (m.head_b == 0.0).all()

    def test_seed_reproducible(self):
        a, b = small_model(seed=5), small_model(seed=5)
        np.testing.assert_array_equal(a.theta, b.theta)
        np.testing.assert_array_equal(a.head_w, b.head_w)

    def test_seeds_differ(self):
        a, b = small_model(seed=5), small_model(seed=6)
        assert not np.array_equal(a.theta, b.theta)


class TestFeatureScaling:
    def test_linear_map(self):
        x = np.array([[0.0, -2.0], [10.0, 2.0]])
        lo, hi = fit_feature_range(x)
        scaled = scale_features(x, lo, hi)
        np.testing.assert_allclose(scaled[0], [0.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(scaled[1], [2 * np.pi, 2 * np.pi], atol=1e-15)

    def test_midpoint(self):
        x = np.array([[0.0], [10.0]])
        lo, hi = fit_feature_range(x)
        scaled = scale_features(np.array([[5.0]]), lo, hi)
        assert scaled[0, 0] == pytest.approx(np.pi)

    def test_extrapolates_outside_training_range(self):
        lo, hi = np.array([0.0]), np.array([1.0])
        scaled = scale_features(np.array([[2.0]]), lo, hi)
        assert scaled[0, 0] == pytest.approx(4 * np.pi)

    def test_constant_feature_maps_to_midpoint(self):
        lo, hi = np.array([3.0]), np.array([3.0])
        scaled = scale_features(np.array([[3.0], [99.0]]), lo, hi)
        np.testing.assert_allclose(scaled[:, 0], [np.pi, np.pi])

    def test_input_untouched(self):
        x = np.array([[1.0, 2.0]])
        scale_features(x, np.zeros(2), np.ones(2))
        np.testing.assert_array_equal(x, [[1.0, 2.0]])

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            fit_feature_range(np.array([[np.nan]]))

    def test_scaled_inputs_requires_fit(self):
        m = small_model()
        with pytest.raises(ValueError, match="no feature scaling"):
            scaled_inputs(m, np.zeros((1, 6)))
        set_feature_scaling(m, np.random.default_rng(0).normal(size=(20, 6)))
        out = scaled_inputs(m, np.zeros((1, 6)))
        assert out.shape == (1, 6)


def test_phase_encoding_without_h_is_invisible():
    """rz on |0> only rotates phase: without the H prefix every qubit reads
    z = +1 no matter what the features are. The prefix is what makes a
    phase encoder carry information."""
    blind = init_model(
        2,
        2,
        2,
        EncoderSpec(gate_kind="rz", h_prefix=False),
        PqcSpec("circuit1", 1),
        seed=0,
    )
    blind.theta = np.zeros_like(blind.theta)
    rng = np.random.default_rng(4)
    for _ in range(5):
        x = rng.uniform(0, 2 * np.pi, size=(1, 2))
        np.testing.assert_allclose(z_batch(blind, x)[0], [1.0, 1.0], atol=1e-12)

    # with the prefix (and any rotation afterwards to turn phase into
    # population) the same feature change moves the readout
    sighted = init_model(
        2,
        2,
        2,
        EncoderSpec(gate_kind="rz", h_prefix=True),
        PqcSpec("circuit1", 1),
        seed=0,
    )
    za = z_batch(sighted, np.array([[0.5, 0.5]]))
    zb = z_batch(sighted, np.array([[2.5, 2.5]]))
    assert np.abs(za - zb).max() > 1e-3


def test_z_batch_theta_override():
    m = small_model(seed=1)
    x = np.random.default_rng(2).uniform(0, 2 * np.pi, size=(3, 6))
    stored = z_batch(m, x)
    other = np.zeros_like(m.theta)
    overridden = z_batch(m, x, theta=other)
    assert np.abs(stored - overridden).max() > 1e-6
    m.theta = other
    np.testing.assert_array_equal(z_batch(m, x), overridden)


def test_forward_batch_matches_forward():
    m = small_model(seed=7)
    x = np.random.default_rng(3).uniform(0, 2 * np.pi, size=(4, 6))
    logits = forward_batch(m, x)
    for i in range(4):
        pred = forward(m, x[i])
        np.testing.assert_allclose(pred.logits, logits[i], atol=1e-12)
        assert pred.probabilities.sum() == pytest.approx(1.0, abs=1e-12)


def test_forward_rejects_wrong_feature_count():
    m = small_model()
    with pytest.raises(ValueError, match="features"):
        forward(m, np.zeros(5))


def test_shot_forward_reproducible_and_converging():
    m = small_model(seed=9)
    x = np.random.default_rng(1).uniform(0, 2 * np.pi, size=6)
    exact = forward(m, x).logits
    a = forward(m, x, shots=4000, rng=np.random.default_rng(11)).logits
    b = forward(m, x, shots=4000, rng=np.random.default_rng(11)).logits
    np.testing.assert_array_equal(a, b)
    assert np.abs(a - exact).max() < 0.2


def test_predict_class_tie_breaks_low():
    pred = PredictionVector(
        logits=np.array([0.0, 0.0, -1.0]),
        probabilities=np.array([0.4, 0.4, 0.2]),
    )
    assert predict_class(pred) == 0


def test_flat_params_round_trip():
    m = small_model(seed=2)
    vec = flat_params(m)
    assert vec.shape == (16 + 12 + 4,)
    m2 = clone_model(m)
    perturbed = vec + 0.5
    assign_flat_params(m2, perturbed)
    np.testing.assert_allclose(flat_params(m2), perturbed)
    np.testing.assert_array_equal(flat_params(m), vec)

    with pytest.raises(ValueError, match="wrong length"):
        assign_flat_params(m2, np.zeros(3))


def test_clone_is_deep_for_arrays():
    m = small_model(seed=8)
    c = clone_model(m)
    c.theta[0] += 1.0
    assert m.theta[0] != c.theta[0]


def test_template_cached():
    m = small_model()
    assert m.template() is m.template()
