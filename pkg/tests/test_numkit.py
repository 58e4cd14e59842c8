import math

import numpy as np
import pytest

from src.errors import ConfigError, ShapeError
from src.numkit import SeededRng, bernoulli_mask, cosine, matvec, relu, sigmoid, softmax, tanh_


def test_matvec_matches_schoolbook_product(np_rng):
    m = np_rng.normal(size=(4, 3))
    v = np_rng.normal(size=3)
    expected = [sum(m[i, j] * v[j] for j in range(3)) for i in range(4)]
    assert np.max(np.abs(matvec(m, v) - expected)) < 1e-12


def test_matvec_rejects_mismatched_shapes():
    with pytest.raises(ShapeError):
        matvec(np.ones((2, 3)), np.ones(2))


def test_cosine_zero_norm_is_zero():
    assert cosine(np.zeros(4), np.array([1.0, 2.0, 3.0, 4.0])) == 0.0
    assert cosine(np.array([1.0, 0.0]), np.zeros(2)) == 0.0


def test_cosine_bounds_and_scale_invariance(np_rng):
    for _ in range(50):
        a = np_rng.normal(size=6)
        b = np_rng.normal(size=6)
        c = cosine(a, b)
        assert -1.0 <= c <= 1.0
        assert abs(cosine(3.7 * a, b) - c) < 1e-12
    assert cosine(np.array([1.0, 2.0]), np.array([2.0, 4.0])) == pytest.approx(1.0)
    assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0


def test_sigmoid_is_stable_at_extremes():
    assert sigmoid(0.0) == 0.5
    assert sigmoid(1000.0) == 1.0
    assert sigmoid(-1000.0) == 0.0
    out = sigmoid(np.array([-30.0, 0.0, 30.0]))
    assert np.all(np.isfinite(out))
    assert out[0] == pytest.approx(1.0 / (1.0 + math.exp(30.0)), rel=1e-12)


def test_activations_accept_scalars_and_arrays():
    assert relu(-2.0) == 0.0
    assert relu(1.5) == 1.5
    assert list(relu(np.array([-1.0, 2.0]))) == [0.0, 2.0]
    assert tanh_(0.0) == 0.0


def test_softmax_matches_direct_formula():
    scores = np.array([0.2, 0.9, 0.5])
    exp = [math.exp(s) for s in scores]
    expected = np.array(exp) / sum(exp)
    out = softmax(scores)
    assert np.max(np.abs(out - expected)) < 1e-12
    assert abs(out.sum() - 1.0) < 1e-12
    assert int(np.argmax(out)) == 1


def test_softmax_shift_invariance(np_rng):
    v = np_rng.normal(size=5)
    assert np.max(np.abs(softmax(v + 123.4) - softmax(v))) < 1e-12


def test_softmax_rejects_empty():
    with pytest.raises(ShapeError):
        softmax(np.array([]))


def test_bernoulli_mask_values(rng):
    mask = bernoulli_mask(rng, (200, 50), 0.8)
    assert set(np.unique(mask)) <= {0.0, 1.0 / 0.8}
    assert abs(mask.mean() - 1.0) < 0.05


def test_bernoulli_mask_keep_all_does_not_draw():
    a, b = SeededRng(5), SeededRng(5)
    assert np.all(bernoulli_mask(a, 7, 1.0) == 1.0)
    assert a.random(3).tolist() == b.random(3).tolist()


def test_bernoulli_mask_rejects_bad_probability(rng):
    with pytest.raises(ConfigError):
        bernoulli_mask(rng, 3, 0.0)
    with pytest.raises(ConfigError):
        bernoulli_mask(rng, 3, 1.2)


def test_seeded_rng_is_reproducible():
    assert SeededRng(42).uniform(-1, 1, 5).tolist() == SeededRng(42).uniform(-1, 1, 5).tolist()
    assert SeededRng(42).random(5).tolist() != SeededRng(43).random(5).tolist()
    assert SeededRng(42).child(1).random(3).tolist() != SeededRng(42).child(2).random(3).tolist()


def test_seeded_rng_rejects_negative_seed():
    with pytest.raises(ConfigError):
        SeededRng(-1)


def test_bernoulli_mask_zero_fraction():
    mask = bernoulli_mask(SeededRng(21), 100_000, 0.5)
    assert 0.49 <= (mask == 0.0).mean() <= 0.51
