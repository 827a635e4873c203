import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from untangle_eval.core import (
    DirichletPrediction,
    PredictionSet,
    SampleRecord,
    SoftLabel,
    clamp_probs,
    entropy,
    kl_divergence,
    softmax,
)
from untangle_eval.errors import InvalidInput, ShapeError

finite_logits = arrays(
    np.float64,
    st.tuples(st.integers(1, 8), st.integers(2, 12)),
    elements=st.floats(-50, 50),
)


def test_softmax_known_values():
    p = softmax(np.array([0.0, 0.0]))
    np.testing.assert_allclose(p, [0.5, 0.5])
    p = softmax(np.array([np.log(3.0), 0.0]))
    np.testing.assert_allclose(p, [0.75, 0.25])


def test_softmax_shift_invariance_and_overflow():
    z = np.array([1000.0, 1000.5, 999.0])
    p = softmax(z)
    np.testing.assert_allclose(p, softmax(z - 1000.0))
    assert np.isfinite(p).all()


def test_softmax_rejects_nonfinite():
    with pytest.raises(InvalidInput):
        softmax(np.array([np.nan, 0.0]))
    with pytest.raises(InvalidInput):
        softmax(np.array([np.inf, 0.0]))


@given(finite_logits)
@settings(max_examples=200, deadline=None)
def test_softmax_rows_on_simplex(logits):
    p = softmax(logits)
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=-1), 1.0, atol=1e-12)


def test_clamp_probs_renormalizes():
    p = clamp_probs(np.array([1.0, 0.0]), eps=1e-12)
    assert p[1] >= 1e-13
    np.testing.assert_allclose(p.sum(), 1.0)


def test_entropy_known_value():
    # -0.8 ln 0.8 - 0.2 ln 0.2
    assert entropy(np.array([0.8, 0.2])) == pytest.approx(0.5004024235381879, abs=1e-15)


def test_entropy_zero_times_log_zero():
    assert entropy(np.array([1.0, 0.0])) == 0.0


@given(finite_logits)
@settings(max_examples=200, deadline=None)
def test_entropy_bounds(logits):
    p = softmax(logits)
    h = entropy(p)
    c = p.shape[-1]
    assert np.all(h >= -1e-12)
    assert np.all(h <= np.log(c) + 1e-12)


def test_kl_known_value():
    # 0.75 ln(1.5) + 0.25 ln(0.5)
    val = kl_divergence(np.array([0.75, 0.25]), np.array([0.5, 0.5]))
    assert val == pytest.approx(0.13081203594113697, abs=1e-15)


def test_kl_self_is_zero_and_nonnegative():
    rng = np.random.default_rng(0)
    for _ in range(50):
        p = softmax(rng.normal(size=6))
        q = softmax(rng.normal(size=6))
        assert kl_divergence(p, p) == pytest.approx(0.0, abs=1e-12)
        assert kl_divergence(p, q) >= -1e-12


def test_kl_zero_in_p_contributes_zero():
    val = kl_divergence(np.array([1.0, 0.0]), np.array([0.5, 0.5]))
    assert val == pytest.approx(np.log(2.0), abs=1e-12)


def test_kl_shape_mismatch():
    with pytest.raises(ShapeError):
        kl_divergence(np.array([1.0, 0.0]), np.array([0.5, 0.25, 0.25]))


def test_prediction_set_validation():
    with pytest.raises(ShapeError):
        PredictionSet(np.zeros(3))
    with pytest.raises(ShapeError):
        PredictionSet(np.zeros((2, 1)))
    with pytest.raises(InvalidInput):
        PredictionSet(np.array([[np.nan, 0.0]]))
    pred = PredictionSet(np.zeros((3, 4)))
    assert pred.n_members == 3 and pred.n_classes == 4
    np.testing.assert_allclose(pred.probs, 0.25)


def test_dirichlet_validation():
    with pytest.raises(InvalidInput):
        DirichletPrediction(np.array([1.0, -1.0]))
    with pytest.raises(ShapeError):
        DirichletPrediction(np.array([2.0]))
    d = DirichletPrediction(np.array([2.0, 6.0]))
    assert d.strength == 8.0
    np.testing.assert_allclose(d.mean, [0.25, 0.75])


def test_soft_label_validation():
    with pytest.raises(InvalidInput):
        SoftLabel(np.array([0, 0]))
    with pytest.raises(InvalidInput):
        SoftLabel(np.array([1.5, 0.5]))
    s = SoftLabel(np.array([3, 1]))
    np.testing.assert_allclose(s.pi_star, [0.75, 0.25])


def test_sample_record_coherence():
    pred = PredictionSet(np.zeros((2, 3)))
    with pytest.raises(InvalidInput):
        SampleRecord(id="a", prediction=pred, label=3)
    with pytest.raises(InvalidInput):
        SampleRecord(id="a", prediction=pred, label=0, ood=True, severity=0)
    with pytest.raises(InvalidInput):
        SampleRecord(id="a", prediction=pred, label=0, ood=False, severity=2)
    with pytest.raises(ShapeError):
        SampleRecord(id="a", prediction=pred, label=0, soft_label=SoftLabel(np.array([1, 1])))
    rec = SampleRecord(id="a", prediction=pred, label=1, ood=True, severity=3)
    assert rec.n_classes == 3
