import numpy as np
import pytest

from untangle_eval.core import DirichletPrediction, PredictionSet
from untangle_eval.errors import InvalidInput
from untangle_eval.synth import (
    FAMILIES,
    SimConfig,
    dirichlet_sample,
    gaussian_logit_sample,
    philox_rng,
    simulate,
)


def test_philox_rng_deterministic_streams():
    a = philox_rng(7, 3).standard_normal(5)
    b = philox_rng(7, 3).standard_normal(5)
    c = philox_rng(7, 4).standard_normal(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_philox_rng_accepts_tuple_and_negative_seeds():
    a = philox_rng((3, -1), 0).standard_normal(3)
    b = philox_rng((3, -1), 0).standard_normal(3)
    np.testing.assert_array_equal(a, b)


def test_dirichlet_sample_shape_and_simplex():
    pred = dirichlet_sample(np.array([2.0, 1.0, 0.5]), 64, 0)
    assert isinstance(pred, PredictionSet)
    assert pred.logits.shape == (64, 3)
    np.testing.assert_allclose(pred.probs.sum(axis=1), 1.0, atol=1e-9)


def test_dirichlet_sample_mean_approaches_beta_mean():
    beta = np.array([4.0, 2.0, 2.0])
    pred = dirichlet_sample(beta, 50_000, 1)
    np.testing.assert_allclose(pred.probs.mean(axis=0), beta / beta.sum(), atol=5e-3)


def test_gaussian_logit_sample():
    mean = np.array([1.0, -1.0])
    pred = gaussian_logit_sample(mean, 0.5, 20_000, 2)
    np.testing.assert_allclose(pred.logits.mean(axis=0), mean, atol=2e-2)
    np.testing.assert_allclose(pred.logits.std(axis=0), 0.5, atol=2e-2)


def test_sim_config_validation():
    with pytest.raises(InvalidInput):
        SimConfig(n=0, n_classes=3, n_members=2)
    with pytest.raises(InvalidInput):
        SimConfig(n=1, n_classes=3, n_members=2, family="nope")
    with pytest.raises(InvalidInput):
        SimConfig(n=1, n_classes=3, n_members=2, severity_levels=(7,))
    with pytest.raises(InvalidInput):
        SimConfig(n=1, n_classes=3, n_members=2, aleatoric_scale=-1.0)


@pytest.mark.parametrize("family", FAMILIES)
def test_simulate_families_and_coherence(family):
    cfg = SimConfig(n=60, n_classes=4, n_members=3, family=family, severity_levels=(0, 2), seed=5)
    ds = simulate(cfg)
    assert len(ds.samples) == 60
    assert ds.embeddings.shape == (60, 4)
    for s in ds.samples:
        assert s.ood == (s.severity > 0)
        assert int(s.soft_label.votes.sum()) == cfg.votes_per_sample
        if family == "dirichlet":
            assert isinstance(s.prediction, DirichletPrediction)
        else:
            assert isinstance(s.prediction, PredictionSet)
            assert s.prediction.n_members == 3


def test_simulate_deterministic():
    cfg = SimConfig(n=30, n_classes=3, n_members=2, severity_levels=(0, 1), seed=9)
    a, b = simulate(cfg), simulate(cfg)
    for sa, sb in zip(a.samples, b.samples):
        np.testing.assert_array_equal(sa.prediction.logits, sb.prediction.logits)
        assert sa.label == sb.label
        np.testing.assert_array_equal(sa.soft_label.votes, sb.soft_label.votes)
    np.testing.assert_array_equal(a.embeddings, b.embeddings)


def test_simulate_zero_aleatoric_scale_gives_unanimous_votes():
    cfg = SimConfig(n=20, n_classes=5, n_members=2, aleatoric_scale=0.0, seed=3)
    ds = simulate(cfg)
    for s in ds.samples:
        assert np.count_nonzero(s.soft_label.votes) == 1
        assert s.soft_label.votes[s.label] == cfg.votes_per_sample


def test_simulate_severity_shifts_are_ood_flagged():
    cfg = SimConfig(n=40, n_classes=3, n_members=2, severity_levels=(0, 3), seed=1)
    ds = simulate(cfg)
    severities = {s.severity for s in ds.samples}
    assert severities == {0, 3}
