import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from stlgcp.validate import (
    ClassLabel,
    PosteriorSummary,
    TrendLabel,
    aspect_effect,
    classify,
    classify_array,
    count_calibration,
    poisson_central_interval,
    ratio_maps,
    roc_auc,
    susceptibility,
    temporal_trends,
)


def test_susceptibility_values():
    assert susceptibility(0.0) == 0.0
    assert susceptibility(1.0) == pytest.approx(0.6321205588, abs=1e-9)
    assert susceptibility(3.0) == pytest.approx(0.9502129316, abs=1e-9)
    with pytest.raises(ValueError):
        susceptibility(-0.1)


def test_class_edges_in_susceptibility_space():
    # the intensity thresholds 0.05/1/3 map to the stated class edges
    assert round(susceptibility(0.05), 4) == 0.0488
    assert round(susceptibility(1.0), 4) == 0.6321
    assert round(susceptibility(3.0), 4) == 0.9502


def test_classify_boundaries():
    assert classify(0.05) is ClassLabel.CLEARLY_STABLE
    assert classify(0.0500001) is ClassLabel.UNCERTAIN_1
    assert classify(1.0) is ClassLabel.UNCERTAIN_1
    assert classify(3.0) is ClassLabel.UNCERTAIN_2
    assert classify(3.2) is ClassLabel.CLEARLY_UNSTABLE
    arr = classify_array(np.array([0.0, 0.05, 0.5, 1.0, 2.0, 3.0, 10.0]))
    assert arr.tolist() == [0, 0, 1, 1, 2, 2, 3]


@given(st.floats(min_value=0.0, max_value=100.0), st.floats(min_value=0.0, max_value=100.0))
@settings(max_examples=100, deadline=None)
def test_classify_monotone(a, b):
    lo, hi = sorted((a, b))
    assert classify(lo) <= classify(hi)
    # mathematically susceptibility < 1; float64 saturates around intensity 37
    assert 0.0 <= susceptibility(lo) <= susceptibility(hi) <= 1.0
    if hi < 30.0:
        assert susceptibility(hi) < 1.0


def summary_from_intensity(lam, estimator="plugin"):
    lam = np.asarray(lam, dtype=float)
    eta = np.log(np.maximum(lam, 1e-300))
    return PosteriorSummary.from_eta(eta, np.zeros_like(eta), {}, estimator)


def test_ratio_maps_identity_and_values():
    a = summary_from_intensity([[2.0, 1.0]])
    b = summary_from_intensity([[1.0, 1.0]])
    ir, sr = ratio_maps(a, b)
    assert ir[0, 0] == pytest.approx(2.0)
    assert sr[0, 0] == pytest.approx((1 - math.exp(-2)) / (1 - math.exp(-1)), rel=1e-12)
    assert ir[0, 1] == 1.0 and sr[0, 1] == 1.0
    same = ratio_maps(a, a)
    assert np.allclose(same[0], 1.0) and np.allclose(same[1], 1.0)


def test_ratio_maps_zero_over_zero_convention():
    z = summary_from_intensity([[0.0]])
    ir, sr = ratio_maps(z, z)
    assert ir[0, 0] == 1.0 and sr[0, 0] == 1.0


def test_ratio_maps_shape_mismatch():
    with pytest.raises(ValueError, match="shape"):
        ratio_maps(summary_from_intensity([[1.0]]), summary_from_intensity([[1.0, 2.0]]))


def test_roc_auc_perfect_and_reversed():
    scores = np.array([0.9, 0.8, 0.2, 0.1])
    labels = np.array([1, 1, 0, 0])
    _, auc = roc_auc(scores, labels)
    assert auc == 1.0
    _, auc_rev = roc_auc(-scores, labels)
    assert auc_rev == 0.0
    _, auc_half = roc_auc(np.array([0.5, 0.5, 0.5, 0.5]), labels)
    assert auc_half == 0.5


def test_roc_auc_random_scores_near_half():
    rng = np.random.default_rng(13)
    scores = rng.uniform(size=10000)
    labels = rng.uniform(size=10000) < 0.3
    _, auc = roc_auc(scores, labels)
    assert auc == pytest.approx(0.5, abs=0.02)


def test_roc_points_monotone():
    rng = np.random.default_rng(14)
    scores = rng.normal(size=300)
    labels = rng.uniform(size=300) < stats.norm.cdf(scores)
    points, auc = roc_auc(scores, labels)
    fpr = [p[1] for p in points]
    tpr = [p[2] for p in points]
    assert fpr == sorted(fpr) and tpr == sorted(tpr)
    assert points[0][1] == 0.0 and points[-1][2] == 1.0
    assert 0.5 < auc < 1.0


def brute_force_auc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    wins = sum(1.0 if p > n else (0.5 if p == n else 0.0) for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def test_auc_equals_pair_counting_with_ties():
    rng = np.random.default_rng(15)
    for _ in range(25):
        n = int(rng.integers(5, 120))
        scores = np.round(rng.normal(size=n), 1)   # force ties
        labels = rng.uniform(size=n) < 0.4
        if labels.all() or not labels.any():
            continue
        _, auc = roc_auc(scores, labels)
        assert auc == brute_force_auc(scores, labels)


def test_roc_single_class_rejected():
    with pytest.raises(ValueError, match="single-class"):
        roc_auc(np.array([0.1, 0.2]), np.array([1, 1]))


def test_poisson_interval_frozen_values():
    lo, hi = poisson_central_interval(np.array([0.0, 4.0]))
    assert lo.tolist() == [0.0, 1.0]
    # CDF-inversion oracle: smallest k with F(k) >= 0.975 at mean 4 is 8
    assert hi.tolist() == [0.0, 8.0]
    assert stats.poisson.cdf(8, 4.0) >= 0.975 > stats.poisson.cdf(7, 4.0)


def test_count_calibration_zero_mean_cell():
    out = count_calibration(np.array([0, 1]), np.array([0.0, 0.0]))
    assert out["interval_low"].tolist() == [0.0, 0.0]
    assert out["interval_high"].tolist() == [0.0, 0.0]
    assert out["covered"].tolist() == [True, False]
    assert out["coverage"] == 0.5


def test_count_calibration_simulated_coverage():
    rng = np.random.default_rng(16)
    lam = rng.uniform(15.0, 25.0, size=10000)
    obs = rng.poisson(lam)
    out = count_calibration(obs, lam)
    assert out["coverage"] == pytest.approx(0.956, abs=0.02)
    levels = [row["observed"] for row in out["table"]]
    assert levels == sorted(levels)


def test_temporal_trend_labels():
    W = np.array([
        [-1.0, 0.0, 0.5, 1.0, 1.2, 2.0],   # strictly increasing
        [2.0, 1.0, 0.5, 0.2, 0.1, 0.0],    # strictly decreasing
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],    # constant: not strict
        [0.0, 1.0, 0.5, 0.7, 0.2, 0.9],    # erratic
    ])
    labels = temporal_trends(W)
    assert labels[0] is TrendLabel.CLUSTERING
    assert labels[1] is TrendLabel.REPELLENCY
    assert labels[2] is TrendLabel.ERRATIC
    assert labels[3] is TrendLabel.ERRATIC


def test_aspect_effect_curve():
    theta, eff = aspect_effect(1.0, 0.0)
    assert eff[0] == pytest.approx(1.0)
    be, bn = 0.7, -0.4
    theta, eff = aspect_effect(be, bn, np.linspace(0.0, 359.99, 36000))
    peak = theta[np.argmax(eff)]
    expected = math.degrees(math.atan2(bn, be)) % 360.0
    assert peak == pytest.approx(expected, abs=0.02)
    _, zero = aspect_effect(0.0, 0.0)
    assert np.all(zero == 0.0)


def test_posterior_summary_estimators():
    eta = np.array([[0.0, 1.0]])
    sd = np.array([[1.0, 0.5]])
    s_mean = PosteriorSummary.from_eta(eta, sd, {}, "mean")
    s_plug = PosteriorSummary.from_eta(eta, sd, {}, "plugin")
    assert np.allclose(s_mean.intensity_mean, np.exp(eta + 0.5 * sd**2))
    assert np.allclose(s_plug.intensity, np.exp(eta))
    assert np.allclose(s_mean.susceptibility, 1.0 - np.exp(-s_mean.intensity_mean))
    assert np.array_equal(s_mean.classes, classify_array(s_mean.intensity_mean))
    with pytest.raises(ValueError, match="estimator"):
        PosteriorSummary.from_eta(eta, sd, {}, "geometric")
