"""Intensity/susceptibility products: classification, ratios, ROC, count calibration."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

__all__ = [
    "ClassLabel",
    "PosteriorSummary",
    "susceptibility",
    "classify",
    "classify_array",
    "ratio_maps",
    "roc_auc",
    "count_calibration",
    "temporal_trends",
    "aspect_effect",
]

# intensity thresholds of the four-class ranking
CLASS_EDGES = (0.05, 1.0, 3.0)


class ClassLabel(enum.IntEnum):
    CLEARLY_STABLE = 0
    UNCERTAIN_1 = 1
    UNCERTAIN_2 = 2
    CLEARLY_UNSTABLE = 3

    def __str__(self) -> str:  # CSV-friendly
        return self.name


class TrendLabel(enum.Enum):
    CLUSTERING = "CLUSTERING"
    REPELLENCY = "REPELLENCY"
    ERRATIC = "ERRATIC"


def susceptibility(intensity):
    """Probability of at least one event: 1 - exp(-intensity)."""
    arr = np.asarray(intensity, dtype=float)
    if np.any(arr < 0):
        raise ValueError("intensity must be nonnegative")
    out = -np.expm1(-arr)
    return float(out) if np.isscalar(intensity) else out


def classify(intensity) -> ClassLabel:
    """Four-class label from expected count; upper edges inclusive."""
    x = float(intensity)
    if x < 0:
        raise ValueError("intensity must be nonnegative")
    if x <= CLASS_EDGES[0]:
        return ClassLabel.CLEARLY_STABLE
    if x <= CLASS_EDGES[1]:
        return ClassLabel.UNCERTAIN_1
    if x <= CLASS_EDGES[2]:
        return ClassLabel.UNCERTAIN_2
    return ClassLabel.CLEARLY_UNSTABLE


def classify_array(intensity: np.ndarray) -> np.ndarray:
    """Vectorized classify; returns an integer array of ClassLabel values."""
    arr = np.asarray(intensity, dtype=float)
    if np.any(arr < 0):
        raise ValueError("intensity must be nonnegative")
    out = np.digitize(arr, CLASS_EDGES, right=True)
    return out.astype(np.int64)


@dataclass(frozen=True)
class PosteriorSummary:
    """Per-(unit, period) predictor posterior and derived intensity products.

    eta includes the area offset. susceptibility and classes come from
    the configured estimator ('mean' for the lognormal mean
    exp(eta_mean + eta_sd^2/2), 'plugin' for exp(eta_mean)).
    """

    eta_mean: np.ndarray
    eta_sd: np.ndarray
    intensity_plugin: np.ndarray
    intensity_mean: np.ndarray
    susceptibility: np.ndarray
    classes: np.ndarray
    fixed_effects: dict[str, tuple[float, float, float, float]]
    estimator: str = "mean"

    @classmethod
    def from_eta(cls, eta_mean, eta_sd, fixed_effects, estimator: str = "mean"):
        eta_mean = np.asarray(eta_mean, dtype=float)
        eta_sd = np.asarray(eta_sd, dtype=float)
        if estimator not in ("mean", "plugin"):
            raise ValueError(f"unknown intensity estimator {estimator!r}")
        plugin = np.exp(eta_mean)
        mean = np.exp(eta_mean + 0.5 * eta_sd**2)
        sel = mean if estimator == "mean" else plugin
        return cls(eta_mean, eta_sd, plugin, mean, susceptibility(sel),
                   classify_array(sel), dict(fixed_effects), estimator)

    @property
    def intensity(self) -> np.ndarray:
        return self.intensity_mean if self.estimator == "mean" else self.intensity_plugin

    @property
    def shape(self):
        return self.eta_mean.shape


def ratio_maps(adv: PosteriorSummary, base: PosteriorSummary):
    """Intensity and susceptibility ratios of an advanced model to a baseline.

    0/0 cells map to 1 by convention. Returns (IR, SR) arrays.
    """
    if adv.shape != base.shape:
        raise ValueError(f"shape mismatch {adv.shape} vs {base.shape}")
    with np.errstate(divide="ignore", invalid="ignore"):
        ir = adv.intensity / base.intensity
        sr = adv.susceptibility / base.susceptibility
    both_zero = (adv.intensity == 0) & (base.intensity == 0)
    ir = np.where(both_zero, 1.0, ir)
    sr = np.where((adv.susceptibility == 0) & (base.susceptibility == 0), 1.0, sr)
    return ir, sr


def roc_auc(scores, labels):
    """ROC points over all distinct thresholds and the rank-statistic AUC.

    AUC is the Mann-Whitney estimate with midranks for ties. Returns
    (list of (threshold, fpr, tpr), auc).
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be equal-length 1-d")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("single-class labels")

    order = np.argsort(-scores, kind="mergesort")
    s_sorted = scores[order]
    l_sorted = labels[order]
    points = [(math.inf, 0.0, 0.0)]
    tp = fp = 0
    i = 0
    while i < scores.size:
        j = i
        while j < scores.size and s_sorted[j] == s_sorted[i]:
            tp += int(l_sorted[j])
            fp += int(~l_sorted[j])
            j += 1
        points.append((float(s_sorted[i]), fp / n_neg, tp / n_pos))
        i = j

    ranks = stats.rankdata(scores, method="average")
    auc = (float(ranks[labels].sum()) - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    return points, auc


def poisson_central_interval(mean, level: float = 0.95):
    """Equal-tailed exact Poisson interval(s) by CDF inversion."""
    arr = np.asarray(mean, dtype=float)
    a = (1.0 - level) / 2.0
    lo = np.where(arr > 0, stats.poisson.ppf(a, np.maximum(arr, 1e-300)), 0.0)
    hi = np.where(arr > 0, stats.poisson.ppf(1.0 - a, np.maximum(arr, 1e-300)), 0.0)
    return lo, hi


def count_calibration(observed, predicted, level: float = 0.95):
    """Observed-vs-predicted calibration against exact Poisson bands.

    Returns a dict with per-observed-count quartiles of the predictions,
    the per-cell Poisson central interval at `level`, and the fraction
    of observations covered by their own interval.
    """
    obs = np.asarray(observed).ravel()
    pred = np.asarray(predicted, dtype=float).ravel()
    if obs.shape != pred.shape:
        raise ValueError("observed and predicted shapes differ")
    lo, hi = poisson_central_interval(pred, level)
    covered = (obs >= lo) & (obs <= hi)
    table = []
    for level_value in np.unique(obs):
        sel = pred[obs == level_value]
        table.append({
            "observed": int(level_value),
            "n": int(sel.size),
            "q25": float(np.percentile(sel, 25)),
            "median": float(np.percentile(sel, 50)),
            "q75": float(np.percentile(sel, 75)),
        })
    return {
        "table": table,
        "interval_low": lo,
        "interval_high": hi,
        "covered": covered,
        "coverage": float(covered.mean()),
    }


def temporal_trends(W_means: np.ndarray):
    """Per-unit monotonicity label of the latent temporal trajectory.

    Strictly increasing over all periods -> CLUSTERING, strictly
    decreasing -> REPELLENCY, anything else (ties included) -> ERRATIC.
    """
    W = np.asarray(W_means, dtype=float)
    if W.ndim != 2 or W.shape[1] < 2:
        raise ValueError("need an (n, T>=2) trajectory matrix")
    d = np.diff(W, axis=1)
    out = np.full(W.shape[0], TrendLabel.ERRATIC, dtype=object)
    out[np.all(d > 0, axis=1)] = TrendLabel.CLUSTERING
    out[np.all(d < 0, axis=1)] = TrendLabel.REPELLENCY
    return out


def aspect_effect(beta_east: float, beta_north: float, theta_grid=None):
    """Combined aspect effect beta_e*cos(theta) + beta_n*sin(theta) in degrees.

    Returns (theta_deg, effect) on [0, 360) with 1-degree resolution by
    default.
    """
    if theta_grid is None:
        theta_grid = np.arange(0.0, 360.0)
    theta = np.asarray(theta_grid, dtype=float)
    rad = np.deg2rad(theta)
    return theta, beta_east * np.cos(rad) + beta_north * np.sin(rad)
