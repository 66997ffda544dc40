"""Spatial k-fold and temporal leave-one-out cross-validation."""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dataset import PanelDataset
from .laplace import GridConfig, explore_hyper, posterior_summaries
from .model import ModelSpec, build_layout
from .validate import PosteriorSummary, count_calibration, roc_auc

__all__ = ["FoldMetrics", "CVResult", "spatial_folds", "cv_spatial_kfold", "cv_temporal_loo"]


@dataclass(frozen=True)
class FoldMetrics:
    fold: int
    n_cells: int
    auc: float            # NaN when the held-out labels are single-class
    coverage: float
    roc: list


@dataclass(frozen=True)
class CVResult:
    scheme: str
    folds: tuple[FoldMetrics, ...]
    heldout: PosteriorSummary      # every cell predicted by the fit that held it out
    assignment: np.ndarray         # unit -> fold (spatial) or period -> fold (temporal)

    def mean_auc(self) -> float:
        vals = [f.auc for f in self.folds if np.isfinite(f.auc)]
        return float(np.mean(vals)) if vals else float("nan")

    def pooled_auc(self, observed: np.ndarray) -> float:
        """AUC over all held-out cells pooled across folds."""
        scores = self.heldout.susceptibility.ravel()
        labels = (np.asarray(observed).ravel() >= 1)
        _, auc = roc_auc(scores, labels)
        return auc


def spatial_folds(n_units: int, k: int, seed: int) -> np.ndarray:
    """Random partition of units into k folds with sizes differing by <= 1."""
    if k < 2 or k > n_units:
        raise ValueError(f"need 2 <= k <= n_units, got k={k}, n={n_units}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_units)
    assignment = np.empty(n_units, dtype=np.int64)
    for f, chunk in enumerate(np.array_split(perm, k)):
        assignment[chunk] = f
    return assignment


def _fit_predict(data: PanelDataset, spec: ModelSpec, mask: np.ndarray,
                 grid_config: GridConfig | None, intensity_estimator: str) -> PosteriorSummary:
    layout = build_layout(spec, data)
    hyper = explore_hyper(layout, spec, data, grid_config=grid_config, mask=mask)
    return posterior_summaries(layout, spec, hyper, data, mask=mask,
                               intensity_estimator=intensity_estimator)


def _heldout_metrics(fold: int, data: PanelDataset, summ: PosteriorSummary,
                     held: np.ndarray) -> FoldMetrics:
    obs = data.counts[held]
    scores = summ.susceptibility[held]
    labels = obs.ravel() >= 1
    if labels.all() or not labels.any():
        warnings.warn(f"fold {fold}: single-class held-out labels, AUC skipped")
        roc, auc = [], float("nan")
    else:
        roc, auc = roc_auc(scores.ravel(), labels)
    calib = count_calibration(obs, summ.intensity[held])
    return FoldMetrics(fold, int(obs.size), auc, calib["coverage"], roc)


def cv_spatial_kfold(data: PanelDataset, spec: ModelSpec, k: int = 10, seed: int = 0,
                     grid_config: GridConfig | None = None, jobs: int = 1,
                     intensity_estimator: str = "mean") -> CVResult:
    """Spatial k-fold CV: each fold's units are held out for all periods.

    Held-out counts are removed from the likelihood only; covariates and
    the latent structure stay in the model, so held-out field values are
    predicted through the conditional Gaussian given their (possibly
    also held-out) neighbours, degrading to the fixed-effect predictor
    when a whole component is held out.
    """
    n, T = data.n_units, data.n_periods
    assignment = spatial_folds(n, k, seed)

    def one(f: int):
        held = assignment == f
        mask = np.ones((n, T), dtype=bool)
        mask[held, :] = False
        summ = _fit_predict(data, spec, mask, grid_config, intensity_estimator)
        return held, summ

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(one, range(k)))
    else:
        results = [one(f) for f in range(k)]

    eta_mean = np.full((n, T), np.nan)
    eta_sd = np.full((n, T), np.nan)
    metrics = []
    for f, (held, summ) in enumerate(results):
        eta_mean[held, :] = summ.eta_mean[held, :]
        eta_sd[held, :] = summ.eta_sd[held, :]
        metrics.append(_heldout_metrics(f, data, summ, np.broadcast_to(held[:, None], (n, T))))
    combined = PosteriorSummary.from_eta(eta_mean, eta_sd, {}, intensity_estimator)
    return CVResult("spatial", tuple(metrics), combined, assignment)


def cv_temporal_loo(data: PanelDataset, spec: ModelSpec,
                    grid_config: GridConfig | None = None, jobs: int = 1,
                    intensity_estimator: str = "mean") -> CVResult:
    """Temporal leave-one-out: each period is held out and re-predicted."""
    n, T = data.n_units, data.n_periods
    if T < 2:
        raise ValueError("temporal CV needs at least 2 periods")

    def one(j: int):
        mask = np.ones((n, T), dtype=bool)
        mask[:, j] = False
        summ = _fit_predict(data, spec, mask, grid_config, intensity_estimator)
        return summ

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(one, range(T)))
    else:
        results = [one(j) for j in range(T)]

    eta_mean = np.full((n, T), np.nan)
    eta_sd = np.full((n, T), np.nan)
    metrics = []
    for j, summ in enumerate(results):
        eta_mean[:, j] = summ.eta_mean[:, j]
        eta_sd[:, j] = summ.eta_sd[:, j]
        held = np.zeros((n, T), dtype=bool)
        held[:, j] = True
        metrics.append(_heldout_metrics(j, data, summ, held))
    combined = PosteriorSummary.from_eta(eta_mean, eta_sd, {}, intensity_estimator)
    return CVResult("temporal", tuple(metrics), combined, np.arange(T, dtype=np.int64))
