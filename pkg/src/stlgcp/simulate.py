"""Forward sampler of the full generative hierarchy for tests and demos."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .dataset import PanelDataset, standardize
from .graph import SlopeUnitGraph, besag_precision, lattice_graph
from .model import ModelFamily

__all__ = [
    "SimulationError",
    "SimConfig",
    "TruthRecord",
    "sample_besag",
    "sample_besag_eigen",
    "sample_ar1",
    "sample_dataset",
    "write_dataset_csvs",
]

ETA_CLAMP = 30.0
RIDGE = 1e-8


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    """Ground-truth configuration for one synthetic dataset.

    Provide `graph` or a lattice (width x height, common unit area).
    Hyperparameters are read per family: tau_spatial (mod3),
    tau_temporal/ar_coef (mod4), tau_innovation/ar_coef (mod5).
    time_intercepts are centered to sum to zero before use.
    """

    family: ModelFamily = ModelFamily.MOD1
    n_periods: int = 3
    n_covariates: int = 2
    beta0: float = 0.0
    beta: tuple[float, ...] | None = None
    time_intercepts: tuple[float, ...] | None = None
    tau_spatial: float = 1.0
    tau_temporal: float = 1.0
    tau_innovation: float = 1.0
    ar_coef: float = 0.5
    width: int = 6
    height: int = 6
    unit_area: float = 1.0
    graph: SlopeUnitGraph | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "family", ModelFamily.parse(self.family))
        if self.beta is not None and len(self.beta) != self.n_covariates:
            raise ValueError("beta length must equal n_covariates")
        if self.time_intercepts is not None and len(self.time_intercepts) != self.n_periods:
            raise ValueError("time_intercepts length must equal n_periods")
        if not -1.0 < self.ar_coef < 1.0:
            raise ValueError("ar_coef must lie in (-1, 1)")

    def resolve_graph(self) -> SlopeUnitGraph:
        return self.graph if self.graph is not None else lattice_graph(self.width, self.height, self.unit_area)


@dataclass(frozen=True)
class TruthRecord:
    beta0: float
    beta: np.ndarray
    time_intercepts: np.ndarray | None
    field: np.ndarray | None      # (n, T)
    hypers: dict[str, float]
    eta: np.ndarray               # (n, T), includes offset

    def as_rows(self):
        rows = [("beta0", self.beta0)]
        rows += [(f"beta[{k}]", v) for k, v in enumerate(self.beta)]
        if self.time_intercepts is not None:
            rows += [(f"beta_t[{j}]", v) for j, v in enumerate(self.time_intercepts)]
        rows += [(k, v) for k, v in sorted(self.hypers.items())]
        if self.field is not None:
            n, T = self.field.shape
            rows += [(f"w[{i},{j}]", self.field[i, j]) for j in range(T) for i in range(n)]
        return rows


def _constrained_chol_sample(g: SlopeUnitGraph, tau: float, rng: np.random.Generator,
                             constrain: bool, ridge: float) -> np.ndarray:
    """Ridge-then-recondition draw from the intrinsic field, sum-zero per component."""
    n = g.n_units
    Q = besag_precision(g, tau).toarray()
    iso = np.flatnonzero(g.degrees == 0)
    Q[iso, iso] = tau          # isolated units: independent Normal(0, 1/tau)
    Q[np.diag_indices(n)] += ridge
    L = np.linalg.cholesky(Q)
    z = rng.standard_normal(n)
    x = solve_triangular(L.T, z, lower=False)
    if not constrain:
        return x
    # condition on per-component sum-to-zero (components of size >= 2)
    comps = [np.flatnonzero(g.components == c) for c in range(g.n_components)]
    rows = [m for m in comps if m.size >= 2]
    if rows:
        C = np.zeros((len(rows), n))
        for r, m in enumerate(rows):
            C[r, m] = 1.0
        W = solve_triangular(L.T, solve_triangular(L, C.T, lower=True), lower=False)
        x = x - W @ np.linalg.solve(C @ W, C @ x)
    return x


def sample_besag(g: SlopeUnitGraph, tau: float, seed_or_rng,
                 constrain: bool = True, ridge: float = RIDGE) -> np.ndarray:
    """One draw of the intrinsic spatial field at conditional precision tau.

    constrain=False returns the unconditioned ridge-proper draw (the
    component-wise level is then only weakly pinned by the ridge).
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) else np.random.default_rng(seed_or_rng)
    return _constrained_chol_sample(g, tau, rng, constrain, ridge)


def sample_besag_eigen(g: SlopeUnitGraph, tau: float, seed_or_rng) -> np.ndarray:
    """Eigendecomposition route (dense; n <= a few hundred): reference for tests."""
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) else np.random.default_rng(seed_or_rng)
    Q = besag_precision(g, tau).toarray()
    iso = np.flatnonzero(g.degrees == 0)
    Q[iso, iso] = tau
    w, V = np.linalg.eigh(Q)
    keep = w > 1e-10 * max(1.0, w.max())
    z = rng.standard_normal(int(keep.sum()))
    return V[:, keep] @ (z / np.sqrt(w[keep]))


def sample_ar1(T: int, tau: float, beta: float, seed_or_rng) -> np.ndarray:
    """Stationary AR1 path: W_1 ~ N(0, 1/(tau(1-beta^2))), then innovations 1/tau."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    if not -1.0 < beta < 1.0:
        raise ValueError("beta must lie in (-1, 1)")
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) else np.random.default_rng(seed_or_rng)
    w = np.empty(T)
    w[0] = rng.standard_normal() / math.sqrt(tau * (1.0 - beta * beta))
    sd = 1.0 / math.sqrt(tau)
    for j in range(1, T):
        w[j] = beta * w[j - 1] + sd * rng.standard_normal()
    return w


def sample_dataset(cfg: SimConfig):
    """Simulate (PanelDataset, TruthRecord) from the configured family.

    Covariates are i.i.d. standard normal columns re-standardized to
    sample mean 0 / variance 1. Reproducible given cfg.seed.
    """
    g = cfg.resolve_graph()
    n, T, p = g.n_units, cfg.n_periods, cfg.n_covariates
    rng = np.random.default_rng(cfg.seed)

    if p:
        Z, _, _ = standardize(rng.standard_normal((n, p)))
    else:
        Z = np.zeros((n, 0))
    names = tuple(f"x{k}" for k in range(p))
    beta = np.zeros(p) if cfg.beta is None else np.asarray(cfg.beta, dtype=float)

    eta = np.log(g.areas)[:, None] + cfg.beta0 + (Z @ beta)[:, None]
    eta = np.broadcast_to(eta, (n, T)).copy()

    fam = cfg.family
    tints = None
    if fam is not ModelFamily.MOD1:
        tints = np.zeros(T) if cfg.time_intercepts is None else np.asarray(cfg.time_intercepts, dtype=float)
        tints = tints - tints.mean()
        eta += tints[None, :]

    field_vals = None
    hypers: dict[str, float] = {}
    if fam is ModelFamily.MOD3:
        field_vals = np.column_stack([sample_besag(g, cfg.tau_spatial, rng) for _ in range(T)])
        hypers = {"tau_spatial": cfg.tau_spatial}
    elif fam is ModelFamily.MOD4:
        field_vals = np.vstack([sample_ar1(T, cfg.tau_temporal, cfg.ar_coef, rng) for _ in range(n)])
        hypers = {"tau_temporal": cfg.tau_temporal, "ar_coef": cfg.ar_coef}
    elif fam is ModelFamily.MOD5:
        b = cfg.ar_coef
        cols = [sample_besag(g, cfg.tau_innovation * (1.0 - b * b), rng)]
        for _ in range(1, T):
            cols.append(b * cols[-1] + sample_besag(g, cfg.tau_innovation, rng))
        field_vals = np.column_stack(cols)
        hypers = {"tau_innovation": cfg.tau_innovation, "ar_coef": cfg.ar_coef}
    if field_vals is not None:
        eta += field_vals

    if np.max(eta) > ETA_CLAMP:
        i, j = np.unravel_index(int(np.argmax(eta)), eta.shape)
        raise SimulationError(
            f"linear predictor {eta[i, j]:.2f} exceeds clamp {ETA_CLAMP} at unit {i}, period {j}"
        )
    counts = rng.poisson(np.exp(eta))
    labels = tuple(f"T{j + 1}" for j in range(T))
    data = PanelDataset(g, counts.astype(np.int64), Z, names, labels)
    truth = TruthRecord(cfg.beta0, beta, tints, field_vals, hypers, eta)
    return data, truth


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_dataset_csvs(out_dir, data: PanelDataset, truth: TruthRecord | None = None):
    """Emit units/edges/covariates/counts CSVs (and truth.csv) round-trippable by the loaders."""
    os.makedirs(out_dir, exist_ok=True)
    g = data.graph

    def _open(name):
        return open(os.path.join(out_dir, name), "w", newline="\n", encoding="utf-8")

    with _open("units.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "area_m2"])
        for u, a in zip(g.unit_ids, g.areas):
            w.writerow([u, _fmt(a)])
    with _open("edges.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id_a", "id_b"])
        for a, b in sorted(g.edges):
            w.writerow([g.unit_ids[a], g.unit_ids[b]])
    with _open("covariates.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *data.covariate_names])
        for i, u in enumerate(g.unit_ids):
            w.writerow([u, *(_fmt(v) for v in data.covariates[i])])
    with _open("counts.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *data.period_labels])
        for i, u in enumerate(g.unit_ids):
            w.writerow([u, *(int(v) for v in data.counts[i])])
    if truth is not None:
        with _open("truth.csv") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["name", "value"])
            for name, v in truth.as_rows():
                w.writerow([name, _fmt(v)])
