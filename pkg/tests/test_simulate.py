import math

import numpy as np
import pytest
from scipy.linalg import solve_triangular
from scipy.stats import ks_2samp

from stlgcp.graph import build_graph, lattice_graph, besag_precision
from stlgcp.simulate import (
    SimConfig,
    SimulationError,
    sample_ar1,
    sample_besag,
    sample_besag_eigen,
    sample_dataset,
)


def test_two_node_field_is_antisymmetric():
    g = build_graph(["a", "b"], np.ones(2), [("a", "b")])
    rng = np.random.default_rng(0)
    for _ in range(20):
        w = sample_besag(g, 1.0, rng)
        assert w[0] == pytest.approx(-w[1], abs=1e-9)


def test_besag_conditional_mean_regression_slope():
    # E[W_i | rest] = neighbor average: by the Markov property the regression of
    # W_i on its neighbors (its Markov blanket) has weights 1/|nb| summing to 1.
    # Uses the unconstrained ridge-proper draw, whose conditionals are exactly
    # the intrinsic ones up to the tiny ridge.
    g = lattice_graph(5, 5)
    rng = np.random.default_rng(1)
    draws = np.array([sample_besag(g, 1.0, rng, constrain=False, ridge=1e-3)
                      for _ in range(10000)])
    i = 12   # interior node, 4 neighbors
    nb = [7, 11, 13, 17]
    X = np.column_stack([np.ones(draws.shape[0]), draws[:, nb]])
    coef, *_ = np.linalg.lstsq(X, draws[:, i], rcond=None)
    assert coef[1:].sum() == pytest.approx(1.0, abs=0.05)
    assert np.allclose(coef[1:], 0.25, atol=0.05)
    resid = draws[:, i] - X @ coef
    assert resid.var() == pytest.approx(0.25, rel=0.06)   # 1/(|nb| tau)


def test_tau_scaling_halves_sd():
    g = lattice_graph(5, 5)
    rng = np.random.default_rng(2)
    sd1 = np.array([sample_besag(g, 1.0, rng).std() for _ in range(3000)]).mean()
    sd4 = np.array([sample_besag(g, 4.0, rng).std() for _ in range(3000)]).mean()
    assert sd4 / sd1 == pytest.approx(0.5, abs=0.02)


def test_ridge_route_covariance_matches_eigen_pseudoinverse():
    g = lattice_graph(5, 4)   # n = 20 <= 50
    tau = 1.7
    n = g.n_units
    Q = besag_precision(g, tau).toarray()
    # ridge + kriging projector, exactly as the sampler applies it
    Qr = Q + 1e-8 * np.eye(n)
    L = np.linalg.cholesky(Qr)
    C = np.ones((1, n))
    Sigma = solve_triangular(L.T, solve_triangular(L, np.eye(n), lower=True), lower=False)
    W = Sigma @ C.T
    P = np.eye(n) - W @ np.linalg.solve(C @ W, C)
    cov_ridge = P @ Sigma @ P.T
    # eigen route: pseudo-inverse over the non-null eigenspace
    w, V = np.linalg.eigh(Q)
    keep = w > 1e-10 * w.max()
    cov_eigen = (V[:, keep] / w[keep]) @ V[:, keep].T
    assert np.allclose(cov_ridge, cov_eigen, atol=1e-6)


def test_besag_eigen_and_ridge_samples_agree_in_distribution():
    g = lattice_graph(4, 3)
    rng = np.random.default_rng(3)
    a = np.array([sample_besag(g, 1.0, rng) for _ in range(4000)])
    b = np.array([sample_besag_eigen(g, 1.0, rng) for _ in range(4000)])
    assert np.allclose(a.var(axis=0), b.var(axis=0), rtol=0.15)


def test_ar1_iid_at_beta_zero():
    rng = np.random.default_rng(4)
    draws = np.array([sample_ar1(6, 1.0, 0.0, rng) for _ in range(10000)])
    lag1 = np.corrcoef(draws[:, :-1].ravel(), draws[:, 1:].ravel())[0, 1]
    assert abs(lag1) < 0.03


def test_ar1_stationary_variance():
    tau, beta = 2.0, 0.7
    rng = np.random.default_rng(5)
    draws = np.array([sample_ar1(5, tau, beta, rng) for _ in range(20000)])
    target = 1.0 / (tau * (1.0 - beta * beta))
    ratios = draws.var(axis=0, ddof=1) / target
    assert np.all(np.abs(ratios - 1.0) < 0.05)


def test_ar1_lag1_autocorrelation():
    rng = np.random.default_rng(6)
    draws = np.array([sample_ar1(6, 1.0, 0.9, rng) for _ in range(10000)])
    lag1 = np.corrcoef(draws[:, :-1].ravel(), draws[:, 1:].ravel())[0, 1]
    assert lag1 == pytest.approx(0.9, abs=0.03)


def test_counts_poisson_at_null_effects():
    # 10^4 cells at fixed eta: sample mean within 3 standard errors of e^beta0
    # and mean-variance equality of the Poisson margins within 5%
    cfg = SimConfig(family="mod1", n_periods=4, n_covariates=0, beta0=0.7,
                    width=50, height=50, seed=7)
    data, truth = sample_dataset(cfg)
    lam = math.exp(0.7)
    mean = data.counts.mean()
    se = math.sqrt(lam / data.counts.size)
    assert abs(mean - lam) < 3 * se
    assert data.counts.var() == pytest.approx(mean, rel=0.05)


def test_fixed_seed_bitwise_identical():
    cfg = SimConfig(family="mod5", n_periods=3, n_covariates=2, beta0=0.2,
                    tau_innovation=1.0, ar_coef=0.4, width=4, height=4, seed=8)
    d1, t1 = sample_dataset(cfg)
    d2, t2 = sample_dataset(cfg)
    assert np.array_equal(d1.counts, d2.counts)
    assert np.array_equal(d1.covariates, d2.covariates)
    assert np.array_equal(t1.field, t2.field)


def test_mod5_beta_zero_matches_mod3_distribution():
    totals3, totals5 = [], []
    for rep in range(120):
        d3, _ = sample_dataset(SimConfig(family="mod3", n_periods=2, n_covariates=0,
                                         beta0=0.3, tau_spatial=1.5, width=4, height=4,
                                         seed=1000 + rep))
        d5, _ = sample_dataset(SimConfig(family="mod5", n_periods=2, n_covariates=0,
                                         beta0=0.3, tau_innovation=1.5, ar_coef=0.0,
                                         width=4, height=4, seed=5000 + rep))
        totals3.append(d3.counts.sum())
        totals5.append(d5.counts.sum())
    assert ks_2samp(totals3, totals5).pvalue > 0.01


def test_eta_clamp_rejects_explosive_settings():
    with pytest.raises(SimulationError, match="exceeds clamp"):
        sample_dataset(SimConfig(family="mod1", n_periods=1, n_covariates=0,
                                 beta0=40.0, width=2, height=2, seed=9))


def test_mod5_field_satisfies_per_period_constraints():
    cfg = SimConfig(family="mod5", n_periods=3, n_covariates=0, beta0=0.0,
                    tau_innovation=1.0, ar_coef=0.6, width=4, height=3, seed=10)
    _, truth = sample_dataset(cfg)
    sums = truth.field.sum(axis=0)
    assert np.max(np.abs(sums)) < 1e-8


def test_time_intercepts_centered():
    cfg = SimConfig(family="mod2", n_periods=3, n_covariates=1, beta0=0.1,
                    time_intercepts=(1.0, 2.0, 3.0), width=3, height=2, seed=11)
    _, truth = sample_dataset(cfg)
    assert truth.time_intercepts.sum() == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(truth.time_intercepts, [-1.0, 0.0, 1.0])
