import math

import numpy as np
import pytest

from stlgcp.dataset import PanelDataset, standardize
from stlgcp.graph import build_graph, lattice_graph
from stlgcp.mcmc import (
    ChainConfig,
    ChainResult,
    dump_samples,
    effective_sample_size,
    quadrature_posterior,
    run_chain,
)
from stlgcp.model import ModelSpec, build_layout
from stlgcp.simulate import SimConfig, sample_dataset


def gaussian_prior_panel(T=2, p=2, seed=0):
    g = build_graph(["a", "b", "c"], np.ones(3), [])
    Z, _, _ = standardize(np.random.default_rng(seed).normal(size=(3, p)))
    counts = np.zeros((3, T), dtype=np.int64)
    return PanelDataset(g, counts, Z, tuple(f"x{k}" for k in range(p)),
                        tuple(f"T{j}" for j in range(T)))


def test_pure_gaussian_target_moments():
    data = gaussian_prior_panel()
    spec = ModelSpec(family="mod1")
    layout = build_layout(spec, data)
    cfg = ChainConfig(n_iter=30000, burn_in=5000, seed=7)
    res = run_chain(layout, spec, data, cfg, mask=np.zeros((3, 2), dtype=bool))
    for name in res.names:
        col = res.column(name)
        mcse = col.std(ddof=1) / math.sqrt(res.ess(name))
        assert abs(col.mean()) < 3.5 * mcse
        assert col.std(ddof=1) == pytest.approx(1.0, rel=0.05)


def test_constrained_gaussian_block_moments():
    # mod2 prior only: time intercepts are N(0, 1/tau) conditioned on sum zero,
    # whose covariance is (1/tau) * (I - 11'/T) on the constraint subspace
    data = gaussian_prior_panel(T=4, p=1, seed=1)
    spec = ModelSpec(family="mod2")
    layout = build_layout(spec, data)
    cfg = ChainConfig(n_iter=40000, burn_in=8000, seed=3)
    res = run_chain(layout, spec, data, cfg, mask=np.zeros((3, 4), dtype=bool))
    T = 4
    cols = np.column_stack([res.column(f"beta_t[{j}]") for j in range(T)])
    assert np.max(np.abs(cols.sum(axis=1))) < 1e-10          # constraint holds exactly
    tau_samples = np.exp(res.column("log_tau_time"))
    # E[var(beta_t_j)] = E[1/tau] * (1 - 1/T); compare against the sampled taus
    expected = np.mean(1.0 / tau_samples) * (1.0 - 1.0 / T)
    observed = cols.var(axis=0, ddof=1).mean()
    assert observed == pytest.approx(expected, rel=0.1)


def test_single_cell_posterior_matches_quadrature():
    g = build_graph(["only"], [1.0], [])
    data = PanelDataset(g, np.array([[5]]), np.zeros((1, 0)), (), ("T1",))
    spec = ModelSpec(family="mod1", fixed_prior_sd=10.0)
    layout = build_layout(spec, data)
    cfg = ChainConfig(n_iter=120000, burn_in=20000, seed=21)
    res = run_chain(layout, spec, data, cfg)

    def log_target(v):
        b = v[0]
        return 5.0 * b - math.exp(b) - 0.5 * b * b / 100.0 - math.lgamma(6.0)

    quad = quadrature_posterior(log_target, [(-3.0, 6.0, 2001)])
    assert res.mean("beta0") == pytest.approx(quad["mean"][0], abs=0.01)
    assert res.sd("beta0") == pytest.approx(math.sqrt(quad["var"][0]), rel=0.05)


def test_identical_seeds_bitwise_identical():
    data, _ = sample_dataset(SimConfig(family="mod4", n_periods=3, n_covariates=1,
                                       beta0=0.5, width=2, height=2, seed=5))
    spec = ModelSpec(family="mod4")
    layout = build_layout(spec, data)
    cfg = ChainConfig(n_iter=3000, burn_in=500, seed=123)
    a = run_chain(layout, spec, data, cfg)
    b = run_chain(layout, spec, data, cfg)
    assert np.array_equal(a.samples, b.samples)
    c = run_chain(layout, spec, data, ChainConfig(n_iter=3000, burn_in=500, seed=124))
    assert not np.array_equal(a.samples, c.samples)


def test_acceptance_rates_adapted_into_band():
    data, _ = sample_dataset(SimConfig(family="mod3", n_periods=2, n_covariates=2,
                                       beta0=0.8, tau_spatial=1.0, width=3, height=3, seed=6))
    spec = ModelSpec(family="mod3")
    layout = build_layout(spec, data)
    cfg = ChainConfig(n_iter=20000, burn_in=8000, seed=9)
    res = run_chain(layout, spec, data, cfg)
    assert np.all(res.acceptance_latent >= 0.2) and np.all(res.acceptance_latent <= 0.6)
    assert np.all(res.acceptance_hyper >= 0.2) and np.all(res.acceptance_hyper <= 0.6)


def test_dimension_cap_enforced():
    data, _ = sample_dataset(SimConfig(family="mod3", n_periods=6, n_covariates=1,
                                       width=10, height=10, seed=7))
    spec = ModelSpec(family="mod3")
    layout = build_layout(spec, data)
    with pytest.raises(ValueError, match="exceeds chain cap"):
        run_chain(layout, spec, data, ChainConfig(n_iter=100, burn_in=10))


def test_quadrature_standard_gaussian():
    def log_target(v):
        return -0.5 * v[0] ** 2 - 0.5 * math.log(2 * math.pi)

    quad = quadrature_posterior(log_target, [(-8.0, 8.0, 400)])
    assert abs(quad["mean"][0]) < 1e-6
    assert quad["var"][0] == pytest.approx(1.0, abs=1e-4)
    assert quad["log_evidence"] == pytest.approx(0.0, abs=1e-6)


def test_quadrature_poisson_lognormal_mode():
    def log_target(v):
        b = v[0]
        return 5.0 * b - math.exp(b) - 0.5 * b * b / 100.0

    quad = quadrature_posterior(log_target, [(-4.0, 6.0, 4001)])
    dens_argmax = quad["axes"][0][np.argmax([log_target(np.array([x])) for x in quad["axes"][0]])]
    assert dens_argmax == pytest.approx(math.log(5.0), abs=0.02)


def test_quadrature_box_too_small():
    def log_target(v):
        return -0.5 * v[0] ** 2

    with pytest.raises(ValueError, match="box too small"):
        quadrature_posterior(log_target, [(0.0, 1.0, 101)])   # cut at the mode


def test_quadrature_dim_guard():
    with pytest.raises(ValueError, match="1 to 3"):
        quadrature_posterior(lambda v: 0.0, [(-1, 1, 10)] * 4)


def test_ess_iid_close_to_n():
    x = np.random.default_rng(11).normal(size=4000)
    ess = effective_sample_size(x)
    assert 2500 < ess <= 4400


def test_ess_correlated_much_smaller():
    rng = np.random.default_rng(12)
    x = np.empty(4000)
    x[0] = 0.0
    for i in range(1, 4000):
        x[i] = 0.95 * x[i - 1] + rng.normal()
    assert effective_sample_size(x) < 500


def test_dump_samples(tmp_path):
    data = gaussian_prior_panel()
    spec = ModelSpec(family="mod1")
    layout = build_layout(spec, data)
    res = run_chain(layout, spec, data, ChainConfig(n_iter=200, burn_in=50, seed=2))
    path = tmp_path / "samples.csv"
    dump_samples(path, res, every=10)
    lines = path.read_text().splitlines()
    assert lines[0] == "iter,name,value"
    assert len(lines) > 10
