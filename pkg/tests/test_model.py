import math

import numpy as np
import pytest

from stlgcp.dataset import PanelDataset, standardize
from stlgcp.graph import build_graph, lattice_graph
from stlgcp.model import (
    HyperState,
    ModelFamily,
    ModelSpec,
    ar1_precision,
    build_layout,
    default_hyper,
    hyper_from_vector,
    hyper_names,
    hyper_to_vector,
    implied_marginal_variance,
    log_hyper_prior,
    pc_cor_logpdf,
    pc_cor_rate,
    pc_prec_logpdf,
    pc_prec_rate,
    prior_precision,
    stationary_variance_ar1,
)


def make_panel(n_units=None, T=3, p=2, graph=None, seed=0):
    g = graph if graph is not None else lattice_graph(3, 2)
    rng = np.random.default_rng(seed)
    if p:
        Z, _, _ = standardize(rng.normal(size=(g.n_units, p)))
    else:
        Z = np.zeros((g.n_units, 0))
    counts = rng.poisson(1.0, size=(g.n_units, T)).astype(np.int64)
    return PanelDataset(g, counts, Z, tuple(f"x{k}" for k in range(p)),
                        tuple(f"T{j+1}" for j in range(T)))


# ---------------------------------------------------------------------------
# layouts
# ---------------------------------------------------------------------------

def test_layout_mod1_dimensions():
    data = make_panel(p=29, T=6, graph=lattice_graph(5, 4))
    layout = build_layout(ModelSpec(family="mod1"), data)
    assert layout.total_dim == 30
    assert layout.n_constraints == 0


def test_layout_mod2_dimensions():
    data = make_panel(p=29, T=6, graph=lattice_graph(5, 4))
    layout = build_layout(ModelSpec(family="mod2"), data)
    assert layout.total_dim == 36
    C = layout.constraints.toarray()
    assert C.shape == (1, 36)
    tb = layout.block("time_intercepts")
    assert C[0, tb.offset:tb.offset + 6].sum() == 6 and C.sum() == 6


def test_layout_mod3_constraints_per_period_and_component():
    g = build_graph(["a", "b", "c", "d", "e"], np.ones(5),
                    [("a", "b"), ("b", "c"), ("d", "e")])  # two components
    data = make_panel(T=2, p=1, graph=g)
    layout = build_layout(ModelSpec(family="mod3"), data)
    # 1 time row + 2 periods x 2 components
    assert layout.n_constraints == 1 + 2 * 2
    fb = layout.field_block()
    C = layout.constraints.toarray()
    for r in range(1, 5):
        row = C[r, fb.offset:]
        assert set(np.flatnonzero(row) % 5) in ({0, 1, 2}, {3, 4})


def test_layout_mod4_has_only_time_constraint():
    data = make_panel(T=3, p=2)
    layout = build_layout(ModelSpec(family="mod4"), data)
    assert layout.n_constraints == 1


def test_layout_isolated_rejected_without_flag():
    g = build_graph(["a", "b", "c"], np.ones(3), [("a", "b")])
    data = make_panel(T=2, p=1, graph=g)
    with pytest.raises(ValueError, match="allow_isolated"):
        build_layout(ModelSpec(family="mod3"), data)
    layout = build_layout(ModelSpec(family="mod3", allow_isolated=True), data)
    # isolated unit excluded from sum-to-zero rows, gets a proper prior instead
    assert layout.n_constraints == 1 + 2 * 1
    theta = default_hyper(ModelSpec(family="mod3"))
    Q = prior_precision(layout, ModelSpec(family="mod3", allow_isolated=True), theta, g).toarray()
    fb = layout.field_block()
    i_iso = 2
    assert Q[fb.offset + i_iso, fb.offset + i_iso] == pytest.approx(theta.tau_spatial)


# ---------------------------------------------------------------------------
# precisions
# ---------------------------------------------------------------------------

def test_ar1_block_identity_at_beta_zero():
    data = make_panel(T=3, p=1)
    spec = ModelSpec(family="mod4")
    layout = build_layout(spec, data)
    theta = hyper_from_vector(spec, [0.0, math.atanh(1e-12)])
    Q = prior_precision(layout, spec, theta, data.graph).toarray()
    fb = layout.field_block()
    n = layout.n_units
    block = Q[fb.offset:fb.offset + 3 * n, fb.offset:fb.offset + 3 * n]
    assert np.allclose(block, np.eye(3 * n), atol=1e-10)


def test_ar1_joint_precision_T2():
    # brute force: invert the stationary covariance beta^|i-j|/(tau(1-beta^2))
    tau, beta = 2.0, 0.5
    S = np.array([[1.0, beta], [beta, 1.0]]) / (tau * (1.0 - beta**2))
    expected = np.linalg.inv(S)
    assert np.allclose(expected, [[2.0, -1.0], [-1.0, 2.0]])
    assert np.allclose(ar1_precision(2, tau, beta).toarray(), expected)


@pytest.mark.parametrize("T", [1, 2, 3, 4, 5])
def test_ar1_precision_times_stationary_covariance(T):
    tau, beta = 1.7, -0.6
    Q = ar1_precision(T, tau, beta).toarray()
    S = np.array([[beta ** abs(i - j) for j in range(T)] for i in range(T)])
    S /= tau * (1.0 - beta**2)
    assert np.allclose(Q @ S, np.eye(T), atol=1e-10)


def test_mod5_beta_zero_equals_mod3_precision():
    data = make_panel(T=3, p=2)
    spec3 = ModelSpec(family="mod3")
    spec5 = ModelSpec(family="mod5")
    l3 = build_layout(spec3, data)
    l5 = build_layout(spec5, data)
    th3 = HyperState(ModelFamily.MOD3, log_tau_time=0.0, log_tau_spatial=math.log(2.2))
    th5 = HyperState(ModelFamily.MOD5, log_tau_innovation=math.log(2.2), arctanh_beta=0.0)
    Q3 = prior_precision(l3, spec3, th3, data.graph).toarray()
    Q5 = prior_precision(l5, spec5, th5, data.graph).toarray()
    fb3, fb5 = l3.field_block(), l5.field_block()
    assert np.array_equal(Q3[fb3.offset:, fb3.offset:], Q5[fb5.offset:, fb5.offset:])


def test_prior_precision_symmetry_and_rank():
    data = make_panel(T=2, p=1)
    spec = ModelSpec(family="mod3")
    layout = build_layout(spec, data)
    theta = default_hyper(spec)
    Q = prior_precision(layout, spec, theta, data.graph).toarray()
    assert np.allclose(Q, Q.T)
    w = np.linalg.eigvalsh(Q)
    n_null = int(np.sum(np.abs(w) < 1e-9 * np.abs(w).max()))
    # the intrinsic replicates are rank-deficient by one per (period, component);
    # the time intercepts stay full rank (their sum-to-zero is a soft identifiability choice)
    assert n_null == 2


def test_stationary_variance_values():
    assert stationary_variance_ar1(4.0, 0.5) == pytest.approx(1.0 / 3.0)
    assert stationary_variance_ar1(2.0, 0.0) == pytest.approx(0.5)
    assert stationary_variance_ar1(1.0, 0.99) == pytest.approx(1.0 / (1.0 - 0.9801))


def test_implied_marginal_variance_scales_inverse_tau():
    g = lattice_graph(4, 4)
    v1 = implied_marginal_variance(g, 1.0)
    v4 = implied_marginal_variance(g, 4.0)
    assert v4 == pytest.approx(v1 / 4.0, rel=1e-6)


# ---------------------------------------------------------------------------
# hyper priors
# ---------------------------------------------------------------------------

def test_pc_rate_default_is_log2():
    assert pc_prec_rate(1.0, 0.5) == pytest.approx(math.log(2.0))
    # tail identity: P(sd > 2) = exp(-2 ln 2) = 0.25
    assert math.exp(-2.0 * pc_prec_rate(1.0, 0.5)) == pytest.approx(0.25)


def test_pc_prec_logpdf_is_normalized():
    lam = math.log(2.0)
    grid = np.linspace(-40.0, 60.0, 100001)
    dens = np.exp([pc_prec_logpdf(t, lam) for t in grid])
    assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-6)


def test_pc_cor_rate_frozen_value():
    # d(0.5) = sqrt(-ln 0.75); rate = ln 2 / d(0.5)
    assert pc_cor_rate(0.5, 0.5) == pytest.approx(1.292317012883448, rel=1e-12)


def test_pc_cor_density_mass_matches_tail_identity():
    # the density is unbounded at +-1, so compare restricted masses with the
    # exact survival identity P(|beta| > b) = exp(-rate * d(b))
    rate = pc_cor_rate(0.5, 0.5)
    for b, npts in [(0.5, 100001), (0.95, 200001)]:
        grid = np.linspace(-b, b, npts)
        dens = np.exp([pc_cor_logpdf(v, rate) for v in grid])
        expect = 1.0 - math.exp(-rate * math.sqrt(-math.log1p(-b * b)))
        assert np.trapezoid(dens, grid) == pytest.approx(expect, abs=2e-4)


def test_beta_prior_symmetric():
    rate = pc_cor_rate(0.5, 0.5)
    for b in [0.1, 0.35, 0.8, 0.999]:
        assert pc_cor_logpdf(b, rate) == pytest.approx(pc_cor_logpdf(-b, rate), rel=1e-14)
    spec = ModelSpec(family="mod4")
    a = 0.73
    lp_pos = log_hyper_prior(spec, hyper_from_vector(spec, [0.3, a]))
    lp_neg = log_hyper_prior(spec, hyper_from_vector(spec, [0.3, -a]))
    assert lp_pos == pytest.approx(lp_neg, rel=1e-13)


def test_mod45_prior_marginalizes_to_beta_prior():
    # integrating the joint (log tau, atanh beta) density over log tau at fixed
    # atanh beta must recover the AR1-coefficient prior with its Jacobian:
    # the stationary-sd factor integrates to one for every beta
    spec = ModelSpec(family="mod4")
    rate = pc_cor_rate(0.5, 0.5)
    t_grid = np.linspace(-60.0, 80.0, 20001)
    for a in [0.0, 0.5, -1.2, 2.0]:
        dens = np.array([math.exp(log_hyper_prior(spec, hyper_from_vector(spec, [t, a])))
                         for t in t_grid])
        beta = math.tanh(a)
        expect = math.exp(pc_cor_logpdf(beta, rate)) * (1.0 - beta * beta)
        assert np.trapezoid(dens, t_grid) == pytest.approx(expect, rel=1e-5)


def test_hyper_names_per_family():
    assert hyper_names(ModelSpec(family="mod1")) == ()
    assert hyper_names(ModelSpec(family="mod2")) == ("log_tau_time",)
    assert hyper_names(ModelSpec(family="mod3")) == ("log_tau_time", "log_tau_spatial")
    assert hyper_names(ModelSpec(family="mod4")) == ("log_tau_temporal", "arctanh_beta")
    assert hyper_names(ModelSpec(family="mod5")) == ("log_tau_innovation", "arctanh_beta")
    assert hyper_names(ModelSpec(family="mod5", fix_ar_coef=0.0)) == ("log_tau_innovation",)


def test_hyper_vector_roundtrip():
    spec = ModelSpec(family="mod5")
    theta = hyper_from_vector(spec, [0.7, -0.3])
    assert theta.tau_innovation == pytest.approx(math.exp(0.7))
    assert theta.ar_coef == pytest.approx(math.tanh(-0.3))
    assert np.allclose(hyper_to_vector(spec, theta), [0.7, -0.3])
    fixed = ModelSpec(family="mod5", fix_ar_coef=0.4)
    th2 = hyper_from_vector(fixed, [0.7])
    assert th2.ar_coef == pytest.approx(0.4)


def test_spec_validation():
    with pytest.raises(ValueError):
        ModelSpec(fixed_prior_sd=0.0)
    with pytest.raises(ValueError):
        ModelSpec(pc_cor_u=1.5)
    with pytest.raises(ValueError):
        ModelSpec(fix_ar_coef=1.0)
