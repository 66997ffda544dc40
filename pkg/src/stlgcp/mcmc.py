"""Ground-truth samplers for validating the Laplace engine at desk scale.

Metropolis-within-Gibbs over (latent field, hyperparameters) with
single-site random-walk updates projected onto the sum-to-zero blocks,
plus dense trapezoid quadrature for toys of dimension <= 3.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .dataset import PanelDataset
from .laplace import design_matrix, ridged_prior
from .model import (
    LatentLayout,
    ModelFamily,
    ModelSpec,
    default_hyper,
    hyper_names,
    hyper_to_vector,
    pc_cor_rate,
)
from .graph import besag_precision

__all__ = [
    "ChainConfig",
    "ChainResult",
    "run_chain",
    "quadrature_posterior",
    "effective_sample_size",
    "dump_samples",
    "kernel_inputs",
]

DIM_CAP = 500


@dataclass(frozen=True)
class ChainConfig:
    """Chain length, thinning, per-block proposal scales and the seed."""

    n_iter: int = 20000
    burn_in: int = 5000
    thin: int = 1
    proposal_sds: dict[str, float] = field(default_factory=dict)
    seed: int = 0
    adapt_interval: int = 50
    target_rate: float = 0.44
    dim_cap: int = DIM_CAP

    def __post_init__(self):
        if not 0 <= self.burn_in < self.n_iter:
            raise ValueError("need 0 <= burn_in < n_iter")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        for k, v in self.proposal_sds.items():
            if not v > 0:
                raise ValueError(f"proposal sd for {k!r} must be positive")


@dataclass
class ChainResult:
    samples: np.ndarray            # (n_keep, dim + n_hyper)
    names: list[str]
    acceptance_latent: np.ndarray
    acceptance_hyper: np.ndarray
    adapted_sd_latent: np.ndarray
    adapted_sd_hyper: np.ndarray
    n_latent: int

    def column(self, name: str) -> np.ndarray:
        return self.samples[:, self.names.index(name)]

    def mean(self, name: str) -> float:
        return float(self.column(name).mean())

    def sd(self, name: str) -> float:
        return float(self.column(name).std(ddof=1))

    def ess(self, name: str) -> float:
        return effective_sample_size(self.column(name))


def _ar1_basis(T: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """A_T(beta) = K1 + beta^2 K2 + beta K3 (stationary AR1, unit innovation precision)."""
    if T == 1:
        return np.array([[1.0]]), np.array([[-1.0]]), np.array([[0.0]])
    K1 = np.eye(T)
    K2 = np.zeros((T, T))
    for j in range(1, T - 1):
        K2[j, j] = 1.0
    K3 = np.zeros((T, T))
    for j in range(T - 1):
        K3[j, j + 1] = K3[j + 1, j] = -1.0
    return K1, K2, K3


def precision_terms(layout: LatentLayout, spec: ModelSpec, data: PanelDataset,
                    ridge: float = 1e-8) -> np.ndarray:
    """Dense basis matrices with Q(theta) = sum_m coef_m(theta) * terms[m].

    Term 0 collects everything theta-independent (fixed-effect precision,
    the fixed time-intercept precision of mod4/mod5, and the intrinsic
    ridge); coefficient order matches _kernels.fill_coefs.
    """
    fam = layout.family
    dim = layout.total_dim
    n, T = layout.n_units, layout.n_periods
    base = np.zeros((dim, dim))
    nf = 1 + layout.n_covariates
    base[np.arange(nf), np.arange(nf)] = 1.0 / spec.fixed_prior_sd**2
    tb = layout.block("time_intercepts")
    fb = layout.field_block()
    terms = [base]
    if fam in (ModelFamily.MOD4, ModelFamily.MOD5) and tb is not None:
        idx = np.arange(tb.offset, tb.offset + tb.length)
        base[idx, idx] = 1.0 / spec.fixed_time_intercept_sd**2
    if layout.has_intrinsic_field():
        idx = np.arange(fb.offset, fb.offset + fb.length)
        base[idx, idx] += ridge
    if fam in (ModelFamily.MOD2, ModelFamily.MOD3) and tb is not None:
        t1 = np.zeros((dim, dim))
        idx = np.arange(tb.offset, tb.offset + tb.length)
        t1[idx, idx] = 1.0
        terms.append(t1)
    if fam is ModelFamily.MOD3:
        Q1 = besag_precision(data.graph, 1.0).toarray()
        for i in layout.isolated_units:
            Q1[i, i] = 1.0
        t2 = np.zeros((dim, dim))
        t2[fb.offset:fb.offset + fb.length, fb.offset:fb.offset + fb.length] = np.kron(np.eye(T), Q1)
        terms.append(t2)
    elif fam in (ModelFamily.MOD4, ModelFamily.MOD5):
        if fam is ModelFamily.MOD4:
            B = np.eye(n)
        else:
            B = besag_precision(data.graph, 1.0).toarray()
            for i in layout.isolated_units:
                B[i, i] = 1.0
        for K in _ar1_basis(T):
            t = np.zeros((dim, dim))
            t[fb.offset:fb.offset + fb.length, fb.offset:fb.offset + fb.length] = np.kron(K, B)
            terms.append(t)
    return np.ascontiguousarray(np.stack(terms))


def kernel_inputs(layout: LatentLayout, spec: ModelSpec, data: PanelDataset,
                  cfg: ChainConfig, mask: np.ndarray | None = None):
    """Assemble the dense arrays the chain kernel consumes."""
    dim = layout.total_dim
    if dim > cfg.dim_cap:
        raise ValueError(f"model dimension {dim} exceeds chain cap {cfg.dim_cap}")
    A_sp, offsets = design_matrix(layout, data)
    A = np.ascontiguousarray(A_sp.toarray())
    y = data.counts.T.ravel().astype(float)
    mask_flat = np.ones_like(y) if mask is None else np.asarray(mask, dtype=float).T.ravel()

    terms = precision_terms(layout, spec, data)
    C = np.ascontiguousarray(layout.constraints.toarray())
    k = C.shape[0]
    group_id = np.full(dim, -1, dtype=np.int64)
    members, ptr = [], [0]
    for r in range(k):
        cols = np.flatnonzero(C[r])
        group_id[cols] = r
        members.extend(cols.tolist())
        ptr.append(len(members))
    group_ptr = np.asarray(ptr, dtype=np.int64)
    group_members = np.asarray(members, dtype=np.int64)
    SA = np.ascontiguousarray((A @ C.T).T) if k else np.zeros((1, A.shape[0]))

    sds = dict(cfg.proposal_sds)
    sd_x = np.empty(dim)
    for b in layout.blocks:
        sd_x[b.offset:b.offset + b.length] = sds.get(b.name, sds.get("latent", 0.5))
    names = hyper_names(spec)
    sd_t = np.full(len(names), sds.get("hyper", 0.5))
    theta0 = hyper_to_vector(spec, default_hyper(spec))
    fixed_ab = math.atanh(spec.fix_ar_coef) if spec.fix_ar_coef is not None else math.atanh(0.25)
    family_code = int(layout.family.value[-1])
    return dict(
        A=A, offsets=offsets, y=y, mask=mask_flat, terms=terms,
        family=family_code, fixed_atanh_beta=fixed_ab,
        lam=spec.pc_sd_rate, rate_c=pc_cor_rate(spec.pc_cor_u, spec.pc_cor_alpha),
        C=C, group_id=group_id, group_ptr=group_ptr, group_members=group_members,
        SA=SA, sd_x=sd_x, sd_t=sd_t, theta0=theta0, hyper_names=list(names),
    )


def run_chain(layout: LatentLayout, spec: ModelSpec, data: PanelDataset, cfg: ChainConfig,
              mask: np.ndarray | None = None, kernel=None) -> ChainResult:
    """Sample (latent field, hyperparameters); reproducible given cfg.seed.

    The default kernel is the numba-compiled sweep unless
    STLGCP_DISABLE_NUMBA selects the pure-Python twin; both produce
    bitwise-identical chains for the same seed.
    """
    inp = kernel_inputs(layout, spec, data, cfg, mask)
    kern = kernel if kernel is not None else _kernels.chain_kernel
    samples, acc_x, acc_t, sd_x, sd_t = kern(
        cfg.seed, cfg.n_iter, cfg.burn_in, cfg.thin,
        np.zeros(layout.total_dim), inp["theta0"], inp["A"], inp["offsets"], inp["y"], inp["mask"],
        inp["terms"], inp["family"], inp["fixed_atanh_beta"], inp["lam"], inp["rate_c"],
        inp["C"], inp["group_id"], inp["group_ptr"], inp["group_members"], inp["SA"],
        inp["sd_x"], inp["sd_t"], cfg.adapt_interval, cfg.target_rate,
    )
    names = layout.latent_names() + inp["hyper_names"]
    return ChainResult(samples, names, acc_x, acc_t, sd_x, sd_t, layout.total_dim)


def effective_sample_size(x: np.ndarray) -> float:
    """ESS by Geyer's initial positive sequence on the FFT autocovariance."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4:
        return float(n)
    xc = x - x.mean()
    if np.max(np.abs(xc)) == 0.0:
        return float(n)
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, m)
    acov = np.fft.irfft(f * np.conj(f))[:n] / n
    rho = acov / acov[0]
    tau = 1.0
    t = 1
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair < 0:
            break
        tau += 2.0 * pair
        t += 2
    return float(n / max(tau, 1e-12))


def quadrature_posterior(log_target, box):
    """Trapezoid-rule posterior on a box grid, dimension <= 3.

    box: sequence of (lo, hi, n_points) per dimension. Raises if more
    than 1e-4 of the mass sits on the outermost grid shell ("box too
    small"). Returns dict with log_evidence, mean, var, boundary_mass.
    """
    box = list(box)
    d = len(box)
    if not 1 <= d <= 3:
        raise ValueError("quadrature supports 1 to 3 dimensions")
    axes, wts = [], []
    for lo, hi, npts in box:
        if npts < 3 or not hi > lo:
            raise ValueError("each box dimension needs hi > lo and n_points >= 3")
        ax = np.linspace(lo, hi, npts)
        h = ax[1] - ax[0]
        w = np.full(npts, h)
        w[0] = w[-1] = 0.5 * h
        axes.append(ax)
        wts.append(w)

    shape = tuple(len(a) for a in axes)
    logf = np.empty(shape)
    for idx in np.ndindex(shape):
        logf[idx] = float(log_target(np.array([axes[a][idx[a]] for a in range(d)])))
    if not np.all(np.isfinite(logf) | (logf == -np.inf)):
        raise ValueError("log target returned NaN/inf on the box")

    logw = np.zeros(shape)
    for a in range(d):
        sh = [1] * d
        sh[a] = shape[a]
        logw = logw + np.log(wts[a]).reshape(sh)
    lw = logf + logw
    lmax = lw.max()
    mass = np.exp(lw - lmax)
    total = mass.sum()
    log_evidence = float(lmax + np.log(total))
    p = mass / total

    boundary = np.zeros(shape, dtype=bool)
    for a in range(d):
        sl = [slice(None)] * d
        sl[a] = 0
        boundary[tuple(sl)] = True
        sl[a] = shape[a] - 1
        boundary[tuple(sl)] = True
    boundary_mass = float(p[boundary].sum())
    if boundary_mass > 1e-4:
        raise ValueError(f"box too small: boundary mass {boundary_mass:.2e} exceeds 1e-4")

    mean = np.empty(d)
    var = np.empty(d)
    for a in range(d):
        sh = [1] * d
        sh[a] = shape[a]
        xa = axes[a].reshape(sh)
        mean[a] = float((p * xa).sum())
        var[a] = float((p * xa**2).sum() - mean[a] ** 2)
    return {"log_evidence": log_evidence, "mean": mean, "var": var,
            "boundary_mass": boundary_mass, "axes": axes}


def dump_samples(path, result: ChainResult, every: int = 1):
    """CSV dump `iter,name,value` of the kept samples."""
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "name", "value"])
        for it in range(0, result.samples.shape[0], every):
            for j, name in enumerate(result.names):
                w.writerow([it, name, format(result.samples[it, j], ".17g")])
