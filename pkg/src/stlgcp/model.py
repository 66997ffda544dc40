"""Latent layouts, prior precision matrices and hyperparameter priors for mod1-mod5."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .dataset import PanelDataset
from .graph import SlopeUnitGraph, besag_precision

__all__ = [
    "ModelFamily",
    "ModelSpec",
    "LatentLayout",
    "HyperState",
    "build_layout",
    "prior_precision",
    "ar1_precision",
    "log_hyper_prior",
    "stationary_variance_ar1",
    "pc_prec_rate",
    "pc_prec_logpdf",
    "pc_cor_rate",
    "pc_cor_logpdf",
    "hyper_names",
    "hyper_from_vector",
    "hyper_to_vector",
    "default_hyper",
    "implied_marginal_variance",
]


class ModelFamily(enum.Enum):
    MOD1 = "mod1"   # fixed effects only
    MOD2 = "mod2"   # + per-period intercepts
    MOD3 = "mod3"   # + replicated intrinsic spatial field
    MOD4 = "mod4"   # + per-unit AR1 temporal field
    MOD5 = "mod5"   # + separable AR1 x spatial field

    @classmethod
    def parse(cls, name) -> "ModelFamily":
        if isinstance(name, cls):
            return name
        return cls(str(name).lower())


# Block kinds of the latent vector, in layout order.
GLOBAL_INTERCEPT = "global_intercept"
COVARIATE_COEFS = "covariate_coefs"
TIME_INTERCEPTS = "time_intercepts"
SPATIAL_FIELD_REPLICATED = "spatial_field_replicated"
TEMPORAL_FIELD_REPLICATED = "temporal_field_replicated"
SPACETIME_FIELD = "spacetime_field"

_INTRINSIC_KINDS = {SPATIAL_FIELD_REPLICATED, SPACETIME_FIELD}


@dataclass(frozen=True)
class ModelSpec:
    """Family choice plus prior settings.

    pc_sd_rate is the exponential rate on random-effect standard
    deviations (default ln 2, i.e. P(sd > 1) = 0.5); (pc_cor_u,
    pc_cor_alpha) calibrate the AR1-coefficient prior through
    P(|beta| > u) = alpha. fix_ar_coef pins the AR1 coefficient instead
    of estimating it. allow_isolated maps degree-0 units to independent
    Normal(0, 1/tau) effects rather than rejecting them.
    """

    family: ModelFamily = ModelFamily.MOD1
    fixed_prior_sd: float = 1.0
    pc_sd_rate: float = math.log(2.0)
    pc_cor_u: float = 0.5
    pc_cor_alpha: float = 0.5
    fixed_time_intercept_sd: float = 1.0   # used by mod4/mod5 (see hyper_names)
    fix_ar_coef: float | None = None
    allow_isolated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "family", ModelFamily.parse(self.family))
        if not self.fixed_prior_sd > 0:
            raise ValueError("fixed_prior_sd must be positive")
        if not self.pc_sd_rate > 0:
            raise ValueError("pc_sd_rate must be positive")
        if not 0.0 < self.pc_cor_u < 1.0 or not 0.0 < self.pc_cor_alpha < 1.0:
            raise ValueError("AR1 prior calibration pair must satisfy 0<u<1, 0<alpha<1")
        if self.fix_ar_coef is not None and not -1.0 < self.fix_ar_coef < 1.0:
            raise ValueError("fix_ar_coef must lie in (-1, 1)")


@dataclass(frozen=True)
class Block:
    name: str
    kind: str
    offset: int
    length: int

    @property
    def slice(self) -> slice:
        return slice(self.offset, self.offset + self.length)


@dataclass(frozen=True)
class LatentLayout:
    """Ordered latent blocks plus sum-to-zero constraint rows.

    Field blocks are stored period-major: entry (unit i, period j) sits
    at field_offset + j*n + i. Constraint rows are encoded in a sparse
    (k, total_dim) matrix with zero right-hand side.
    """

    family: ModelFamily
    blocks: tuple[Block, ...]
    n_units: int
    n_periods: int
    n_covariates: int
    constraints: sp.csr_matrix
    isolated_units: tuple[int, ...] = ()

    @property
    def total_dim(self) -> int:
        return sum(b.length for b in self.blocks)

    @property
    def n_constraints(self) -> int:
        return self.constraints.shape[0]

    def block(self, kind: str) -> Block | None:
        for b in self.blocks:
            if b.kind == kind:
                return b
        return None

    def field_block(self) -> Block | None:
        for b in self.blocks:
            if b.kind in (SPATIAL_FIELD_REPLICATED, TEMPORAL_FIELD_REPLICATED, SPACETIME_FIELD):
                return b
        return None

    def has_intrinsic_field(self) -> bool:
        fb = self.field_block()
        return fb is not None and fb.kind in _INTRINSIC_KINDS

    def field_index(self, unit: int, period: int) -> int:
        fb = self.field_block()
        if fb is None:
            raise ValueError(f"{self.family} has no latent field")
        return fb.offset + period * self.n_units + unit

    def latent_names(self) -> list[str]:
        names = []
        for b in self.blocks:
            if b.kind == GLOBAL_INTERCEPT:
                names.append("beta0")
            elif b.kind == COVARIATE_COEFS:
                names += [f"beta[{k}]" for k in range(b.length)]
            elif b.kind == TIME_INTERCEPTS:
                names += [f"beta_t[{j}]" for j in range(b.length)]
            else:
                n = self.n_units
                names += [f"w[{idx % n},{idx // n}]" for idx in range(b.length)]
        return names


@dataclass(frozen=True)
class HyperState:
    """Hyperparameter point on transformed scales (log precisions, atanh AR1)."""

    family: ModelFamily
    log_tau_time: float | None = None
    log_tau_spatial: float | None = None
    log_tau_temporal: float | None = None
    log_tau_innovation: float | None = None
    arctanh_beta: float | None = None

    @property
    def tau_time(self) -> float:
        return math.exp(self.log_tau_time)

    @property
    def tau_spatial(self) -> float:
        return math.exp(self.log_tau_spatial)

    @property
    def tau_temporal(self) -> float:
        return math.exp(self.log_tau_temporal)

    @property
    def tau_innovation(self) -> float:
        return math.exp(self.log_tau_innovation)

    @property
    def ar_coef(self) -> float:
        return math.tanh(self.arctanh_beta)


_HYPER_FIELDS = {
    ModelFamily.MOD1: (),
    ModelFamily.MOD2: ("log_tau_time",),
    ModelFamily.MOD3: ("log_tau_time", "log_tau_spatial"),
    ModelFamily.MOD4: ("log_tau_temporal", "arctanh_beta"),
    ModelFamily.MOD5: ("log_tau_innovation", "arctanh_beta"),
}


def hyper_names(spec: ModelSpec) -> tuple[str, ...]:
    """Free hyperparameter names, canonical order.

    mod2 explores the time-intercept precision; mod3 adds the spatial
    precision. mod4/mod5 explore (innovation precision, AR1 coefficient)
    and keep the time-intercept prior sd fixed at
    spec.fixed_time_intercept_sd so the grid stays at most 2-d.
    """
    names = _HYPER_FIELDS[spec.family]
    if spec.fix_ar_coef is not None:
        names = tuple(n for n in names if n != "arctanh_beta")
    return names


def hyper_from_vector(spec: ModelSpec, vec) -> HyperState:
    names = hyper_names(spec)
    vec = np.asarray(vec, dtype=float).ravel()
    if vec.shape != (len(names),):
        raise ValueError(f"expected {len(names)} hyperparameters for {spec.family}, got {vec.shape}")
    kw = dict(zip(names, (float(v) for v in vec)))
    if spec.fix_ar_coef is not None and "arctanh_beta" in _HYPER_FIELDS[spec.family]:
        kw["arctanh_beta"] = math.atanh(spec.fix_ar_coef)
    return HyperState(spec.family, **kw)


def hyper_to_vector(spec: ModelSpec, theta: HyperState) -> np.ndarray:
    return np.array([getattr(theta, n) for n in hyper_names(spec)], dtype=float)


def default_hyper(spec: ModelSpec) -> HyperState:
    """Starting point for optimization: unit precisions, mild positive AR1."""
    kw = {}
    for n in _HYPER_FIELDS[spec.family]:
        kw[n] = 0.0 if n != "arctanh_beta" else math.atanh(0.25)
    if spec.fix_ar_coef is not None and "arctanh_beta" in kw:
        kw["arctanh_beta"] = math.atanh(spec.fix_ar_coef)
    return HyperState(spec.family, **kw)


# ---------------------------------------------------------------------------
# Layout
# ---------------------------------------------------------------------------

def build_layout(spec: ModelSpec, data: PanelDataset) -> LatentLayout:
    """Latent block layout and sum-to-zero constraints for the family.

    Constraints: one row over the T time intercepts (mod2+); one row per
    (period, graph component) over the replicate of an intrinsic field
    (mod3/mod5, components of size >= 2). mod4 has no field constraints.
    """
    fam = spec.family
    n, T, p = data.n_units, data.n_periods, data.n_covariates
    g = data.graph
    blocks = [Block("intercept", GLOBAL_INTERCEPT, 0, 1),
              Block("coefs", COVARIATE_COEFS, 1, p)]
    dim = 1 + p
    if fam is not ModelFamily.MOD1:
        blocks.append(Block("time_intercepts", TIME_INTERCEPTS, dim, T))
        dim += T
    field_kind = {ModelFamily.MOD3: SPATIAL_FIELD_REPLICATED,
                  ModelFamily.MOD4: TEMPORAL_FIELD_REPLICATED,
                  ModelFamily.MOD5: SPACETIME_FIELD}.get(fam)
    isolated = tuple(int(i) for i in np.flatnonzero(g.degrees == 0))
    if field_kind is not None:
        if field_kind in _INTRINSIC_KINDS and isolated and not spec.allow_isolated:
            raise ValueError(
                f"{fam.value} with isolated units {isolated[:5]}... requires allow_isolated"
            )
        blocks.append(Block("field", field_kind, dim, n * T))
        dim += n * T

    rows, cols, vals = [], [], []
    k = 0
    tb = next((b for b in blocks if b.kind == TIME_INTERCEPTS), None)
    if tb is not None:
        rows += [k] * T
        cols += list(range(tb.offset, tb.offset + T))
        vals += [1.0] * T
        k += 1
    if field_kind in _INTRINSIC_KINDS:
        fb = blocks[-1]
        comp = g.components
        for c in range(g.n_components):
            members = np.flatnonzero(comp == c)
            if members.size < 2:
                continue  # isolated units carry a proper prior instead
            for j in range(T):
                rows += [k] * members.size
                cols += list(fb.offset + j * n + members)
                vals += [1.0] * members.size
                k += 1
    C = sp.csr_matrix((vals, (rows, cols)), shape=(k, dim))
    return LatentLayout(fam, tuple(blocks), n, T, p, C, isolated)


# ---------------------------------------------------------------------------
# Precision matrices
# ---------------------------------------------------------------------------

def ar1_precision(T: int, tau: float, beta: float) -> sp.csr_matrix:
    """Joint precision of a stationary AR1 path of length T.

    Tridiagonal: diagonal tau*(1, 1+beta^2, ..., 1+beta^2, 1), off
    diagonal -tau*beta. Its inverse is the stationary covariance
    beta^|i-j| / (tau*(1-beta^2)).
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    if not -1.0 < beta < 1.0:
        raise ValueError("beta must lie in (-1, 1)")
    if T == 1:
        return sp.csr_matrix(np.array([[tau * (1.0 - beta**2)]]))
    d = np.full(T, 1.0 + beta**2)
    d[0] = d[-1] = 1.0
    off = np.full(T - 1, -beta)
    return (tau * sp.diags([off, d, off], [-1, 0, 1])).tocsr()


def stationary_variance_ar1(tau: float, beta: float) -> float:
    """Marginal variance 1/(tau*(1-beta^2)) of the stationary AR1."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    if not -1.0 < beta < 1.0:
        raise ValueError("beta must lie in (-1, 1)")
    return 1.0 / (tau * (1.0 - beta**2))


def _time_tau(spec: ModelSpec, theta: HyperState) -> float:
    if spec.family in (ModelFamily.MOD2, ModelFamily.MOD3):
        return theta.tau_time
    return 1.0 / spec.fixed_time_intercept_sd**2


def prior_precision(layout: LatentLayout, spec: ModelSpec, theta: HyperState,
                    g: SlopeUnitGraph) -> sp.csr_matrix:
    """Block-diagonal prior precision of the latent vector at theta.

    Intrinsic field blocks (mod3/mod5) are returned exactly, i.e. rank
    deficient; inference adds its own tiny ridge before factorizing.
    Isolated units under allow_isolated get an independent tau on the
    diagonal in place of the undefined conditional.
    """
    fam = layout.family
    parts = [sp.identity(1 + layout.n_covariates, format="csr") / spec.fixed_prior_sd**2]
    if fam is not ModelFamily.MOD1:
        parts.append(_time_tau(spec, theta) * sp.identity(layout.n_periods, format="csr"))
    if fam is ModelFamily.MOD3:
        Qs = besag_precision(g, theta.tau_spatial)
        Qs = _patch_isolated(Qs, layout, theta.tau_spatial)
        parts.append(sp.kron(sp.identity(layout.n_periods), Qs, format="csr"))
    elif fam is ModelFamily.MOD4:
        A = ar1_precision(layout.n_periods, theta.tau_temporal, theta.ar_coef)
        parts.append(sp.kron(A, sp.identity(layout.n_units), format="csr"))
    elif fam is ModelFamily.MOD5:
        A = ar1_precision(layout.n_periods, 1.0, theta.ar_coef)
        Qe = besag_precision(g, theta.tau_innovation)
        Qe = _patch_isolated(Qe, layout, theta.tau_innovation)
        parts.append(sp.kron(A, Qe, format="csr"))
    return sp.block_diag(parts, format="csr")


def _patch_isolated(Q: sp.csr_matrix, layout: LatentLayout, tau: float) -> sp.csr_matrix:
    if not layout.isolated_units:
        return Q
    Q = Q.tolil()
    for i in layout.isolated_units:
        Q[i, i] = tau
    return Q.tocsr()


def implied_marginal_variance(g: SlopeUnitGraph, tau: float, eps: float = 1e-8) -> float:
    """Average marginal variance of the constrained intrinsic field at tau.

    Diagnostic only (the conditional tau is the sampled parameter): mean
    of the diagonal of the generalized inverse of the Besag precision,
    restricted to the per-component sum-to-zero subspace.
    """
    Q = besag_precision(g, tau).toarray()
    w, V = np.linalg.eigh(Q)
    keep = w > max(eps, w.max() * 1e-12)
    diag = ((V[:, keep] ** 2) / w[keep]).sum(axis=1)
    live = g.degrees > 0
    return float(diag[live].mean()) if live.any() else float("nan")


# ---------------------------------------------------------------------------
# Hyperparameter priors (penalized-complexity construction)
# ---------------------------------------------------------------------------

def pc_prec_rate(u: float = 1.0, alpha: float = 0.5) -> float:
    """Exponential rate on the sd scale with P(sd > u) = alpha."""
    if not (u > 0 and 0 < alpha < 1):
        raise ValueError("need u > 0 and 0 < alpha < 1")
    return -math.log(alpha) / u


def pc_prec_logpdf(log_tau: float, rate: float) -> float:
    """Log density of the sd-exponential prior on the log-precision scale.

    sd = exp(-log_tau / 2) is exponential(rate); the Jacobian |d sd / d
    log_tau| = sd/2 moves the density to log_tau.
    """
    sd = math.exp(-0.5 * log_tau)
    return math.log(rate) - rate * sd + math.log(0.5 * sd)


def pc_cor_rate(u: float, alpha: float) -> float:
    """Rate of the AR1-coefficient prior solving P(|beta| > u) = alpha.

    Distance from the independence base model: d(beta) =
    sqrt(-log(1 - beta^2)); the tail identity P(|beta| > u) =
    exp(-rate * d(u)) inverts in closed form.
    """
    d_u = math.sqrt(-math.log1p(-u * u))
    return -math.log(alpha) / d_u


def pc_cor_logpdf(beta: float, rate: float) -> float:
    """Symmetric PC log density of the AR1 coefficient on (-1, 1)."""
    if not -1.0 < beta < 1.0:
        return -math.inf
    b2 = beta * beta
    if b2 < 1e-12:
        # d(beta) ~ |beta|, d'(beta) ~ sign(beta); finite at the base model
        return math.log(0.5 * rate) - rate * abs(beta)
    d = math.sqrt(-math.log1p(-b2))
    dprime = abs(beta) / ((1.0 - b2) * d)
    return math.log(0.5 * rate) - rate * d + math.log(dprime)


def log_hyper_prior(spec: ModelSpec, theta: HyperState) -> float:
    """Joint log prior of the free hyperparameters on their transformed scales.

    Precision-type parameters carry the sd-exponential prior with rate
    spec.pc_sd_rate. For mod4/mod5 the sd prior is placed on the
    stationary sd 1/sqrt(tau*(1-beta^2)) and the AR1 coefficient carries
    the PC prior calibrated by (pc_cor_u, pc_cor_alpha); the triangular
    Jacobian to (log tau, atanh beta) is included.
    """
    fam = spec.family
    lam = spec.pc_sd_rate
    if fam is ModelFamily.MOD1:
        return 0.0
    if fam is ModelFamily.MOD2:
        return pc_prec_logpdf(theta.log_tau_time, lam)
    if fam is ModelFamily.MOD3:
        return pc_prec_logpdf(theta.log_tau_time, lam) + pc_prec_logpdf(theta.log_tau_spatial, lam)
    log_tau = theta.log_tau_temporal if fam is ModelFamily.MOD4 else theta.log_tau_innovation
    beta = theta.ar_coef
    # log of the stationary precision kappa = tau * (1 - beta^2)
    log_kappa = log_tau + math.log1p(-beta * beta)
    out = pc_prec_logpdf(log_kappa, lam)   # already includes d sd / d log_kappa; d log_kappa / d log_tau = 1
    if spec.fix_ar_coef is None:
        rate_c = pc_cor_rate(spec.pc_cor_u, spec.pc_cor_alpha)
        out += pc_cor_logpdf(beta, rate_c) + math.log1p(-beta * beta)  # d beta / d atanh(beta)
    return out
