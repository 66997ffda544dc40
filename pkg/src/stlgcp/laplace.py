"""Gaussian/Laplace approximation engine with grid integration over hyperparameters.

Strategy: constrained Gaussian approximation of the latent field at fixed
hyperparameters (Newton with step halving, constraints imposed by
conditioning by kriging), a Laplace-approximated hyperparameter log
posterior, and a regular grid around its mode whose weighted points form
the posterior mixture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import minimize
from scipy.special import gammaln

from .dataset import PanelDataset
from .model import (
    HyperState,
    LatentLayout,
    ModelFamily,
    ModelSpec,
    default_hyper,
    hyper_from_vector,
    hyper_names,
    hyper_to_vector,
    log_hyper_prior,
    prior_precision,
)
from . import validate as _validate

__all__ = [
    "NumericError",
    "PoissonLikelihood",
    "GaussianLikelihood",
    "GaussianApproximation",
    "GridConfig",
    "HyperPosterior",
    "design_matrix",
    "ridged_prior",
    "find_mode",
    "log_marginal_hyper",
    "explore_hyper",
    "posterior_summaries",
]

INTRINSIC_RIDGE = 1e-8
NEWTON_TOL = 1e-6
NEWTON_MAX_ITER = 100
CONSTRAINT_TOL = 1e-8


class NumericError(RuntimeError):
    """Mode finding or factorization failed to converge."""


# ---------------------------------------------------------------------------
# Cell likelihoods (per-cell value/gradient/curvature in the linear predictor)
# ---------------------------------------------------------------------------

class PoissonLikelihood:
    """Poisson log-likelihood sum over observed cells, eta = log mean."""

    def __init__(self, counts_flat: np.ndarray, mask_flat: np.ndarray | None = None):
        self.y = np.asarray(counts_flat, dtype=float)
        self.mask = np.ones_like(self.y) if mask_flat is None else np.asarray(mask_flat, dtype=float)
        self._lgamma = gammaln(self.y + 1.0)

    def value(self, eta: np.ndarray) -> float:
        return float(np.sum(self.mask * (self.y * eta - np.exp(eta) - self._lgamma)))

    def grad(self, eta: np.ndarray) -> np.ndarray:
        return self.mask * (self.y - np.exp(eta))

    def curv(self, eta: np.ndarray) -> np.ndarray:
        """Negative second derivative per cell (positive for Poisson)."""
        return self.mask * np.exp(eta)


class GaussianLikelihood:
    """Known-variance Gaussian surrogate; makes the Laplace marginal exact."""

    def __init__(self, y_flat: np.ndarray, sigma: float, mask_flat: np.ndarray | None = None):
        self.y = np.asarray(y_flat, dtype=float)
        self.sigma = float(sigma)
        self.mask = np.ones_like(self.y) if mask_flat is None else np.asarray(mask_flat, dtype=float)

    def value(self, eta: np.ndarray) -> float:
        z = (self.y - eta) / self.sigma
        return float(np.sum(self.mask * (-0.5 * z * z - 0.5 * math.log(2.0 * math.pi) - math.log(self.sigma))))

    def grad(self, eta: np.ndarray) -> np.ndarray:
        return self.mask * (self.y - eta) / self.sigma**2

    def curv(self, eta: np.ndarray) -> np.ndarray:
        return self.mask / self.sigma**2


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

def design_matrix(layout: LatentLayout, data: PanelDataset):
    """Sparse cell-by-latent design A and the offset vector, period-major cells.

    Cell c = j*n + i carries the intercept, the covariate row of unit i,
    the period-j intercept (mod2+) and the (i, j) field entry (mod3+).
    eta = offsets + A x.
    """
    n, T, p = layout.n_units, layout.n_periods, layout.n_covariates
    ncells = n * T
    rows, cols, vals = [], [], []
    cells = np.arange(ncells)
    units = cells % n
    # intercept
    rows.append(cells)
    cols.append(np.zeros(ncells, dtype=np.int64))
    vals.append(np.ones(ncells))
    # covariates
    if p:
        Z = data.covariates
        for k in range(p):
            rows.append(cells)
            cols.append(np.full(ncells, 1 + k, dtype=np.int64))
            vals.append(Z[units, k])
    tb = layout.block("time_intercepts")
    if tb is not None:
        rows.append(cells)
        cols.append(tb.offset + cells // n)
        vals.append(np.ones(ncells))
    fb = layout.field_block()
    if fb is not None:
        rows.append(cells)
        cols.append(fb.offset + cells)
        vals.append(np.ones(ncells))
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(ncells, layout.total_dim),
    )
    offsets = np.tile(data.offsets, T)
    return A, offsets


def ridged_prior(layout: LatentLayout, spec: ModelSpec, theta: HyperState,
                 data: PanelDataset, eps: float = INTRINSIC_RIDGE) -> sp.csc_matrix:
    """Prior precision with a tiny ridge on intrinsic field blocks.

    The ridge makes the factorization well posed; the sum-to-zero
    constraints remove its influence on the conditioned model (the
    epsilon terms cancel between logdet Q and logdet C Q^-1 C').
    """
    Q = prior_precision(layout, spec, theta, data.graph).tolil()
    if layout.has_intrinsic_field():
        fb = layout.field_block()
        idx = np.arange(fb.offset, fb.offset + fb.length)
        Q[idx, idx] = Q[idx, idx].toarray().ravel() + eps
    return Q.tocsc()


class _SPDFactor:
    """Sparse LU of a symmetric positive-definite matrix with logdet.

    Uses the symmetric ordering with diagonal pivoting (valid for SPD
    input, far less fill than the default), falling back to plain splu
    if that produces a bad pivot.
    """

    def __init__(self, M: sp.spmatrix):
        M = M.tocsc()
        try:
            self._lu = spla.splu(M, permc_spec="MMD_AT_PLUS_A",
                                 options={"SymmetricMode": True},
                                 diag_pivot_thresh=0.0)
            diag = self._lu.U.diagonal()
            if np.any(diag <= 0) or np.any(~np.isfinite(diag)):
                raise RuntimeError("bad pivot")
        except RuntimeError:
            self._lu = spla.splu(M)
            diag = self._lu.U.diagonal()
            if np.any(diag == 0) or np.any(~np.isfinite(diag)):
                raise NumericError("singular precision matrix") from None
        self.logdet = float(np.sum(np.log(np.abs(diag))))

    def solve(self, b: np.ndarray) -> np.ndarray:
        return self._lu.solve(np.asarray(b, dtype=float))


def _flat(arr2d: np.ndarray) -> np.ndarray:
    """(n, T) -> (n*T,) period-major."""
    return np.asarray(arr2d).T.ravel()


def _default_likelihood(data: PanelDataset, mask: np.ndarray | None) -> PoissonLikelihood:
    mask_flat = None if mask is None else _flat(mask).astype(float)
    return PoissonLikelihood(_flat(data.counts), mask_flat)


# ---------------------------------------------------------------------------
# Mode finding
# ---------------------------------------------------------------------------

@dataclass
class GaussianApproximation:
    """Constrained Gaussian approximation of the latent posterior at fixed theta."""

    mode: np.ndarray
    precision_at_mode: sp.csc_matrix
    cholesky_logdet: float            # log|L| = 0.5 * logdet(precision)
    constraints_applied: bool
    newton_iters: int
    grad_norm_at_mode: float
    objective_trajectory: tuple[float, ...]
    eta_mode: np.ndarray
    loglik_at_mode: float
    _factor: _SPDFactor = field(repr=False, default=None)
    _C: sp.csr_matrix = field(repr=False, default=None)
    _W: np.ndarray = field(repr=False, default=None)       # P^-1 C'
    _S: np.ndarray = field(repr=False, default=None)       # C P^-1 C'

    def constraint_residual(self) -> float:
        if self._C is None or self._C.shape[0] == 0:
            return 0.0
        return float(np.max(np.abs(self._C @ self.mode)))

    def logdet_constraint_cov(self) -> float:
        """logdet(C P^-1 C'), 0 when unconstrained."""
        if self._S is None or self._S.size == 0:
            return 0.0
        sign, val = np.linalg.slogdet(self._S)
        if sign <= 0:
            raise NumericError("constraint covariance not positive definite")
        return float(val)

    def marginal_variances(self, M: sp.spmatrix, chunk: int = 128) -> np.ndarray:
        """diag(M Sigma_c M') for a sparse row map M under the constrained covariance."""
        M = M.tocsr()
        nrows = M.shape[0]
        out = np.empty(nrows)
        Mt = M.T.tocsc()
        for start in range(0, nrows, chunk):
            stop = min(start + chunk, nrows)
            B = np.asarray(Mt[:, start:stop].todense())
            V = self._factor.solve(B)
            out[start:stop] = np.einsum("ij,ij->j", B, V)
            if self._C is not None and self._C.shape[0] > 0:
                U = self._C @ V                      # (k, chunk)
                out[start:stop] -= np.einsum("ij,ij->j", U, np.linalg.solve(self._S, U))
        return out


def _tangent_gradient(grad: np.ndarray, C: sp.csr_matrix, CCt_inv: np.ndarray | None) -> np.ndarray:
    if C is None or C.shape[0] == 0:
        return grad
    return grad - C.T @ (CCt_inv @ (C @ grad))


def find_mode(layout: LatentLayout, spec: ModelSpec, theta: HyperState, data: PanelDataset,
              mask: np.ndarray | None = None, likelihood=None, x0: np.ndarray | None = None,
              max_iter: int = NEWTON_MAX_ITER, tol: float = NEWTON_TOL) -> GaussianApproximation:
    """Constrained mode of the latent posterior and its precision factorization.

    Newton steps on the unconstrained objective are projected onto
    {Cx = 0} by conditioning by kriging, with step halving so the
    constrained log posterior increases at every iteration.
    """
    lik = likelihood if likelihood is not None else _default_likelihood(data, mask)
    A, offsets = design_matrix(layout, data)
    Q = ridged_prior(layout, spec, theta, data)
    C = layout.constraints
    k = C.shape[0]
    CCt_inv = None
    if k:
        CCt_inv = np.linalg.inv(C @ C.T.toarray())

    x = np.zeros(layout.total_dim) if x0 is None else np.array(x0, dtype=float)
    if k and x0 is not None:
        # re-center a warm start onto the constraint surface
        x = x - C.T @ (CCt_inv @ (C @ x))

    def objective(xv, eta):
        return lik.value(eta) - 0.5 * float(xv @ (Q @ xv))

    eta = offsets + A @ x
    if not np.all(np.isfinite(eta)):
        raise NumericError("non-finite linear predictor at start")
    f = objective(x, eta)
    trajectory = [f]
    factor = None
    P = None
    W = S = None
    converged = False
    iters = 0
    grad_norm = math.inf

    for iters in range(1, max_iter + 1):
        g = A.T @ lik.grad(eta) - Q @ x
        gt = _tangent_gradient(g, C, CCt_inv)
        grad_norm = float(np.max(np.abs(gt)))
        scale = max(1.0, float(np.max(np.abs(x))) if x.size else 1.0)
        if grad_norm <= tol * scale:
            converged = True
            iters -= 1
            break
        D = lik.curv(eta)
        P = (Q + (A.T @ sp.diags(D) @ A)).tocsc()
        factor = _SPDFactor(P)
        step = factor.solve(g)
        if k:
            W = factor.solve(np.asarray(C.T.todense()))
            S = C @ W
            target = x + step
            step = target - W @ np.linalg.solve(S, C @ target) - x
        alpha = 1.0
        while alpha > 1e-10:
            x_new = x + alpha * step
            eta_new = offsets + A @ x_new
            if np.all(np.isfinite(eta_new)) and np.max(eta_new) < 500.0:
                f_new = objective(x_new, eta_new)
                if f_new > f - 1e-12 * max(1.0, abs(f)):
                    break
            alpha *= 0.5
        else:
            if grad_norm <= 100 * tol * scale:
                converged = True
                iters -= 1
                break
            raise NumericError(
                f"line search failed at iteration {iters}; trajectory={trajectory[-5:]}"
            )
        x, eta, f = x_new, eta_new, f_new
        trajectory.append(f)
    if not converged:
        raise NumericError(
            f"Newton did not converge in {max_iter} iterations "
            f"(grad_norm={grad_norm:.3g}); trajectory tail={trajectory[-5:]}"
        )

    D = lik.curv(eta)
    P = (Q + (A.T @ sp.diags(D) @ A)).tocsc()
    factor = _SPDFactor(P)
    if k:
        W = factor.solve(np.asarray(C.T.todense()))
        S = C @ W
        resid = C @ x
        if np.max(np.abs(resid)) > 0.0:
            x = x - W @ np.linalg.solve(S, resid)
            eta = offsets + A @ x
    return GaussianApproximation(
        mode=x,
        precision_at_mode=P,
        cholesky_logdet=0.5 * factor.logdet,
        constraints_applied=bool(k),
        newton_iters=iters,
        grad_norm_at_mode=grad_norm,
        objective_trajectory=tuple(trajectory),
        eta_mode=eta,
        loglik_at_mode=lik.value(eta),
        _factor=factor,
        _C=C if k else None,
        _W=W,
        _S=S,
    )


def log_posterior_parts(layout: LatentLayout, spec: ModelSpec, theta: HyperState,
                        data: PanelDataset, x: np.ndarray, mask: np.ndarray | None = None,
                        likelihood=None):
    """(log-likelihood, prior quadratic form, gradient, curvature diag) at x.

    Exposes the pieces finite-difference tests need without running Newton.
    """
    lik = likelihood if likelihood is not None else _default_likelihood(data, mask)
    A, offsets = design_matrix(layout, data)
    Q = ridged_prior(layout, spec, theta, data)
    eta = offsets + A @ x
    value = lik.value(eta) - 0.5 * float(x @ (Q @ x))
    grad = A.T @ lik.grad(eta) - Q @ x
    hess = -(Q + A.T @ sp.diags(lik.curv(eta)) @ A)
    return value, grad, hess


# ---------------------------------------------------------------------------
# Hyperparameter posterior
# ---------------------------------------------------------------------------

def log_marginal_hyper(layout: LatentLayout, spec: ModelSpec, theta: HyperState,
                       data: PanelDataset, mask: np.ndarray | None = None,
                       likelihood=None, x0: np.ndarray | None = None,
                       return_approx: bool = False):
    """Laplace-approximated log posterior of theta (up to an additive constant).

    loglik(x*) - 0.5 x*' Q x* + 0.5 [logdet Q + logdet(C Q^-1 C')]
    - 0.5 [logdet P + logdet(C P^-1 C')] + log prior(theta); the
    2-pi factors of the constrained prior and Gaussian-approximation
    densities cancel exactly.
    """
    approx = find_mode(layout, spec, theta, data, mask=mask, likelihood=likelihood, x0=x0)
    Q = ridged_prior(layout, spec, theta, data)
    qfac = _SPDFactor(Q)
    C = layout.constraints
    logdet_cq = 0.0
    if C.shape[0]:
        Wq = qfac.solve(np.asarray(C.T.todense()))
        sign, logdet_cq = np.linalg.slogdet(C @ Wq)
        if sign <= 0:
            raise NumericError("constraint covariance under the prior not positive definite")
    x = approx.mode
    lp = (
        approx.loglik_at_mode
        - 0.5 * float(x @ (Q @ x))
        + 0.5 * (qfac.logdet + logdet_cq)
        - approx.cholesky_logdet - 0.5 * approx.logdet_constraint_cov()
        + log_hyper_prior(spec, theta)
    )
    if not math.isfinite(lp):
        raise NumericError(f"non-finite hyper log posterior at {theta}")
    return (lp, approx) if return_approx else lp


@dataclass(frozen=True)
class GridConfig:
    k: int = 3                 # grid is (2k+1)^d
    h_factor: float = 0.75     # spacing in posterior-sd units
    nm_maxiter: int = 200
    fd_step: float = 0.05      # curvature estimation step on transformed scale


@dataclass(frozen=True)
class GridPoint:
    theta: HyperState
    log_posterior: float
    weight: float
    mode: np.ndarray | None = None


@dataclass(frozen=True)
class HyperPosterior:
    """Weighted grid of Laplace-evaluated hyperparameter points."""

    family: ModelFamily
    grid_points: tuple[GridPoint, ...]
    mode_theta: HyperState
    normalization: float       # logsumexp of the unnormalized log posteriors

    def __post_init__(self):
        w = np.array([gp.weight for gp in self.grid_points])
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("grid weights must be nonnegative and sum to 1")

    @property
    def weights(self) -> np.ndarray:
        return np.array([gp.weight for gp in self.grid_points])

    def mean_of(self, fn) -> float:
        """Posterior mean of fn(theta) under the grid weights."""
        return float(sum(gp.weight * fn(gp.theta) for gp in self.grid_points))


def _grid_explore(logpost, d: int, x_start: np.ndarray, cfg: GridConfig):
    """Simplex mode search plus a regular (2k+1)^d grid around it.

    Returns (mode_vec, list of (vec, log posterior)). logpost must accept
    a length-d vector.
    """
    if d == 0:
        return np.zeros(0), [(np.zeros(0), logpost(np.zeros(0)))]
    res = minimize(lambda v: -logpost(v), x_start, method="Nelder-Mead",
                   options={"maxiter": cfg.nm_maxiter, "xatol": 1e-3, "fatol": 1e-4})
    if not np.all(np.isfinite(res.x)):
        raise NumericError(f"hyper optimizer failed; best seen {res.x}")
    mode = np.asarray(res.x, dtype=float)
    f0 = logpost(mode)

    # curvature by central differences; fall back to unit sd where flat
    h = cfg.fd_step
    H = np.empty((d, d))
    fp = np.empty(d)
    fm = np.empty(d)
    for a in range(d):
        ea = np.zeros(d)
        ea[a] = h
        fp[a] = logpost(mode + ea)
        fm[a] = logpost(mode - ea)
        H[a, a] = (fp[a] - 2.0 * f0 + fm[a]) / h**2
    for a in range(d):
        for b in range(a + 1, d):
            ea = np.zeros(d)
            eb = np.zeros(d)
            ea[a] = h
            eb[b] = h
            fpp = logpost(mode + ea + eb)
            fmm = logpost(mode - ea - eb)
            H[a, b] = H[b, a] = (fpp - fp[a] - fp[b] + 2.0 * f0 - fm[a] - fm[b] + fmm) / (2.0 * h**2)
    sds = np.ones(d)
    try:
        cov = np.linalg.inv(-H)
        diag = np.diag(cov)
        if np.all(diag > 0):
            sds = np.sqrt(diag)
    except np.linalg.LinAlgError:
        pass
    sds = np.clip(sds, 1e-3, 5.0)

    offsets = np.arange(-cfg.k, cfg.k + 1)
    grids = np.meshgrid(*([offsets] * d), indexing="ij")
    points = []
    for idx in np.ndindex(*([2 * cfg.k + 1] * d)):
        shift = np.array([grids[a][idx] for a in range(d)], dtype=float)
        v = mode + cfg.h_factor * sds * shift
        lp = f0 if np.all(shift == 0) else logpost(v)
        points.append((v, lp))
    return mode, points


def explore_hyper(layout: LatentLayout, spec: ModelSpec, data: PanelDataset,
                  grid_config: GridConfig | None = None, mask: np.ndarray | None = None,
                  likelihood=None) -> HyperPosterior:
    """Hyperparameter posterior on a curvature-scaled grid around the mode.

    mod1 has no free hyperparameters and returns a single degenerate
    point. Mode vectors of the latent approximations are cached on the
    grid points so posterior_summaries can warm-start.
    """
    cfg = grid_config or GridConfig()
    names = hyper_names(spec)
    d = len(names)
    warm: dict[str, np.ndarray] = {}
    mode_cache: dict[tuple, np.ndarray] = {}

    def logpost(vec: np.ndarray) -> float:
        theta = hyper_from_vector(spec, vec)
        try:
            lp, approx = log_marginal_hyper(layout, spec, theta, data, mask=mask,
                                            likelihood=likelihood, x0=warm.get("x"),
                                            return_approx=True)
        except NumericError:
            return -1e30
        warm["x"] = approx.mode
        mode_cache[tuple(np.round(vec, 12))] = approx.mode
        return lp

    mode_vec, raw = _grid_explore(logpost, d, hyper_to_vector(spec, default_hyper(spec)), cfg)
    lps = np.array([lp for _, lp in raw])
    if not np.any(np.isfinite(lps)):
        raise NumericError("all hyper grid evaluations failed")
    lmax = lps.max()
    w = np.exp(lps - lmax)
    w /= w.sum()
    points = tuple(
        GridPoint(hyper_from_vector(spec, v), float(lp), float(wi),
                  mode_cache.get(tuple(np.round(v, 12))))
        for (v, lp), wi in zip(raw, w)
    )
    norm = float(lmax + math.log(np.sum(np.exp(lps - lmax))))
    return HyperPosterior(spec.family, points, hyper_from_vector(spec, mode_vec), norm)


# ---------------------------------------------------------------------------
# Posterior summaries (grid-weighted Gaussian mixtures)
# ---------------------------------------------------------------------------

def gaussian_mixture_quantile(weights, means, sds, q: float) -> float:
    """Quantile of a Gaussian mixture by bisection on its CDF."""
    from scipy.stats import norm

    weights = np.asarray(weights)
    means = np.asarray(means)
    sds = np.maximum(np.asarray(sds), 1e-300)
    lo = float(np.min(means - 10 * sds))
    hi = float(np.max(means + 10 * sds))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(weights @ norm.cdf((mid - means) / sds)) < q:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * max(1.0, abs(hi)):
            break
    return 0.5 * (lo + hi)


def posterior_summaries(layout: LatentLayout, spec: ModelSpec, hyper: HyperPosterior,
                        data: PanelDataset, mask: np.ndarray | None = None,
                        likelihood=None, intensity_estimator: str = "mean",
                        jobs: int = 1):
    """Mixture posterior of the linear predictor and the fixed effects.

    Per cell: mixture mean and variance over grid points (mixture
    variance = sum w (sigma_g^2 + mu_g^2) - mu^2); fixed effects get
    means, sds and 2.5/97.5 percent Gaussian-mixture quantiles. Grid
    points are independent; jobs > 1 evaluates them concurrently.
    """
    n, T = layout.n_units, layout.n_periods
    A, _ = design_matrix(layout, data)
    n_fixed = 1 + layout.n_covariates + (T if layout.block("time_intercepts") else 0)
    E = sp.identity(layout.total_dim, format="csr")[:n_fixed]

    w = hyper.weights
    mu_cells = np.zeros((len(w), n * T))
    var_cells = np.zeros_like(mu_cells)
    mu_fixed = np.zeros((len(w), n_fixed))
    var_fixed = np.zeros_like(mu_fixed)

    def one(gp: GridPoint):
        approx = find_mode(layout, spec, gp.theta, data, mask=mask,
                           likelihood=likelihood, x0=gp.mode)
        return (approx.eta_mode, approx.marginal_variances(A),
                approx.mode[:n_fixed], approx.marginal_variances(E))

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(one, hyper.grid_points))
    else:
        results = [one(gp) for gp in hyper.grid_points]
    for gi, (mc, vc, mf, vf) in enumerate(results):
        mu_cells[gi] = mc
        var_cells[gi] = vc
        mu_fixed[gi] = mf
        var_fixed[gi] = vf

    eta_mean = w @ mu_cells
    eta_var = w @ (var_cells + mu_cells**2) - eta_mean**2
    eta_sd = np.sqrt(np.maximum(eta_var, 0.0))

    fe_mean = w @ mu_fixed
    fe_var = w @ (var_fixed + mu_fixed**2) - fe_mean**2
    fe_sd = np.sqrt(np.maximum(fe_var, 0.0))
    sd_fixed = np.sqrt(np.maximum(var_fixed, 0.0))
    names = ["beta0"] + list(data.covariate_names)
    if layout.block("time_intercepts"):
        names += [f"beta_t[{data.period_labels[j]}]" for j in range(T)]
    fixed_effects = {}
    for r, name in enumerate(names):
        q025 = gaussian_mixture_quantile(w, mu_fixed[:, r], sd_fixed[:, r], 0.025)
        q975 = gaussian_mixture_quantile(w, mu_fixed[:, r], sd_fixed[:, r], 0.975)
        fixed_effects[name] = (float(fe_mean[r]), float(fe_sd[r]), q025, q975)

    return _validate.PosteriorSummary.from_eta(
        eta_mean.reshape(T, n).T, eta_sd.reshape(T, n).T,
        fixed_effects, intensity_estimator,
    )
