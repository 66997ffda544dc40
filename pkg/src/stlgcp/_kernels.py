"""Metropolis-within-Gibbs sweep kernels.

The chain kernel is written as plain loop code and compiled with numba
unless STLGCP_DISABLE_NUMBA is set, in which case the identical source
runs as pure Python. Both stacks are built from one factory so they can
be compared side by side (see benchmarks/); numba reproduces NumPy's
legacy np.random stream, and all linear algebra is hand-rolled loop
code, so the two paths produce bitwise-identical chains.
"""

from __future__ import annotations

import math
import os

import numpy as np

__all__ = ["NUMBA_ENABLED", "chain_kernel", "chain_kernel_py", "stack", "stack_py"]

NUMBA_ENABLED = os.environ.get("STLGCP_DISABLE_NUMBA", "").strip().lower() not in ("1", "true", "yes")
if NUMBA_ENABLED:
    try:
        import numba  # noqa: F401
    except ImportError:
        NUMBA_ENABLED = False

EXP_CLAMP = 600.0
THETA_CLAMP = 40.0


def _make_stack(jit: bool):
    if jit:
        from numba import njit as dec
    else:
        def dec(f):
            return f

    @dec
    def pc_prec_logpdf(log_tau, rate):
        sd = math.exp(-0.5 * log_tau)
        return math.log(rate) - rate * sd + math.log(0.5 * sd)

    @dec
    def pc_cor_logpdf(beta, rate):
        b2 = beta * beta
        if b2 >= 1.0:
            return -math.inf
        if b2 < 1e-12:
            return math.log(0.5 * rate) - rate * abs(beta)
        d = math.sqrt(-math.log1p(-b2))
        dprime = abs(beta) / ((1.0 - b2) * d)
        return math.log(0.5 * rate) - rate * d + math.log(dprime)

    @dec
    def hyper_logprior(family, theta, fixed_atanh_beta, lam, rate_c):
        if theta.shape[0] == 0:
            return 0.0
        if family == 2:
            return pc_prec_logpdf(theta[0], lam)
        if family == 3:
            return pc_prec_logpdf(theta[0], lam) + pc_prec_logpdf(theta[1], lam)
        beta_free = theta.shape[0] > 1
        a = theta[1] if beta_free else fixed_atanh_beta
        beta = math.tanh(a)
        log_kappa = theta[0] + math.log1p(-beta * beta)
        out = pc_prec_logpdf(log_kappa, lam)
        if beta_free:
            out += pc_cor_logpdf(beta, rate_c) + math.log1p(-beta * beta)
        return out

    @dec
    def fill_coefs(family, theta, fixed_atanh_beta, out):
        out[0] = 1.0
        if family == 2:
            out[1] = math.exp(theta[0])
        elif family == 3:
            out[1] = math.exp(theta[0])
            out[2] = math.exp(theta[1])
        elif family >= 4:
            tau = math.exp(theta[0])
            a = theta[1] if theta.shape[0] > 1 else fixed_atanh_beta
            beta = math.tanh(a)
            out[1] = tau
            out[2] = tau * beta * beta
            out[3] = tau * beta

    @dec
    def build_q(terms, coefs, Q):
        n_terms = terms.shape[0]
        dim = Q.shape[0]
        for i in range(dim):
            for j in range(dim):
                acc = 0.0
                for m in range(n_terms):
                    acc += coefs[m] * terms[m, i, j]
                Q[i, j] = acc

    @dec
    def cholesky_lower(M, L):
        """In-place lower Cholesky; returns 0.0 on failure, else logdet(M)."""
        n = M.shape[0]
        ld = 0.0
        for i in range(n):
            for j in range(i + 1):
                acc = M[i, j]
                for t in range(j):
                    acc -= L[i, t] * L[j, t]
                if i == j:
                    if acc <= 0.0:
                        return 0.0
                    L[i, i] = math.sqrt(acc)
                    ld += 2.0 * math.log(L[i, i])
                else:
                    L[i, j] = acc / L[j, j]
        return ld

    @dec
    def chol_solve_inplace(L, b):
        """Solve (L L') x = b in place, L lower triangular."""
        n = L.shape[0]
        for i in range(n):
            acc = b[i]
            for t in range(i):
                acc -= L[i, t] * b[t]
            b[i] = acc / L[i, i]
        for i in range(n - 1, -1, -1):
            acc = b[i]
            for t in range(i + 1, n):
                acc -= L[t, i] * b[t]
            b[i] = acc / L[i, i]

    @dec
    def logdet_constrained(Q, C, Lbuf, kbuf, Sbuf, Lsbuf):
        """logdet Q + logdet(C Q^-1 C'); 0.0 signals a failed factorization."""
        ld = cholesky_lower(Q, Lbuf)
        if ld == 0.0:
            return 0.0
        k = C.shape[0]
        if k == 0:
            return ld
        dim = Q.shape[0]
        for r in range(k):
            for i in range(dim):
                kbuf[r, i] = C[r, i]
            chol_solve_inplace(Lbuf, kbuf[r])
        for r in range(k):
            for c in range(k):
                acc = 0.0
                for i in range(dim):
                    acc += C[r, i] * kbuf[c, i]
                Sbuf[r, c] = acc
        lds = cholesky_lower(Sbuf, Lsbuf)
        if lds == 0.0:
            return 0.0
        return ld + lds

    @dec
    def rebuild_group_stats(Q, group_ptr, group_members, QcolG, blocksum, rowsumB, group_id):
        n_groups = group_ptr.shape[0] - 1
        dim = Q.shape[0]
        for g in range(n_groups):
            for t in range(dim):
                acc = 0.0
                for e in range(group_ptr[g], group_ptr[g + 1]):
                    acc += Q[t, group_members[e]]
                QcolG[g, t] = acc
            acc = 0.0
            for e in range(group_ptr[g], group_ptr[g + 1]):
                acc += QcolG[g, group_members[e]]
            blocksum[g] = acc
        for s in range(dim):
            g = group_id[s]
            rowsumB[s] = QcolG[g, s] if g >= 0 else 0.0

    @dec
    def chain_kernel(seed, n_iter, burn_in, thin,
                     x0, theta0, A, offsets, y, mask,
                     terms, family, fixed_atanh_beta, lam, rate_c,
                     C, group_id, group_ptr, group_members, SA,
                     sd_x0, sd_t0, adapt_interval, target_rate):
        np.random.seed(seed)
        dim = x0.shape[0]
        ncells = y.shape[0]
        n_hyper = theta0.shape[0]
        n_terms = terms.shape[0]
        n_groups = group_ptr.shape[0] - 1
        k = C.shape[0]

        x = x0.copy()
        theta = theta0.copy()
        sd_x = sd_x0.copy()
        sd_t = sd_t0.copy()

        coefs = np.zeros(n_terms)
        fill_coefs(family, theta, fixed_atanh_beta, coefs)
        Q = np.zeros((dim, dim))
        build_q(terms, coefs, Q)
        Qx = np.zeros(dim)
        for i in range(dim):
            acc = 0.0
            for j in range(dim):
                acc += Q[i, j] * x[j]
            Qx[i] = acc
        QcolG = np.zeros((max(n_groups, 1), dim))
        blocksum = np.zeros(max(n_groups, 1))
        rowsumB = np.zeros(dim)
        rebuild_group_stats(Q, group_ptr, group_members, QcolG, blocksum, rowsumB, group_id)

        eta = np.zeros(ncells)
        for c in range(ncells):
            acc = offsets[c]
            for j in range(dim):
                acc += A[c, j] * x[j]
            eta[c] = acc

        Lbuf = np.zeros((dim, dim))
        kbuf = np.zeros((max(k, 1), dim))
        Sbuf = np.zeros((max(k, 1), max(k, 1)))
        Lsbuf = np.zeros((max(k, 1), max(k, 1)))
        Qprop = np.zeros((dim, dim))
        coefs_prop = np.zeros(n_terms)
        theta_prop = theta.copy()
        au = np.zeros(ncells)

        cur_logdetc = logdet_constrained(Q, C, Lbuf, kbuf, Sbuf, Lsbuf)
        cur_tprior = hyper_logprior(family, theta, fixed_atanh_beta, lam, rate_c)

        n_keep = 0
        if n_iter > burn_in:
            n_keep = (n_iter - burn_in + thin - 1) // thin
        samples = np.zeros((n_keep, dim + n_hyper))
        acc_x = np.zeros(dim)
        acc_t = np.zeros(max(n_hyper, 1))
        n_rec = 0
        win_x = np.zeros(dim)
        win_t = np.zeros(max(n_hyper, 1))
        keep_row = 0

        for it in range(n_iter):
            # --- single-site latent sweep (proposals projected onto sum-zero blocks)
            for s in range(dim):
                delta = sd_x[s] * np.random.normal(0.0, 1.0)
                g = group_id[s]
                if g >= 0:
                    m = float(group_ptr[g + 1] - group_ptr[g])
                    sum_qx = 0.0
                    for e in range(group_ptr[g], group_ptr[g + 1]):
                        sum_qx += Qx[group_members[e]]
                    ut_qx = Qx[s] - sum_qx / m
                    ut_qu = Q[s, s] - 2.0 * rowsumB[s] / m + blocksum[g] / (m * m)
                else:
                    m = 0.0
                    ut_qx = Qx[s]
                    ut_qu = Q[s, s]
                dprior = -delta * ut_qx - 0.5 * delta * delta * ut_qu

                dll = 0.0
                ok = True
                for c in range(ncells):
                    a_uc = A[c, s] - (SA[g, c] / m if g >= 0 else 0.0)
                    au[c] = a_uc
                    if a_uc != 0.0 and mask[c] != 0.0:
                        e_new = eta[c] + delta * a_uc
                        if e_new > EXP_CLAMP:
                            ok = False
                            break
                        dll += y[c] * delta * a_uc - (math.exp(e_new) - math.exp(eta[c]))
                u_rand = np.random.random()
                log_u = math.log(u_rand) if u_rand > 0.0 else -1e308
                if ok and log_u < dprior + dll:
                    if g >= 0:
                        for e in range(group_ptr[g], group_ptr[g + 1]):
                            x[group_members[e]] -= delta / m
                        x[s] += delta
                        for t in range(dim):
                            Qx[t] += delta * (Q[t, s] - QcolG[g, t] / m)
                        for c in range(ncells):
                            if au[c] != 0.0:
                                eta[c] += delta * au[c]
                    else:
                        x[s] += delta
                        for t in range(dim):
                            Qx[t] += delta * Q[t, s]
                        for c in range(ncells):
                            if A[c, s] != 0.0:
                                eta[c] += delta * A[c, s]
                    if it >= burn_in:
                        acc_x[s] += 1.0
                    win_x[s] += 1.0

            # --- per-sweep centering of constrained blocks (cleans rounding drift)
            for g in range(n_groups):
                m = float(group_ptr[g + 1] - group_ptr[g])
                mean = 0.0
                for e in range(group_ptr[g], group_ptr[g + 1]):
                    mean += x[group_members[e]]
                mean /= m
                if mean != 0.0:
                    for e in range(group_ptr[g], group_ptr[g + 1]):
                        x[group_members[e]] -= mean
                    for t in range(dim):
                        Qx[t] -= mean * QcolG[g, t]
                    for c in range(ncells):
                        if SA[g, c] != 0.0:
                            eta[c] -= mean * SA[g, c]

            # --- hyperparameter random-walk updates on the transformed scale
            for h in range(n_hyper):
                step = sd_t[h] * np.random.normal(0.0, 1.0)
                u_rand = np.random.random()
                for h2 in range(n_hyper):
                    theta_prop[h2] = theta[h2]
                theta_prop[h] = theta[h] + step
                if abs(theta_prop[h]) > THETA_CLAMP:
                    continue
                fill_coefs(family, theta_prop, fixed_atanh_beta, coefs_prop)
                build_q(terms, coefs_prop, Qprop)
                new_logdetc = logdet_constrained(Qprop, C, Lbuf, kbuf, Sbuf, Lsbuf)
                if new_logdetc == 0.0:
                    continue
                xqx_old = 0.0
                for t in range(dim):
                    xqx_old += x[t] * Qx[t]
                xqx_new = 0.0
                for i in range(dim):
                    acc = 0.0
                    for j in range(dim):
                        acc += Qprop[i, j] * x[j]
                    xqx_new += x[i] * acc
                new_tprior = hyper_logprior(family, theta_prop, fixed_atanh_beta, lam, rate_c)
                dpost = (0.5 * new_logdetc - 0.5 * xqx_new + new_tprior) - (
                    0.5 * cur_logdetc - 0.5 * xqx_old + cur_tprior)
                log_u = math.log(u_rand) if u_rand > 0.0 else -1e308
                if log_u < dpost:
                    theta[h] = theta_prop[h]
                    for i in range(dim):
                        for j in range(dim):
                            Q[i, j] = Qprop[i, j]
                    for i in range(dim):
                        acc = 0.0
                        for j in range(dim):
                            acc += Q[i, j] * x[j]
                        Qx[i] = acc
                    rebuild_group_stats(Q, group_ptr, group_members, QcolG, blocksum, rowsumB, group_id)
                    cur_logdetc = new_logdetc
                    cur_tprior = new_tprior
                    if it >= burn_in:
                        acc_t[h] += 1.0
                    win_t[h] += 1.0

            # --- proposal-sd adaptation during burn-in
            if it < burn_in and (it + 1) % adapt_interval == 0:
                for s in range(dim):
                    rate = win_x[s] / adapt_interval
                    sd_x[s] *= math.exp(rate - target_rate)
                    if sd_x[s] < 1e-5:
                        sd_x[s] = 1e-5
                    elif sd_x[s] > 1e4:
                        sd_x[s] = 1e4
                    win_x[s] = 0.0
                for h in range(n_hyper):
                    rate = win_t[h] / adapt_interval
                    sd_t[h] *= math.exp(rate - target_rate)
                    if sd_t[h] < 1e-5:
                        sd_t[h] = 1e-5
                    elif sd_t[h] > 1e4:
                        sd_t[h] = 1e4
                    win_t[h] = 0.0

            if it >= burn_in:
                n_rec += 1
                if (it - burn_in) % thin == 0:
                    for d0 in range(dim):
                        samples[keep_row, d0] = x[d0]
                    for h0 in range(n_hyper):
                        samples[keep_row, dim + h0] = theta[h0]
                    keep_row += 1

        denom = float(n_rec) if n_rec > 0 else 1.0
        for s in range(dim):
            acc_x[s] /= denom
        for h in range(n_hyper):
            acc_t[h] /= denom
        return samples, acc_x, acc_t[:n_hyper], sd_x, sd_t

    return {
        "pc_prec_logpdf": pc_prec_logpdf,
        "pc_cor_logpdf": pc_cor_logpdf,
        "hyper_logprior": hyper_logprior,
        "fill_coefs": fill_coefs,
        "build_q": build_q,
        "cholesky_lower": cholesky_lower,
        "logdet_constrained": logdet_constrained,
        "chain_kernel": chain_kernel,
    }


stack_py = _make_stack(False)
stack = _make_stack(True) if NUMBA_ENABLED else stack_py
chain_kernel_py = stack_py["chain_kernel"]
chain_kernel = stack["chain_kernel"]
