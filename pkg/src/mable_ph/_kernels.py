"""Compiled inner loop of the multiplicative fixed-point iteration in p.

Mirrors ``likelihood.score_p``/``likelihood.loglik`` term by term; the
numpy versions there are the reference these are tested against.
"""
import math

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_CAP = 1
STATUS_SINGULAR = 2
STATUS_NEGATIVE = 3


@njit(cache=True)
def _w2_zero(eta, s1):
    """Limit of the S(y2) weight as S(y2) -> 0 (inf when eta < 1)."""
    if eta == 1.0:
        return 1.0 / s1
    if eta > 1.0:
        return 0.0
    return np.inf


@njit(cache=True)
def _c2_zero(eta, s1):
    """Limit of the S(y2) curvature weight as S(y2) -> 0.

    It is unbounded for 1 < eta < 2; the Newton polish then drops the term
    and relies on its line search.
    """
    if eta == 2.0:
        return 2.0 / (s1 * s1)
    return 0.0


@njit(cache=True)
def _row_is_zero(rows, i):
    """True when S(y2) vanishes for every p, as it does at y2 = infinity."""
    for j in range(rows.shape[1]):
        if rows[i, j] != 0.0:
            return False
    return True


@njit(cache=True)
def score_and_loglik(dens_e, surv_e, eta_e, surv_1, surv_2, eta_c, p, score):
    """Fill ``score`` with sum_i Psi(z_i); return the log-likelihood (-inf if a term vanishes)."""
    k = p.shape[0]
    for j in range(k):
        score[j] = 0.0
    ll = 0.0
    for i in range(dens_e.shape[0]):
        f = 0.0
        s = 0.0
        for j in range(k):
            f += dens_e[i, j] * p[j]
            s += surv_e[i, j] * p[j]
        eta = eta_e[i]
        if f <= 0.0 or (s <= 0.0 and eta != 1.0):
            return -np.inf
        ll += math.log(eta) + math.log(f)
        cs = 0.0
        if eta != 1.0:
            ll += (eta - 1.0) * math.log(s)
            cs = (eta - 1.0) / s
        for j in range(k):
            score[j] += dens_e[i, j] / f + cs * surv_e[i, j]
    for i in range(surv_1.shape[0]):
        s1 = 0.0
        s2 = 0.0
        for j in range(k):
            s1 += surv_1[i, j] * p[j]
            s2 += surv_2[i, j] * p[j]
        if s1 <= 0.0:
            return -np.inf
        eta = eta_c[i]
        a1 = eta * math.log(s1)
        r = 0.0
        if s2 > 0.0:
            r = math.exp(eta * (math.log(s2) - math.log(s1)))
        if r >= 1.0:
            return -np.inf
        ll += a1 + math.log1p(-r)
        w1 = eta / ((1.0 - r) * s1)
        if s2 > 0.0:
            w2 = eta * r / ((1.0 - r) * s2)
        elif _row_is_zero(surv_2, i):
            w2 = 0.0
        else:
            w2 = _w2_zero(eta, s1)
            if w2 == np.inf:
                return -np.inf
        for j in range(k):
            score[j] += w1 * surv_1[i, j] - w2 * surv_2[i, j]
    return ll


@njit(cache=True)
def kkt_from_score(score, lam, p, p_tol):
    res = 0.0
    for j in range(p.shape[0]):
        gap = score[j] - lam
        if gap > res:
            res = gap
        if p[j] > p_tol and -gap > res:
            res = -gap
    return res


@njit(cache=True)
def fixed_point_solve(dens_e, surv_e, eta_e, surv_1, surv_2, eta_c, p0, lam,
                      max_iter, p_tol, ll_tol, kkt_tol, trace):
    """Iterate p <- p * score / lam (renormalized) until converged.

    Stops once the KKT residual is below ``kkt_tol`` and either the weights
    or the log-likelihood have stopped moving.  ``trace`` (length
    ``max_iter + 1``) receives the log-likelihood of every iterate.
    Returns (p, iterations, loglik, kkt, status).
    """
    k = p0.shape[0]
    p = p0.copy()
    score = np.empty(k)
    ll_prev = -np.inf
    max_dp = np.inf
    ll = -np.inf
    kkt = np.inf
    for it in range(max_iter + 1):
        ll = score_and_loglik(dens_e, surv_e, eta_e, surv_1, surv_2, eta_c, p, score)
        trace[it] = ll
        if not ll > -np.inf:
            return p, it, ll, kkt, STATUS_SINGULAR
        kkt = kkt_from_score(score, lam, p, p_tol)
        if kkt < kkt_tol and (max_dp < p_tol or abs(ll - ll_prev) < ll_tol):
            return p, it, ll, kkt, STATUS_OK
        if it == max_iter:
            break
        total = 0.0
        for j in range(k):
            if score[j] < -1e-10 * lam:
                return p, it, ll, kkt, STATUS_NEGATIVE
        new = np.empty(k)
        for j in range(k):
            v = p[j] * score[j] / lam
            if v < 0.0:
                v = 0.0
            new[j] = v
            total += v
        max_dp = 0.0
        for j in range(k):
            v = new[j] / total
            d = abs(v - p[j])
            if d > max_dp:
                max_dp = d
            p[j] = v
        ll_prev = ll
    return p, max_iter, ll, kkt, STATUS_CAP


@njit(cache=True)
def score_hess_loglik(dens_e, surv_e, eta_e, surv_1, surv_2, eta_c, p, score, hess):
    """Like :func:`score_and_loglik`, also filling the p-Hessian ``hess``."""
    k = p.shape[0]
    for j in range(k):
        score[j] = 0.0
        for l in range(k):
            hess[j, l] = 0.0
    ll = 0.0
    psi = np.empty(k)
    for i in range(dens_e.shape[0]):
        f = 0.0
        s = 0.0
        for j in range(k):
            f += dens_e[i, j] * p[j]
            s += surv_e[i, j] * p[j]
        eta = eta_e[i]
        if f <= 0.0 or (s <= 0.0 and eta != 1.0):
            return -np.inf
        ll += math.log(eta) + math.log(f)
        cs = 0.0
        cs2 = 0.0
        if eta != 1.0:
            ll += (eta - 1.0) * math.log(s)
            cs = (eta - 1.0) / s
            cs2 = cs / s
        for j in range(k):
            dj = dens_e[i, j] / f
            score[j] += dj + cs * surv_e[i, j]
            for l in range(j + 1):
                hess[j, l] -= dj * dens_e[i, l] / f + cs2 * surv_e[i, j] * surv_e[i, l]
    for i in range(surv_1.shape[0]):
        s1 = 0.0
        s2 = 0.0
        for j in range(k):
            s1 += surv_1[i, j] * p[j]
            s2 += surv_2[i, j] * p[j]
        if s1 <= 0.0:
            return -np.inf
        eta = eta_c[i]
        a1 = eta * math.log(s1)
        r = 0.0
        if s2 > 0.0:
            r = math.exp(eta * (math.log(s2) - math.log(s1)))
        if r >= 1.0:
            return -np.inf
        ll += a1 + math.log1p(-r)
        w1 = eta / ((1.0 - r) * s1)
        kk = eta * (eta - 1.0) / (1.0 - r)
        c1 = kk / (s1 * s1)
        if s2 > 0.0:
            w2 = eta * r / ((1.0 - r) * s2)
            c2 = kk * (r / s2) / s2
        elif _row_is_zero(surv_2, i):
            w2 = 0.0
            c2 = 0.0
        else:
            w2 = _w2_zero(eta, s1)
            if w2 == np.inf:
                return -np.inf
            c2 = _c2_zero(eta, s1)
        for j in range(k):
            psi[j] = w1 * surv_1[i, j] - w2 * surv_2[i, j]
            score[j] += psi[j]
        for j in range(k):
            for l in range(j + 1):
                hess[j, l] += (c1 * surv_1[i, j] * surv_1[i, l] - c2 * surv_2[i, j] * surv_2[i, l]
                               - psi[j] * psi[l])
    for j in range(k):
        for l in range(j):
            hess[l, j] = hess[j, l]
    return ll


@njit(cache=True)
def _face_step(c, a_mat, free):
    """Equality-constrained step on the free set: A_FF s - nu 1 = -c_F, sum s = 0."""
    k = c.shape[0]
    nf = 0
    for j in range(k):
        if free[j]:
            nf += 1
    s = np.zeros(k)
    if nf < 2:
        return s, 0.0
    f = np.empty(nf, dtype=np.int64)
    t = 0
    for j in range(k):
        if free[j]:
            f[t] = j
            t += 1
    system = np.zeros((nf + 1, nf + 1))
    rhs = np.zeros(nf + 1)
    for i in range(nf):
        for j in range(nf):
            system[i, j] = a_mat[f[i], f[j]]
        system[i, nf] = -1.0
        system[nf, i] = 1.0
        rhs[i] = -c[f[i]]
    sol = np.linalg.solve(system, rhs)
    for i in range(nf):
        s[f[i]] = sol[i]
    return s, sol[nf]


@njit(cache=True)
def qp_direction(g, h, p, lam):
    """Maximize g'd + d'(H - D)d/2 subject to sum(d) = 0 and d >= -p.

    Primal active-set method started from the feasible point d = 0; the
    small diagonal ridge ``D`` makes the model strictly concave so the
    method terminates.  ``lam`` is unused here and kept for signature
    parity with the reference implementation.
    """
    k = p.shape[0]
    # each coordinate gets a ridge relative to its own curvature, so one
    # stiff weight does not damp the others
    a_mat = h.copy()
    for j in range(k):
        a_mat[j, j] -= 1e-10 * max(abs(h[j, j]), 1.0)
    d = np.zeros(k)
    free = np.empty(k, dtype=np.bool_)
    for j in range(k):
        free[j] = p[j] > 0.0
    c = np.empty(k)
    for _ in range(10 * k + 10):
        for j in range(k):
            v = g[j]
            for l in range(k):
                v += a_mat[j, l] * d[l]
            c[j] = v
        s, nu = _face_step(c, a_mat, free)
        smax = 0.0
        for j in range(k):
            if abs(s[j]) > smax:
                smax = abs(s[j])
        if smax <= 1e-15:
            # release the pinned bound whose multiplier has the wrong sign
            if not np.any(free):
                nu = c.max()
            else:
                nu_sum = 0.0
                cnt = 0
                for j in range(k):
                    if free[j]:
                        nu_sum += c[j]
                        cnt += 1
                nu = nu_sum / cnt
            best = -1
            best_v = 1e-12 * max(1.0, abs(nu))
            for j in range(k):
                if not free[j] and c[j] - nu > best_v:
                    best_v = c[j] - nu
                    best = j
            if best < 0:
                break
            free[best] = True
            continue
        alpha = 1.0
        block = -1
        for j in range(k):
            if free[j] and s[j] < 0.0:
                r = (-p[j] - d[j]) / s[j]
                if r < alpha:
                    alpha = r
                    block = j
        if alpha < 0.0:
            alpha = 0.0
        for j in range(k):
            d[j] += alpha * s[j]
        if block >= 0:
            d[block] = -p[block]
            free[block] = False
    return d
