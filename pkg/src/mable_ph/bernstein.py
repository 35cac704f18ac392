"""Beta-density basis of the Bernstein polynomial model.

``beta_density(m, i, t)`` is the Beta(i+1, m-i+1) density and
``beta_survival(m, i, t)`` its upper tail probability.  Everything is
evaluated in log space so degrees in the hundreds are safe.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlogy

_CF_MAX_ITER = 500
_CF_EPS = 1e-16
_CF_TINY = 1e-300


@dataclass(frozen=True)
class BasisIndex:
    m: int
    i: int

    def __post_init__(self):
        if self.m < 0 or not 0 <= self.i <= self.m:
            raise ValueError(f"basis index requires 0 <= i <= m, got m={self.m}, i={self.i}")


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(~(t >= 0.0)) or np.any(~(t <= 1.0)):
        raise ValueError("t must lie in [0, 1]")
    return t


def _log_binom(n: int) -> np.ndarray:
    k = np.arange(n + 1)
    return gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)


def beta_density(m: int, i: int, t: float) -> float:
    """(m+1) C(m,i) t^i (1-t)^(m-i)."""
    BasisIndex(m, i)
    t = float(_check_t(t))
    log_c = math.lgamma(m + 2) - math.lgamma(i + 1) - math.lgamma(m - i + 1)
    return float(np.exp(log_c + xlogy(i, t) + xlogy(m - i, 1.0 - t)))


def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete beta continued fraction
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for k in range(1, _CF_MAX_ITER + 1):
        k2 = 2 * k
        aa = k * (b - k) * x / ((qam + k2) * (a + k2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + k) * (qab + k) * x / ((qap + k2) * (a + k2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def regularized_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) for positive a, b."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def beta_survival(m: int, i: int, t: float) -> float:
    """Upper tail 1 - I_t(i+1, m-i+1) of the i-th basis density."""
    BasisIndex(m, i)
    t = float(_check_t(t))
    if t == 0.0:
        return 1.0
    if t == 1.0:
        return 0.0
    a, b = i + 1.0, m - i + 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(t) + b * math.log1p(-t)
    )
    front = math.exp(log_front)
    # evaluate whichever tail converges fast and is not a difference of near-equal numbers
    if t < (i + 1.0) / (m + 2.0):
        return 1.0 - front * _betacf(a, b, t) / a
    return front * _betacf(b, a, 1.0 - t) / b


def beta_survival_row(m: int, t: float) -> np.ndarray:
    """All m+1 survival values at one t via the binomial-sum recurrence.

    1 - I_t(i+1, m-i+1) = P(Binomial(m+1, t) <= i), so the row is a running
    sum of binomial probabilities.
    """
    return beta_survival_matrix(m, np.array([t]))[0]


def beta_density_matrix(m: int, t) -> np.ndarray:
    """Rows beta_m(t_k) = (beta_m0(t_k), ..., beta_mm(t_k))."""
    t = _check_t(t).reshape(-1, 1)
    i = np.arange(m + 1)
    log_c = np.log(m + 1.0) + _log_binom(m)
    return np.exp(log_c + xlogy(i, t) + xlogy(m - i, 1.0 - t))


def beta_survival_matrix(m: int, t) -> np.ndarray:
    """Rows (Bbar_m0(t_k), ..., Bbar_mm(t_k)); exact 1 at t=0 and 0 at t=1."""
    t = _check_t(t).reshape(-1, 1)
    k = np.arange(m + 1)
    log_pmf = _log_binom(m + 1)[: m + 1] + xlogy(k, t) + xlogy(m + 1 - k, 1.0 - t)
    out = np.cumsum(np.exp(log_pmf), axis=1)
    np.clip(out, 0.0, 1.0, out=out)
    out[t[:, 0] == 0.0] = 1.0
    out[t[:, 0] == 1.0] = 0.0
    return out


def elevate_degree(p: np.ndarray, m: int, has_tail: bool) -> np.ndarray:
    """Weights of degree m+1 reproducing the degree-m mixture exactly.

    Uses beta_mi = (m+1-i)/(m+2) beta_{m+1,i} + (i+1)/(m+2) beta_{m+1,i+1};
    a tail weight is carried over unchanged.
    """
    core = np.asarray(p[: m + 1], dtype=float)
    i = np.arange(m + 1)
    q = np.zeros(m + 2)
    q[:-1] += core * (m + 1 - i) / (m + 2)
    q[1:] += core * (i + 1) / (m + 2)
    if has_tail:
        q = np.append(q, p[m + 1])
    return q
