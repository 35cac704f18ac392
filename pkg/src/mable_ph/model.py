"""Observations, datasets and the fitted Bernstein PH model.

Times are kept on the original scale in :class:`Dataset`; all fitting works
on ``t / tau`` in [0, 1] and :class:`BernsteinPHModel` maps back.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bernstein import beta_density_matrix, beta_survival_matrix
from .errors import DataError, SingularityError


@dataclass(frozen=True)
class Observation:
    """One subject: exact time (delta=0, y1 == y2) or interval (y1, y2] (delta=1)."""

    y1: float
    y2: float
    delta: int
    x: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        if self.delta not in (0, 1):
            raise DataError(f"delta must be 0 or 1, got {self.delta}")
        if not self.y1 >= 0 or math.isinf(self.y1):
            raise DataError(f"y1 must be a finite nonnegative time, got {self.y1}")
        if self.delta == 0 and self.y1 != self.y2:
            raise DataError(f"exact observation needs y1 == y2, got ({self.y1}, {self.y2})")
        if self.delta == 1 and not self.y2 > self.y1:
            raise DataError(f"censoring interval needs y1 < y2, got ({self.y1}, {self.y2})")


def choose_tau(y1, y2, tau: Optional[float] = None) -> float:
    """Largest finite observed time, unless a known ``tau`` is given."""
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    finite = np.concatenate([y1[np.isfinite(y1)], y2[np.isfinite(y2)]])
    finite = finite[finite > 0]
    if tau is not None:
        if not tau > 0:
            raise DataError("tau must be positive")
        if finite.size and finite.max() > tau:
            raise DataError(f"tau={tau} is smaller than the largest finite time {finite.max()}")
        return float(tau)
    if finite.size == 0:
        raise DataError("no finite positive observed time; cannot choose a time scale")
    return float(finite.max())


def _validate(y1, y2, delta):
    bad = ~np.isin(delta, (0, 1))
    bad |= ~(y1 >= 0) | np.isinf(y1)
    bad |= (delta == 0) & (y1 != y2)
    bad |= (delta == 1) & ~(y2 > y1)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        Observation(float(y1[k]), float(y2[k]), int(delta[k]))
        raise DataError(f"invalid observation at row {k}")


@dataclass
class Dataset:
    """Columnar observations with a fitting horizon ``tau``.

    ``t1``/``t2`` are the times divided by ``tau``; ``t2`` keeps ``inf`` for
    right-censored subjects.
    """

    y1: np.ndarray
    y2: np.ndarray
    delta: np.ndarray
    x: np.ndarray
    tau: float
    tau_known: bool = False
    t1: np.ndarray = field(init=False, repr=False)
    t2: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.y1 = np.asarray(self.y1, dtype=float)
        self.y2 = np.asarray(self.y2, dtype=float)
        self.delta = np.asarray(self.delta, dtype=int)
        x = np.asarray(self.x, dtype=float)
        d = x.shape[-1] if x.ndim == 2 else (0 if x.size == 0 else -1)
        self.x = x.reshape(len(self.y1), d)
        self.t1 = np.minimum(self.y1 / self.tau, 1.0)
        self.t2 = np.where(np.isinf(self.y2), np.inf, np.minimum(self.y2 / self.tau, 1.0))

    @classmethod
    def from_arrays(cls, y1, y2, delta, x=None, tau: Optional[float] = None) -> "Dataset":
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        delta = np.asarray(delta, dtype=int)
        n = len(y1)
        if x is None:
            x = np.zeros((n, 0))
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(n, -1) if n else x.reshape(0, 0)
        if not (len(y2) == len(delta) == x.shape[0] == n):
            raise DataError("y1, y2, delta and x must have the same number of rows")
        _validate(y1, y2, delta)
        if n == 0:
            return cls(y1, y2, delta, x, 1.0 if tau is None else float(tau), tau is not None)
        return cls(y1, y2, delta, x, choose_tau(y1, y2, tau), tau is not None)

    @classmethod
    def from_observations(cls, observations: Sequence[Observation], tau: Optional[float] = None) -> "Dataset":
        dims = {len(o.x) for o in observations}
        if len(dims) > 1:
            raise DataError(f"observations have mixed covariate dimensions {sorted(dims)}")
        d = dims.pop() if dims else 0
        x = np.array([o.x for o in observations], dtype=float).reshape(len(observations), d)
        return cls.from_arrays(
            [o.y1 for o in observations],
            [o.y2 for o in observations],
            [o.delta for o in observations],
            x,
            tau,
        )

    @property
    def n(self) -> int:
        return len(self.y1)

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def has_right_censoring(self) -> bool:
        return bool(np.any(np.isinf(self.y2)))

    def default_tail(self) -> bool:
        # p_{m+1} is unidentifiable with known tau, or without both right-censoring and covariates
        return (not self.tau_known) and (self.has_right_censoring or self.d > 0)

    def observations(self) -> list:
        return [
            Observation(float(a), float(b), int(c), tuple(r))
            for a, b, c, r in zip(self.y1, self.y2, self.delta, self.x)
        ]

    def with_covariates(self, x) -> "Dataset":
        return Dataset(self.y1, self.y2, self.delta, np.asarray(x, dtype=float), self.tau, self.tau_known)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.y1[idx], self.y2[idx], self.delta[idx], self.x[idx], self.tau, self.tau_known)


def tail_rate(m: int, p: np.ndarray, tau: float) -> float:
    """Rate alpha(0) of the exponential tail, matching the density at tau."""
    p_tail = p[m + 1]
    if p[m] > 0:
        return (m + 1) * p[m] / (p_tail * tau)
    warnings.warn("p_m = 0 with a positive tail weight; using tail rate (m+1)/tau", RuntimeWarning)
    return (m + 1) / tau


@dataclass(frozen=True)
class BernsteinPHModel:
    """Fitted state: degree, tail flag, weights ``p``, coefficients ``gamma``, baseline ``x0``."""

    m: int
    has_tail: bool
    p: np.ndarray
    gamma: np.ndarray
    x0: np.ndarray
    tau: float = 1.0

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "gamma", np.atleast_1d(np.asarray(self.gamma, dtype=float)))
        object.__setattr__(self, "x0", np.atleast_1d(np.asarray(self.x0, dtype=float)))
        if len(p) != self.m_star + 1:
            raise ValueError(f"expected {self.m_star + 1} weights for m={self.m}, tail={self.has_tail}, got {len(p)}")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("weights must lie on the unit simplex")
        if self.has_tail and p[-1] >= 1.0:
            raise ValueError("tail weight must be < 1")
        if self.gamma.shape != self.x0.shape:
            raise ValueError("gamma and x0 must have the same dimension")

    @property
    def m_star(self) -> int:
        return self.m + 1 if self.has_tail else self.m

    @property
    def d(self) -> int:
        return len(self.gamma)

    @property
    def p_tail(self) -> float:
        return float(self.p[self.m + 1]) if self.has_tail else 0.0

    def full_weights(self) -> np.ndarray:
        """Weights (p_0, ..., p_{m+1}) with an explicit zero tail when absent."""
        return self.p if self.has_tail else np.append(self.p, 0.0)

    def _tail_rate(self) -> float:
        return tail_rate(self.m, self.full_weights(), self.tau)

    def baseline_density(self, t):
        t = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t).ravel()
        if np.any(flat < 0):
            raise ValueError("t must be nonnegative")
        out = np.zeros_like(flat)
        inside = flat <= self.tau
        if inside.any():
            out[inside] = beta_density_matrix(self.m, flat[inside] / self.tau) @ self.p[: self.m + 1] / self.tau
        beyond = ~inside & np.isfinite(flat)
        if beyond.any() and self.p_tail > 0:
            rate = self._tail_rate()
            out[beyond] = self.p_tail * rate * np.exp(-rate * (flat[beyond] - self.tau))
        return out.reshape(t.shape) if t.ndim else float(out[0])

    def baseline_survival(self, t):
        t = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t).ravel()
        if np.any(flat < 0):
            raise ValueError("t must be nonnegative")
        out = np.zeros_like(flat)
        inside = flat <= self.tau
        if inside.any():
            rows = beta_survival_matrix(self.m, flat[inside] / self.tau)
            out[inside] = rows @ self.p[: self.m + 1] + self.p_tail
        beyond = ~inside & np.isfinite(flat)
        if beyond.any() and self.p_tail > 0:
            out[beyond] = self.p_tail * np.exp(-self._tail_rate() * (flat[beyond] - self.tau))
        # the weights sum to one only up to rounding; S(0) = 1 by definition
        out[flat == 0] = 1.0
        np.clip(out, 0.0, 1.0, out=out)
        return out.reshape(t.shape) if t.ndim else float(out[0])

    def hazard_multiplier(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != self.x0.shape:
            raise ValueError(f"covariate has dimension {x.shape[0]}, model expects {self.d}")
        return float(np.exp(self.gamma @ (x - self.x0))) if self.d else 1.0

    def conditional_survival(self, t, x):
        return self.baseline_survival(t) ** self.hazard_multiplier(x)

    def conditional_density(self, t, x):
        eta = self.hazard_multiplier(x)
        s0 = np.asarray(self.baseline_survival(t), dtype=float)
        f0 = np.asarray(self.baseline_density(t), dtype=float)
        if eta == 1.0:
            return f0 if f0.ndim else float(f0)
        zero = s0 <= 0.0
        if eta < 1.0 and np.any(zero & (f0 > 0)):
            raise SingularityError("conditional density is unbounded where the baseline survival vanishes")
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(zero, 0.0, eta * np.exp((eta - 1.0) * np.log(np.where(zero, 1.0, s0))) * f0)
        return out if out.ndim else float(out)

    def rescaled(self) -> "BernsteinPHModel":
        return BernsteinPHModel(self.m, self.has_tail, self.p, self.gamma, self.x0, 1.0)
