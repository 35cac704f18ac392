"""Choosing the Bernstein degree by a change point in the log-likelihood increments.

Fits are run over a consecutive grid of degrees.  The log-likelihood grows
quickly while the degree is too small and then levels off; the degree at
the knee is picked with the statistic

    R(m_i) = k log((l_k - l_0)/k) - i log((l_i - l_0)/i)
             - (k - i) log((l_k - l_i)/(k - i)).
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bernstein import elevate_degree
from .errors import BaselineError, DegenerateError, NonConvergenceError, SingularityError
from .likelihood import prepare
from .model import BernsteinPHModel, Dataset
from .optimizer import (
    FitConfig,
    FitReport,
    empirical_baseline,
    interior_project,
    mable_fit,
    solve_p,
    uniform_weights,
)

log = logging.getLogger(__name__)

INCREMENT_FLOOR = 1e-10
MODES = ("full", "profile")

# failures that invalidate a single grid cell rather than the whole grid
_CELL_ERRORS = (NonConvergenceError, SingularityError, BaselineError, DegenerateError)


@dataclass(frozen=True)
class DegreeGrid:
    """Degrees m0, m0+1, ..., m0+k."""

    m0: int = 2
    k: int = 18

    def __post_init__(self):
        if self.m0 < 1:
            raise ValueError("m0 must be at least 1")
        if self.k < 2:
            raise ValueError("a grid needs k >= 2 so that R has an interior point")

    @classmethod
    def from_bounds(cls, lo: int, hi: int) -> "DegreeGrid":
        return cls(lo, hi - lo)

    @classmethod
    def for_sample_size(cls, n: int, m0: int = 2, cap: int = 20) -> "DegreeGrid":
        """Grid {m0, ..., min(cap, n // 3)}, never shorter than three degrees."""
        return cls(m0, max(2, min(cap, n // 3) - m0))

    @property
    def degrees(self) -> np.ndarray:
        return np.arange(self.m0, self.m0 + self.k + 1)


@dataclass
class DegreeTable:
    degrees: np.ndarray
    loglik: np.ndarray
    valid: np.ndarray
    mode: str = "full"
    R: Optional[np.ndarray] = None
    chosen: Optional[int] = None
    models: list = field(default_factory=list, repr=False)
    reports: list = field(default_factory=list, repr=False)

    @property
    def chosen_degree(self) -> int:
        if self.chosen is None:
            raise ValueError("no degree chosen yet; call changepoint_select")
        return int(self.degrees[self.chosen])

    def model_at(self, m: int) -> Optional[BernsteinPHModel]:
        return self.models[int(np.flatnonzero(self.degrees == m)[0])]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "loglik", "R"])
        R = self.R if self.R is not None else np.full(len(self.degrees), np.nan)
        for m, ll, r, ok in zip(self.degrees, self.loglik, R, self.valid):
            w.writerow([int(m), repr(float(ll)) if ok else "nan", repr(float(r))])
        return buf.getvalue()


def profile_loglik_grid(
    dataset: Dataset,
    grid: DegreeGrid = DegreeGrid(),
    config: FitConfig = FitConfig(),
    mode: str = "full",
    gamma_tilde=None,
    has_tail: Optional[bool] = None,
) -> DegreeTable:
    """Maximized log-likelihood at every degree of ``grid``.

    ``mode="full"`` fits gamma and p at each degree.  ``mode="profile"``
    holds gamma at ``gamma_tilde`` and maximizes over p only.  Each degree is
    warm-started from the previous one by degree elevation; a degree whose
    fit fails is marked invalid and the next degree starts from scratch.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if has_tail is None:
        has_tail = dataset.default_tail()
    if mode == "profile":
        if dataset.d and gamma_tilde is None:
            raise ValueError("profile mode needs gamma_tilde")
        gamma_tilde = np.zeros(dataset.d) if gamma_tilde is None else np.asarray(gamma_tilde, dtype=float).reshape(-1)
        if gamma_tilde.shape != (dataset.d,):
            raise ValueError(f"gamma_tilde must have {dataset.d} components")

    degrees = grid.degrees
    loglik = np.full(len(degrees), np.nan)
    valid = np.zeros(len(degrees), dtype=bool)
    models: list = []
    reports: list = []
    prev: Optional[BernsteinPHModel] = None
    for j, m in enumerate(degrees):
        m = int(m)
        p_init = None
        if prev is not None and prev.m == m - 1:
            p_init = interior_project(elevate_degree(prev.p, prev.m, has_tail), config.interior_eps)
        try:
            if mode == "full":
                model, report = mable_fit(
                    dataset, m, None if prev is None else prev.gamma, config, has_tail, p_init=p_init,
                )
            else:
                model, report = _profile_cell(dataset, m, gamma_tilde, config, has_tail, p_init)
        except _CELL_ERRORS as exc:
            log.warning("degree %d: fit failed (%s); cell marked invalid", m, exc)
            models.append(None)
            reports.append(getattr(exc, "report", None))
            prev = None
            continue
        loglik[j] = report.loglik
        valid[j] = True
        models.append(model)
        reports.append(report)
        prev = model
    return DegreeTable(degrees, loglik, valid, mode, models=models, reports=reports)


def _profile_cell(dataset, m, gamma, config, has_tail, p_init):
    prep = prepare(dataset, m, has_tail)
    x0, idx = empirical_baseline(gamma, dataset.x) if dataset.d else (np.zeros(0), 0)
    p0 = uniform_weights(prep.m_star + 1) if p_init is None else p_init
    sol = solve_p(prep, gamma, p0, config, x0)
    report = FitReport(
        loglik_trace=[sol.loglik], kkt_residual=sol.kkt, converged=True,
        gamma_hat=gamma.copy(), p_hat=sol.p, x0_hat=x0, x0_index=idx,
        fixed_point_iters=sol.iterations,
    )
    return BernsteinPHModel(m, has_tail, sol.p, gamma, x0, dataset.tau), report


def changepoint_statistic(loglik, positions=None) -> np.ndarray:
    """R at each grid position; ``positions`` are i = m_i - m_0 (default 0..k).

    Increments that are zero or negative are replaced by a tiny positive
    floor so the logs stay finite once the likelihood has saturated.
    """
    ll = np.asarray(loglik, dtype=float)
    pos = np.arange(len(ll)) if positions is None else np.asarray(positions, dtype=int)
    if len(ll) < 3:
        raise ValueError("need at least three grid cells")
    k = pos[-1] - pos[0]
    total = ll[-1] - ll[0]
    # a rise below the increment floor is rounding noise, not information
    if not total > INCREMENT_FLOOR:
        raise DegenerateError("log-likelihood does not increase over the grid; no degree information")
    R = np.zeros(len(ll))
    for j in range(1, len(ll) - 1):
        i = pos[j] - pos[0]
        left = max(ll[j] - ll[0], INCREMENT_FLOOR)
        right = max(ll[-1] - ll[j], INCREMENT_FLOOR)
        R[j] = k * np.log(total / k) - i * np.log(left / i) - (k - i) * np.log(right / (k - i))
    return R


def changepoint_select(table: DegreeTable) -> int:
    """Degree maximizing R over m_1, ..., m_k (smallest on ties).

    Invalid cells are skipped; their neighbours keep their true distance
    from m_0.  Fills ``table.R`` and ``table.chosen`` and returns the degree.
    """
    ok = np.flatnonzero(table.valid)
    if len(ok) < 3:
        raise DegenerateError(f"only {len(ok)} valid grid cells; need at least 3")
    R_valid = changepoint_statistic(table.loglik[ok], table.degrees[ok] - table.degrees[ok[0]])
    R = np.full(len(table.degrees), np.nan)
    R[ok] = R_valid
    best = 1 + int(np.argmax(R_valid[1:]))
    table.R = R
    table.chosen = int(ok[best])
    return table.chosen_degree


def select_degree(
    dataset: Dataset,
    grid: DegreeGrid = DegreeGrid(),
    config: FitConfig = FitConfig(),
    mode: str = "full",
    gamma_tilde=None,
    has_tail: Optional[bool] = None,
) -> DegreeTable:
    table = profile_loglik_grid(dataset, grid, config, mode, gamma_tilde, has_tail)
    changepoint_select(table)
    return table
