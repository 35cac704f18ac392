"""Monte-Carlo study: Weibull PH data under interval censoring.

Given x, T is Weibull with shape ``theta`` and scale ``sigma * exp(-gamma'x / theta)``,
so that S(t|x) = exp(-(t/sigma)**theta * exp(gamma'x)) is a PH model with
baseline x = 0.  Each replicate draws its own generator from
``np.random.default_rng([seed, r])`` and is therefore reproducible on its own.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .degree_selection import DegreeGrid, changepoint_select, profile_loglik_grid
from .errors import BaselineError, DegenerateError, NonConvergenceError, SingularityError
from .model import Dataset
from .optimizer import FitConfig

log = logging.getLogger(__name__)

METHODS = ("B1", "B2", "P")


@dataclass(frozen=True)
class SimDesign:
    n: int = 100
    theta: float = 2.0
    sigma: float = 2.0
    gamma_true: tuple = (0.5, -0.5)
    censor_prob: float = 0.7
    inspections: int = 6
    replicates: int = 300
    seed: int = 20240601
    horizon: float = 7.0

    def __post_init__(self):
        if not 0 < self.censor_prob < 1:
            raise ValueError("censor_prob must lie in (0, 1)")
        if self.n < 10:
            raise ValueError("n must be at least 10")
        if self.inspections < 1:
            raise ValueError("need at least one inspection time")
        if len(self.gamma_true) != 2:
            raise ValueError("the design has two covariates")
        if self.theta <= 0 or self.sigma <= 0 or self.horizon <= 0:
            raise ValueError("theta, sigma and horizon must be positive")

    @property
    def inspection_window(self) -> float:
        """Twice the 95% quantile of the baseline Weibull."""
        return 2.0 * self.sigma * (-np.log(0.05)) ** (1.0 / self.theta)

    def true_survival(self, t, x=(0.0, 0.0)):
        t = np.asarray(t, dtype=float)
        return np.exp(-((t / self.sigma) ** self.theta) * np.exp(np.dot(self.gamma_true, x)))


def replicate_rng(seed: int, r: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(r)])


def simulate_weibull_ph(design: SimDesign, r: int) -> Dataset:
    """Replicate ``r`` of the design.

    A subject is interval-censored with probability ``censor_prob``: then
    ``inspections`` sorted uniform times on [0, inspection_window] are drawn
    and T is reported as (last inspection before T, first one at or after
    T], with 0 and infinity standing in when there is none.  Otherwise T is
    observed exactly.
    """
    rng = replicate_rng(design.seed, r)
    n = design.n
    x = np.column_stack([rng.uniform(-1.0, 1.0, n), rng.choice([-1.0, 1.0], n)])
    lin = x @ np.asarray(design.gamma_true, dtype=float)
    u = rng.uniform(size=n)
    t = design.sigma * np.exp(-lin / design.theta) * (-np.log(u)) ** (1.0 / design.theta)
    censored = rng.uniform(size=n) < design.censor_prob
    insp = np.sort(rng.uniform(0.0, design.inspection_window, (n, design.inspections)), axis=1)
    # number of inspections strictly before T
    before = (insp < t[:, None]).sum(axis=1)
    padded = np.column_stack([np.zeros(n), insp, np.full(n, np.inf)])
    y1 = np.where(censored, padded[np.arange(n), before], t)
    y2 = np.where(censored, padded[np.arange(n), before + 1], t)
    return Dataset.from_arrays(y1, y2, censored.astype(int), x)


# Parametric Weibull PH fit ------------------------------------------------------

@dataclass
class WeibullFit:
    theta: float
    sigma: float
    gamma: np.ndarray
    loglik: float
    iterations: int
    unidentifiable: tuple = ()

    def survival(self, t, x):
        x = np.nan_to_num(np.asarray(x, dtype=float))
        g = np.nan_to_num(self.gamma)
        t = np.asarray(t, dtype=float)
        return np.exp(-((t / self.sigma) ** self.theta) * np.exp(g @ x))


def _weibull_terms(params, dataset_parts):
    """Log-likelihood and analytic gradient in (log theta, log sigma, gamma)."""
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        ll, grad = _weibull_raw(params, dataset_parts)
    if not np.isfinite(ll) or not np.all(np.isfinite(grad)):
        return -np.inf, grad
    return ll, grad


def _weibull_raw(params, dataset_parts):
    a, b = params[0], params[1]
    gamma = params[2:]
    theta = np.exp(a)
    te, xe, t1, t2, xc = dataset_parts
    # exact: log f = log theta + log H - log t - H, with H = exp(theta (log t - b) + gamma'x)
    ze = np.log(te) - b
    he = np.exp(theta * ze + xe @ gamma)
    ll = np.sum(a + theta * ze + xe @ gamma - np.log(te) - he)
    grad = np.zeros_like(params)
    grad[0] = np.sum(1.0 + theta * ze * (1.0 - he))
    grad[1] = np.sum(-theta * (1.0 - he))
    grad[2:] = xe.T @ (1.0 - he)
    lin_c = xc @ gamma
    z1 = np.log(t1) - b
    z2 = np.log(t2) - b
    left = t1 == 0
    right = np.isinf(t2)
    h1 = np.where(left, 0.0, np.exp(np.where(left, 0.0, theta * z1) + lin_c))
    h2 = np.where(right, np.inf, np.exp(np.where(right, 0.0, theta * z2) + lin_c))
    dh = h2 - h1
    # log(exp(-H1) - exp(-H2)) = -H1 + log(1 - exp(-(H2 - H1)))
    ll += np.sum(-h1 + np.where(right, 0.0, np.log(-np.expm1(-np.where(right, 1.0, dh)))))
    w = np.where(right, 0.0, 1.0 / np.expm1(np.where(right, 1.0, dh)))
    c1 = -(1.0 + w)
    zz1 = np.where(left, 0.0, z1)
    zz2 = np.where(right, 0.0, z2)
    h2f = np.where(right, 0.0, h2)
    # dH/da = theta z H, dH/db = -theta H, dH/dgamma = x H
    grad[0] += np.sum(theta * (c1 * h1 * zz1 + w * h2f * zz2))
    grad[1] += np.sum(-theta * (c1 * h1 + w * h2f))
    grad[2:] += xc.T @ (c1 * h1 + w * h2f)
    return float(ll), grad


def weibull_loglik(params, dataset: Dataset):
    return _weibull_terms(np.asarray(params, dtype=float), _weibull_parts(dataset, np.ones(dataset.d, bool)))


def _weibull_parts(dataset: Dataset, keep):
    exact = dataset.delta == 0
    x = dataset.x[:, keep]
    return (dataset.y1[exact], x[exact], dataset.y1[~exact], dataset.y2[~exact], x[~exact])


def weibull_pmle(dataset: Dataset, tol: float = 1e-8, max_iter: int = 200) -> WeibullFit:
    """Parametric Weibull PH maximum likelihood by damped Newton.

    Parameters are (log theta, log sigma, gamma); the Hessian is a central
    difference of the analytic gradient.  Covariates that are constant in
    the sample are confounded with sigma: they are left out and their
    coefficient is reported as NaN.
    """
    x = dataset.x
    keep = np.ptp(x, axis=0) > 0 if dataset.n else np.zeros(dataset.d, bool)
    parts = _weibull_parts(dataset, keep)
    finite = np.concatenate([dataset.y1[dataset.y1 > 0], dataset.y2[np.isfinite(dataset.y2) & (dataset.y2 > 0)]])
    if finite.size == 0:
        raise DegenerateError("no positive finite times to fit a Weibull model")
    params = np.concatenate([[0.0, np.log(np.median(finite))], np.zeros(int(keep.sum()))])
    ll, grad = _weibull_terms(params, parts)
    trace = [ll]
    for it in range(max_iter):
        if np.max(np.abs(grad)) < tol * max(1, dataset.n):
            break
        h = _fd_hessian(params, parts)
        try:
            step = -np.linalg.solve(h, grad)
        except np.linalg.LinAlgError:
            step = grad.copy()
        if not np.all(np.isfinite(step)) or grad @ step <= 0:
            # not an ascent direction: fall back to a scaled gradient step
            step = grad / max(1.0, np.max(np.abs(grad)))
        scale = 1.0
        for _ in range(40):
            cand = params + scale * step
            ll_c, grad_c = _weibull_terms(cand, parts)
            if np.isfinite(ll_c) and ll_c >= ll:
                break
            scale *= 0.5
        else:
            break
        stalled = ll_c - ll <= 1e-14 * abs(ll)
        params, ll, grad = cand, ll_c, grad_c
        trace.append(ll)
        if stalled:
            # no further progress at machine precision; judged by the gradient below
            break
    else:
        raise NonConvergenceError(
            f"Weibull fit did not converge in {max_iter} steps", last=params, residual=float(np.max(np.abs(grad))),
            report=trace,
        )
    if np.max(np.abs(grad)) > 1e-4 * max(1, dataset.n):
        raise NonConvergenceError("Weibull fit stalled", last=params, residual=float(np.max(np.abs(grad))), report=trace)
    gamma = np.full(dataset.d, np.nan)
    gamma[keep] = params[2:]
    dropped = tuple(int(j) for j in np.flatnonzero(~keep))
    return WeibullFit(float(np.exp(params[0])), float(np.exp(params[1])), gamma, ll, it, dropped)


def _fd_hessian(params, parts, h=1e-5):
    k = len(params)
    out = np.empty((k, k))
    for j in range(k):
        e = np.zeros(k)
        e[j] = h
        out[:, j] = (_weibull_terms(params + e, parts)[1] - _weibull_terms(params - e, parts)[1]) / (2 * h)
    return 0.5 * (out + out.T)


# Replicate loop and MSE bookkeeping -------------------------------------------

class Welford:
    """Streaming mean of squared errors (any array shape)."""

    def __init__(self, shape=()):
        self.count = 0
        self.mean = np.zeros(shape)

    def add(self, value):
        self.count += 1
        self.mean += (np.asarray(value, dtype=float) - self.mean) / self.count

    @property
    def value(self):
        return self.mean if self.count else np.full_like(self.mean, np.nan)


@dataclass
class ReplicateResult:
    r: int
    gamma: dict
    curve: dict
    degrees: dict
    failed: dict


@dataclass
class MSEReport:
    design: SimDesign
    t_grid: np.ndarray
    gamma_mse: dict
    curve_mse: dict
    failures: dict
    completed: dict
    replicates: list = field(default_factory=list, repr=False)

    def table_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "n", "coefficient", "mse", "replicates", "failures"])
        for method, mse in self.gamma_mse.items():
            for j, v in enumerate(mse):
                w.writerow([method, self.design.n, f"gamma{j + 1}", repr(float(v)),
                            self.completed[method], self.failures[method]])
        return buf.getvalue()

    def curve_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "method", "mse"])
        for method, mse in self.curve_mse.items():
            for t, v in zip(self.t_grid, mse):
                w.writerow([repr(float(t)), method, repr(float(v))])
        return buf.getvalue()


_FIT_ERRORS = (NonConvergenceError, SingularityError, BaselineError, DegenerateError)


def grid_for(n: int) -> DegreeGrid:
    return DegreeGrid.for_sample_size(n)


def run_replicate(design: SimDesign, r: int, methods: Sequence[str] = METHODS,
                  config: FitConfig = FitConfig(), grid: Optional[DegreeGrid] = None) -> ReplicateResult:
    """Fit one replicate with every requested method.

    B2 takes the degree chosen from full fits on the grid; B1 takes the
    degree chosen with gamma fixed at the full-fit estimate from the largest
    grid degree, and refits (gamma, p) there.
    """
    ds = simulate_weibull_ph(design, r)
    grid = grid or grid_for(design.n)
    t_grid = np.linspace(0.0, design.horizon, 100)
    x_base = np.zeros(2)
    gamma, curve, degrees, failed = {}, {}, {}, {}
    if "B1" in methods or "B2" in methods:
        try:
            table = profile_loglik_grid(ds, grid, config, "full")
            m_hat = changepoint_select(table)
        except _FIT_ERRORS as exc:
            table = None
            for meth in ("B1", "B2"):
                failed[meth] = str(exc)
        if table is not None and "B2" in methods:
            model = table.model_at(m_hat)
            gamma["B2"] = model.gamma.copy()
            curve["B2"] = model.conditional_survival(t_grid, x_base)
            degrees["B2"] = m_hat
        if table is not None and "B1" in methods:
            try:
                gamma_tilde = _largest_valid(table).gamma
                prof = profile_loglik_grid(ds, grid, config, "profile", gamma_tilde)
                m_tilde = changepoint_select(prof)
                model = table.model_at(m_tilde)
                if model is None:
                    raise DegenerateError(f"full fit at degree {m_tilde} failed")
                gamma["B1"] = model.gamma.copy()
                curve["B1"] = model.conditional_survival(t_grid, x_base)
                degrees["B1"] = m_tilde
            except _FIT_ERRORS as exc:
                failed["B1"] = str(exc)
    if "P" in methods:
        try:
            fit = weibull_pmle(ds)
            gamma["P"] = fit.gamma
            curve["P"] = fit.survival(t_grid, x_base)
        except _FIT_ERRORS as exc:
            failed["P"] = str(exc)
    return ReplicateResult(r, gamma, curve, degrees, failed)


def _largest_valid(table):
    for model in reversed(table.models):
        if model is not None:
            return model
    raise DegenerateError("no valid fit on the grid")


def mse_report(design: SimDesign, methods: Sequence[str] = METHODS, config: FitConfig = FitConfig(),
               grid: Optional[DegreeGrid] = None, progress=None) -> MSEReport:
    """MSE of gamma and pointwise MSE of S(t | x=0) over the replicates.

    Replicates where a method fails are left out of that method's averages
    and counted in ``failures``.  Accumulation runs in replicate order, so
    the report does not depend on how replicates were scheduled.
    """
    for meth in methods:
        if meth not in METHODS:
            raise ValueError(f"unknown method {meth!r}; choose from {METHODS}")
    t_grid = np.linspace(0.0, design.horizon, 100)
    truth_g = np.asarray(design.gamma_true, dtype=float)
    truth_s = design.true_survival(t_grid)
    acc_g = {m: Welford(2) for m in methods}
    acc_s = {m: Welford(len(t_grid)) for m in methods}
    failures = {m: 0 for m in methods}
    results = []
    for r in range(design.replicates):
        res = run_replicate(design, r, methods, config, grid)
        results.append(res)
        for meth in methods:
            if meth in res.failed or meth not in res.gamma:
                failures[meth] += 1
                log.info("replicate %d: %s failed (%s)", r, meth, res.failed.get(meth))
                continue
            acc_g[meth].add((res.gamma[meth] - truth_g) ** 2)
            acc_s[meth].add((res.curve[meth] - truth_s) ** 2)
        if progress is not None:
            progress(r, res)
    return MSEReport(
        design, t_grid,
        {m: acc_g[m].value for m in methods},
        {m: acc_s[m].value for m in methods},
        failures,
        {m: acc_g[m].count for m in methods},
        results,
    )
