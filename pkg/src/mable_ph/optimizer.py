"""Fitting: fixed-point iteration in p, Newton-Raphson in gamma, and the
alternating algorithm that combines them with baseline re-selection.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .bernstein import beta_density_matrix, beta_survival_matrix
from .errors import BaselineError, DataError, NonConvergenceError, SingularityError
from .likelihood import (
    PreparedData,
    hess_gamma,
    hess_p,
    loglik,
    observed_information,
    prepare,
    score_gamma,
    score_p,
)
from .model import BernsteinPHModel, Dataset

log = logging.getLogger(__name__)

_REBASE_TOL = 1e-12
_MAX_HALVINGS = 30
_POLISH_AFTER = 30
_CHECK_CHUNK = 50
_DROP_TOL = 1e-10
_SNAP_TOL = 1e-3
_LOG_FLOOR = 1e-150
_BISECT_STEPS = 200


@dataclass(frozen=True)
class FitConfig:
    p_tol: float = 1e-7
    loglik_tol: float = 1e-8
    gamma_tol: float = 1e-8
    max_fixed_point_iters: int = 5000
    max_newton_iters: int = 100
    max_outer_iters: int = 200
    interior_eps: float = 1e-4
    kkt_tol: float = 1e-6
    accelerate: bool = True

    def __post_init__(self):
        for name in ("p_tol", "loglik_tol", "gamma_tol", "interior_eps", "kkt_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("max_fixed_point_iters", "max_newton_iters", "max_outer_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if not self.interior_eps < 1:
            raise ValueError("interior_eps must be < 1")


@dataclass
class FitReport:
    loglik_trace: list = field(default_factory=list)
    kkt_residual: float = float("nan")
    converged: bool = False
    outer_iters: int = 0
    gamma_hat: np.ndarray = field(default_factory=lambda: np.zeros(0))
    p_hat: np.ndarray = field(default_factory=lambda: np.zeros(0))
    x0_hat: np.ndarray = field(default_factory=lambda: np.zeros(0))
    x0_index: int = 0
    standard_errors: Optional[np.ndarray] = None
    fixed_point_iters: int = 0
    newton_iters: int = 0
    rebases: int = 0

    @property
    def loglik(self) -> float:
        return self.loglik_trace[-1] if self.loglik_trace else float("nan")


def uniform_weights(k: int) -> np.ndarray:
    return np.full(k, 1.0 / k)


def interior_project(p: np.ndarray, eps: float) -> np.ndarray:
    return (p + eps * uniform_weights(len(p))) / (1.0 + eps)


def empirical_baseline(gamma, x) -> tuple[np.ndarray, int]:
    """Covariate row minimizing gamma'x; ties go to the smallest index."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] == 0:
        raise DataError("empty dataset has no baseline")
    if x.shape[1] == 0:
        return np.zeros(0), 0
    idx = int(np.argmin(x @ np.asarray(gamma, dtype=float)))
    return x[idx].copy(), idx


def _etas(prep: PreparedData, gamma, x0):
    if prep.d == 0:
        return np.ones(prep.x_e.shape[0]), np.ones(prep.x_c.shape[0])
    return np.exp((prep.x_e - x0) @ gamma), np.exp((prep.x_c - x0) @ gamma)


def hazard_total(prep: PreparedData, gamma, x0) -> float:
    """lambda_n(gamma) = sum_i exp(gamma'(x_i - x0))."""
    eta_e, eta_c = _etas(prep, gamma, x0)
    return float(eta_e.sum() + eta_c.sum())


def fixed_point_step(prep: PreparedData, gamma, p, x0) -> np.ndarray:
    """One multiplicative update p_j <- p_j * Psibar_j, renormalized."""
    lam = hazard_total(prep, gamma, x0)
    factor = score_p(prep, gamma, p, x0) / lam
    if np.any(factor < -1e-10):
        raise BaselineError("negative fixed-point factor; x0 must minimize gamma'x")
    new = p * np.maximum(factor, 0.0)
    return new / new.sum()


def kkt_residual(prep: PreparedData, gamma, p, x0, p_tol: float = 1e-7) -> float:
    """Largest violation of lambda_n >= sum Psi_j (equality where p_j > p_tol)."""
    gap = score_p(prep, gamma, p, x0) - hazard_total(prep, gamma, x0)
    viol = np.maximum(gap, 0.0)
    active = p > p_tol
    viol[active] = np.abs(gap[active])
    return float(viol.max())


@dataclass
class PSolution:
    p: np.ndarray
    kkt: float
    iterations: int
    loglik: float
    trace: np.ndarray


def _qp_direction(g, h, p, lam=None):
    """Reference (numpy) version of the Newton direction on the simplex.

    Maximizes g'd + d'(H - D)d/2 subject to sum(d) = 0 and d >= -p by the
    primal active-set method from d = 0.  The compiled kernel does the same.
    """
    k = len(p)
    # each coordinate gets a ridge relative to its own curvature, so one
    # stiff weight does not damp the others
    a_mat = h - np.diag(1e-10 * np.maximum(np.abs(np.diag(h)), 1.0))
    d = np.zeros(k)
    free = p > 0
    for _ in range(10 * k + 10):
        c = g + a_mat @ d
        f = np.flatnonzero(free)
        s = np.zeros(k)
        if len(f) >= 2:
            nf = len(f)
            system = np.zeros((nf + 1, nf + 1))
            system[:nf, :nf] = a_mat[np.ix_(f, f)]
            system[:nf, nf] = -1.0
            system[nf, :nf] = 1.0
            sol = np.linalg.solve(system, np.append(-c[f], 0.0))
            s[f] = sol[:nf]
        if np.max(np.abs(s)) <= 1e-15:
            nu = c[f].mean() if len(f) else c.max()
            pinned = np.flatnonzero(~free)
            if len(pinned) == 0:
                break
            j = pinned[np.argmax(c[pinned])]
            if c[j] - nu <= 1e-12 * max(1.0, abs(nu)):
                break
            free[j] = True
            continue
        alpha, block = 1.0, -1
        for j in f:
            if s[j] < 0:
                r = (-p[j] - d[j]) / s[j]
                if r < alpha:
                    alpha, block = r, j
        d += max(alpha, 0.0) * s
        if block >= 0:
            d[block] = -p[block]
            free[block] = False
    return d


def _with_weight(p, j, t):
    q = p * ((1.0 - t) / (1.0 - p[j]))
    q[j] = t
    return q


def _safe_loglik(args, p, score):
    # a subject whose whole likelihood sits on dropped weights divides by zero
    try:
        ll = _kernels.score_and_loglik(*args, p, score)
    except ZeroDivisionError:
        return -np.inf
    return ll if np.isfinite(ll) else -np.inf


def _settle_coordinate(args, lam, p, j, score):
    """Maximize over p_j along the segment that rescales the other weights.

    Along that segment the log-likelihood is concave with slope
    (score_j - lam) / (1 - t), so the sign of the KKT gap brackets the
    maximizer.  A nonpositive gap at p_j = 0 drops the weight; otherwise
    the root is bisected on a log scale, since the inward-pointing region
    can be many orders of magnitude thin.
    """
    zero = _with_weight(p, j, 0.0)
    if _safe_loglik(args, zero, score) == -np.inf:
        return p
    if score[j] <= lam:
        return zero
    lo, hi = _LOG_FLOOR, p[j]
    _kernels.score_and_loglik(*args, _with_weight(p, j, lo), score)
    if score[j] <= lam:
        return zero
    for _ in range(_BISECT_STEPS):
        mid = math.sqrt(lo * hi)
        if not lo < mid < hi:
            break
        _kernels.score_and_loglik(*args, _with_weight(p, j, mid), score)
        if score[j] > lam:
            lo = mid
        else:
            hi = mid
    return _with_weight(p, j, lo)


def _face_newton(prep: PreparedData, eta_e, eta_c, lam: float, p, max_iter: int = 100) -> np.ndarray:
    """Projected Newton ascent over the simplex for fixed gamma.

    Each step solves the bound-constrained quadratic model, then backtracks
    along the feasible segment until the log-likelihood does not drop.
    """
    args = (prep.dens_e, prep.surv_e, eta_e, prep.surv_1, prep.surv_2, eta_c)
    p = p.copy()
    k_all = len(p)
    score = np.empty(k_all)
    hess = np.empty((k_all, k_all))
    _kernels.score_and_loglik(*args, p, score)
    # vanishing weights make the Hessian hopelessly ill-conditioned
    p[(p < _DROP_TOL) & (score < lam)] = 0.0
    p /= p.sum()
    frozen = np.zeros(k_all, dtype=bool)
    for _ in range(max_iter):
        ll = _kernels.score_hess_loglik(*args, p, score, hess)
        if not np.isfinite(ll):
            break
        # near zero a term p_j**eta with 1 < eta < 2 has unbounded curvature,
        # so Newton creeps toward the bound; settle such weights one at a time
        small = np.flatnonzero((p > 0) & (p < _SNAP_TOL) & (score < lam))
        if small.size and small.size < np.count_nonzero(p):
            moved = False
            for j in small:
                cand = _settle_coordinate(args, lam, p, j, score)
                if cand[j] > 0.5 * p[j]:
                    continue  # a nearby root is Newton's job
                ll_cand = _safe_loglik(args, cand, score)
                if ll_cand >= ll:
                    p, ll, moved = cand, ll_cand, True
            if moved:
                continue
            _kernels.score_hess_loglik(*args, p, score, hess)
        # frozen zeros stay out of the quadratic model
        g = np.where(frozen, np.minimum(score, lam - 1.0), score)
        try:
            d = _kernels.qp_direction(g, hess, p, lam)
        except Exception:  # numba surfaces a singular LAPACK solve as a plain exception
            d = _qp_direction(g, hess, p, lam)
        # d sums to zero, so testing the gap avoids cancellation against lam
        if not np.all(np.isfinite(d)) or (g - lam) @ d <= 0:
            break
        t = 1.0
        for _ in range(40):
            cand = np.maximum(p + t * d, 0.0)
            cand /= cand.sum()
            if _kernels.score_and_loglik(*args, cand, score) >= ll:
                break
            t *= 0.5
        else:
            # an inward score at p_j = 0 may hold only over a sliver too thin
            # to step into; keep such weights at zero and try again
            entering = (p == 0) & (d > 0) & ~frozen
            if not entering.any():
                break
            frozen |= entering
            continue
        step = np.max(np.abs(cand - p))
        p = cand
        if step < 1e-15:
            break
    return p


def _settled_zeros(prep, gamma, p, x0, ll, want, p_tol):
    """Vanishing weights whose positive KKT gap cannot be realized at resolution ``p_tol``.

    With a factor S2**eta, 1 < eta < 2, the score at p_j ~ 0 can point
    inward while the log-likelihood already falls at p_j = p_tol.  By
    concavity the maximizer along that coordinate then lies in [0, p_tol],
    which is as exact as the KKT test resolves weights anyway.
    """
    settled = np.zeros(len(p), dtype=bool)
    for j in np.flatnonzero(want):
        cand = p * (1.0 - p_tol) / (1.0 - p[j])
        cand[j] = p_tol
        settled[j] = loglik(prep, gamma, cand, x0) < ll
    return settled


def solve_p(prep: PreparedData, gamma, p0, config: FitConfig = FitConfig(), x0=None,
            polish: bool = True) -> PSolution:
    """Maximize the log-likelihood over the simplex for fixed gamma.

    Runs the multiplicative fixed-point iteration; with ``polish`` it is
    interleaved with Newton steps on the current support, and the
    fixed-point pass always has the last word on the KKT check.  ``x0``
    defaults to the empirical baseline for ``gamma``.  Raises
    :class:`NonConvergenceError` if ``config.max_fixed_point_iters`` is
    used up with the KKT residual still above ``config.kkt_tol``.
    """
    gamma = np.asarray(gamma, dtype=float).reshape(-1)
    if x0 is None:
        x0, _ = empirical_baseline(gamma, prep.x_all)
    p = np.asarray(p0, dtype=float)
    if len(p) != prep.m_star + 1:
        raise ValueError(f"expected {prep.m_star + 1} starting weights, got {len(p)}")
    if np.any(p <= 0):
        raise ValueError("starting weights must be strictly inside the simplex")
    p = p / p.sum()
    eta_e, eta_c = _etas(prep, gamma, x0)
    lam = float(eta_e.sum() + eta_c.sum())
    budget = config.max_fixed_point_iters
    chunk = min(budget, _POLISH_AFTER) if polish else budget
    buf = np.empty(budget + 1)
    traces = []
    used = 0
    while True:
        n_iter = min(chunk, budget - used)
        p, iters, ll, kkt, status = _kernels.fixed_point_solve(
            prep.dens_e, prep.surv_e, eta_e, prep.surv_1, prep.surv_2, eta_c,
            p, lam, n_iter, config.p_tol, config.loglik_tol, config.kkt_tol, buf,
        )
        traces.append(buf[: iters + 1].copy())
        used += iters
        if status == _kernels.STATUS_SINGULAR:
            raise SingularityError("log-likelihood is -inf at the current weights")
        if status == _kernels.STATUS_NEGATIVE:
            raise BaselineError("negative fixed-point factor; x0 must minimize gamma'x")
        if status == _kernels.STATUS_OK or used >= budget:
            break
        p = _face_newton(prep, eta_e, eta_c, lam, p)
        # weights dropped by the Newton pass come back if the KKT test wants them
        gap = score_p(prep, gamma, p, x0) - lam
        ll = loglik(prep, gamma, p, x0)
        want = (p < config.p_tol) & (gap > 0.5 * config.kkt_tol)
        settled = _settled_zeros(prep, gamma, p, x0, ll, want, config.p_tol)
        revive = want & ~settled
        if not revive.any():
            kkt = _kernels.kkt_from_score(np.where(settled, lam, gap + lam), lam, p, config.p_tol)
            if kkt < config.kkt_tol:
                status = _kernels.STATUS_OK
                traces.append(np.array([ll]))
                break
        if revive.any():
            p[revive] = config.interior_eps / len(p)
            p /= p.sum()
        chunk = _CHECK_CHUNK
    trace = np.concatenate(traces)
    if status != _kernels.STATUS_OK and kkt > config.kkt_tol:
        raise NonConvergenceError(
            f"fixed-point iteration used {used} iterations, KKT residual {kkt:.3g}",
            last=p, residual=kkt,
        )
    return PSolution(p, float(kkt), int(used), float(ll), trace)


def newton_gamma(prep: PreparedData, p, gamma0, x0, config: FitConfig = FitConfig()) -> tuple[np.ndarray, int]:
    """Damped Newton-Raphson for gamma at fixed p and baseline.

    Steps are halved (up to 30 times) until the log-likelihood does not
    decrease.  Returns the maximizer and the number of Newton steps.
    """
    gamma = np.array(gamma0, dtype=float).reshape(-1)
    ll = loglik(prep, gamma, p, x0)
    if not np.isfinite(ll):
        raise SingularityError("log-likelihood is -inf at the starting gamma")
    for it in range(config.max_newton_iters):
        grad = score_gamma(prep, gamma, p, x0)
        if np.max(np.abs(grad)) < config.gamma_tol:
            return gamma, it
        hess = hess_gamma(prep, gamma, p, x0)
        try:
            step = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError as exc:
            raise SingularityError("singular Hessian in gamma") from exc
        if not np.all(np.isfinite(step)):
            raise SingularityError("singular Hessian in gamma")
        scale = 1.0
        for _ in range(_MAX_HALVINGS + 1):
            cand = gamma + scale * step
            ll_cand = loglik(prep, cand, p, x0)
            if ll_cand >= ll:
                break
            scale *= 0.5
        else:
            # no ascent left at machine precision
            return gamma, it
        if np.array_equal(cand, gamma):
            return gamma, it
        gamma, ll = cand, ll_cand
    grad = score_gamma(prep, gamma, p, x0)
    if np.max(np.abs(grad)) < config.gamma_tol:
        return gamma, config.max_newton_iters
    raise NonConvergenceError(
        f"Newton-Raphson did not converge in {config.max_newton_iters} steps (|grad|={np.max(np.abs(grad)):.3g})",
        last=gamma, residual=float(np.max(np.abs(grad))),
    )


def rebase_weights(p, m: int, has_tail: bool, gamma, x0_old, x0_new, eps: float) -> np.ndarray:
    """Seed weights for a new baseline from the conditional density at x0_new.

    p_i proportional to f_m(i/m | x0_new), i <= m, and the tail weight becomes
    p_tail ** exp(gamma'(x0_new - x0_old)).
    """
    shift = float(np.asarray(gamma) @ (np.asarray(x0_new) - np.asarray(x0_old)))
    eta = np.exp(shift)
    nodes = np.arange(m + 1) / m
    core = np.asarray(p[: m + 1], dtype=float)
    p_tail = float(p[m + 1]) if has_tail else 0.0
    s0 = beta_survival_matrix(m, nodes) @ core + p_tail
    # survival vanishes only at t=1 without a tail; step back half a node there
    nodes = np.where(s0 > 0, nodes, 1.0 - 0.5 / m)
    f0 = beta_density_matrix(m, nodes) @ core
    s0 = beta_survival_matrix(m, nodes) @ core + p_tail
    with np.errstate(divide="ignore"):
        dens = eta * np.exp((eta - 1.0) * np.log(s0)) * f0
    new_tail = p_tail**eta if has_tail else 0.0
    total = dens.sum()
    if not np.isfinite(total) or total <= 0:
        dens = np.ones(m + 1)
        total = float(m + 1)
    seed = dens * (1.0 - new_tail) / total
    if has_tail:
        seed = np.append(seed, new_tail)
    if np.any(seed <= 0):
        seed = interior_project(seed, eps)
    return seed / seed.sum()


def _movable(prep: PreparedData, p, x0, config: FitConfig):
    """Weights safe to move gamma from.

    At gamma = 0 the likelihood ignores S at exact times, so the optimal p
    may put S(t) = 0 there; any change of gamma then sends the likelihood
    to -inf.  Such weights are pulled into the interior.  Subjects sitting
    at x0 keep eta = 1 whatever gamma is and do not count.
    """
    dead = prep.surv_e @ p <= 0
    if np.any(dead & np.any(prep.x_e != x0, axis=1)):
        return interior_project(p, config.interior_eps)
    return p


def _standard_errors(prep, gamma, p, x0):
    try:
        return observed_information(prep, gamma, p, x0)[1]
    except (ArithmeticError, ValueError) as exc:
        log.debug("standard errors unavailable: %s", exc)
        return None


@dataclass
class _State:
    gamma: np.ndarray
    p: np.ndarray
    x0: np.ndarray
    x0_idx: int
    loglik: float
    kkt: float


def _p_at(prep, dataset, state: _State, gamma_new, m, has_tail, config, report) -> _State:
    """Baseline for ``gamma_new`` plus the weights maximizing the likelihood there."""
    x0_new, idx_new = empirical_baseline(gamma_new, dataset.x)
    p = state.p
    if abs(float(gamma_new @ (x0_new - state.x0))) > _REBASE_TOL:
        seed = rebase_weights(p, m, has_tail, gamma_new, state.x0, x0_new, config.interior_eps)
        report.rebases += 1
    else:
        seed = p if np.all(p > 0) else interior_project(p, config.interior_eps)
    sol = solve_p(prep, gamma_new, seed, config, x0_new)
    report.fixed_point_iters += sol.iterations
    return _State(gamma_new, sol.p, x0_new, idx_new, sol.loglik, sol.kkt)


def _alternate(prep, dataset, state: _State, m, has_tail, config, report) -> _State:
    """One pass of the alternating algorithm: Newton in gamma, then p."""
    gamma_new, n_newton = newton_gamma(prep, _movable(prep, state.p, state.x0, config), state.gamma, state.x0, config)
    report.newton_iters += n_newton
    return _p_at(prep, dataset, state, gamma_new, m, has_tail, config, report)


def _squarem_gamma(g0, g1, g2):
    """Squared-extrapolation point from three successive gamma iterates, or None."""
    r = g1 - g0
    v = g2 - 2.0 * g1 + g0
    nv = np.linalg.norm(v)
    if nv == 0 or not np.isfinite(nv):
        return None
    alpha = min(-np.linalg.norm(r) / nv, -1.0)
    return g0 - 2.0 * alpha * r + alpha * alpha * v


def mable_fit(
    dataset: Dataset,
    m: int,
    gamma_init=None,
    config: FitConfig = FitConfig(),
    has_tail: Optional[bool] = None,
    p_init=None,
    prep: Optional[PreparedData] = None,
) -> tuple[BernsteinPHModel, FitReport]:
    """Maximum approximate Bernstein likelihood fit of (gamma, p) at degree m.

    Alternates Newton steps in gamma with the fixed-point solve in p.  With
    ``config.accelerate`` every second pass is followed by a squared
    extrapolation of gamma, kept only when it raises the likelihood; the
    stopping rule is always checked across a plain alternating pass.
    ``p_init`` overrides the uniform starting weights (it must match the
    baseline chosen from ``gamma_init``).
    """
    if has_tail is None:
        has_tail = dataset.default_tail()
    if dataset.d == 0:
        return fit_no_covariate(dataset, m, config, has_tail=has_tail, p_init=p_init, prep=prep)
    if m < 1:
        raise ValueError("degree must be at least 1 with covariates")
    prep = prep or prepare(dataset, m, has_tail)
    k = prep.m_star + 1
    gamma = np.zeros(dataset.d) if gamma_init is None else np.asarray(gamma_init, dtype=float).reshape(-1)
    if gamma.shape != (dataset.d,):
        raise ValueError(f"gamma_init must have {dataset.d} components")
    x0, x0_idx = empirical_baseline(gamma, dataset.x)
    report = FitReport()
    p_start = uniform_weights(k) if p_init is None else np.asarray(p_init, dtype=float)
    if np.any(p_start <= 0):
        p_start = interior_project(p_start, config.interior_eps)
    try:
        sol = solve_p(prep, gamma, p_start, config, x0)
    except NonConvergenceError as exc:
        exc.report = report
        raise
    report.fixed_point_iters += sol.iterations
    state = _State(gamma, sol.p, x0, x0_idx, sol.loglik, sol.kkt)
    report.loglik_trace.append(state.loglik)
    # extrapolation only uses iterates that share one baseline subject
    history = [state.gamma]
    converged = False
    s = 0
    while s < config.max_outer_iters:
        s += 1
        try:
            new = _alternate(prep, dataset, state, m, has_tail, config, report)
        except NonConvergenceError as exc:
            _fill(report, state.gamma, state.p, state.x0, state.x0_idx, state.kkt, s - 1)
            exc.report = report
            raise
        d_ll = new.loglik - state.loglik
        d_gamma = np.max(np.abs(new.gamma - state.gamma))
        prev_idx = state.x0_idx
        state = new
        report.loglik_trace.append(state.loglik)
        if abs(d_ll) < config.loglik_tol and d_gamma < config.gamma_tol:
            converged = True
            break
        if state.x0_idx != prev_idx:
            history = []
        history.append(state.gamma)
        if config.accelerate and len(history) == 3:
            g_x = _squarem_gamma(*history)
            history = [state.gamma]
            # crossing to another baseline subject can land in a different basin
            if g_x is not None and empirical_baseline(g_x, dataset.x)[1] == state.x0_idx:
                try:
                    trial = _p_at(prep, dataset, state, g_x, m, has_tail, config, report)
                except (ArithmeticError, NonConvergenceError) as exc:
                    log.debug("extrapolated gamma rejected: %s", exc)
                    continue
                if trial.loglik > state.loglik:
                    state = trial
                    history = [state.gamma]
                    report.loglik_trace.append(state.loglik)
    _fill(report, state.gamma, state.p, state.x0, state.x0_idx, state.kkt, s)
    report.converged = converged
    report.standard_errors = _standard_errors(prep, state.gamma, state.p, state.x0)
    model = BernsteinPHModel(m, has_tail, state.p, state.gamma, state.x0, dataset.tau)
    if not converged:
        raise NonConvergenceError(
            f"alternating algorithm did not converge in {config.max_outer_iters} outer iterations",
            last=model, residual=state.kkt, report=report,
        )
    return model, report


def _fill(report, gamma, p, x0, x0_idx, kkt, outer):
    report.gamma_hat = np.asarray(gamma, dtype=float).copy()
    report.p_hat = np.asarray(p, dtype=float).copy()
    report.x0_hat = np.asarray(x0, dtype=float).copy()
    report.x0_index = int(x0_idx)
    report.kkt_residual = float(kkt)
    report.outer_iters = int(outer)


def fit_no_covariate(
    dataset: Dataset,
    m: int,
    config: FitConfig = FitConfig(),
    has_tail: Optional[bool] = None,
    p_init=None,
    prep: Optional[PreparedData] = None,
) -> tuple[BernsteinPHModel, FitReport]:
    """EM iteration p_j <- (p_j / n) sum_i Psi_j for data without covariates."""
    if has_tail is None:
        has_tail = dataset.default_tail()
    if m < 0:
        raise ValueError("degree must be nonnegative")
    prep = prep or prepare(dataset.with_covariates(np.zeros((dataset.n, 0))), m, has_tail)
    k = prep.m_star + 1
    p0 = uniform_weights(k) if p_init is None else np.asarray(p_init, dtype=float)
    if np.any(p0 <= 0):
        p0 = interior_project(p0, config.interior_eps)
    report = FitReport()
    try:
        sol = solve_p(prep, np.zeros(0), p0, config, np.zeros(0))
    except NonConvergenceError as exc:
        exc.report = report
        raise
    report.loglik_trace = [float(v) for v in sol.trace]
    report.fixed_point_iters = sol.iterations
    _fill(report, np.zeros(0), sol.p, np.zeros(0), 0, sol.kkt, 0)
    report.converged = True
    return BernsteinPHModel(m, has_tail, sol.p, np.zeros(0), np.zeros(0), dataset.tau), report


@dataclass
class TwoSampleFit:
    """Two-sample PH fit reported in the caller's group labelling.

    ``gamma`` is the log hazard ratio of group 1 versus group 0.  ``model``
    is the working fit, done with whichever labelling gives gamma >= 0.
    """

    gamma: float
    model: BernsteinPHModel
    report: FitReport
    swapped: bool

    def survival(self, t, group: int):
        x = (1 - group) if self.swapped else group
        return self.model.conditional_survival(t, [float(x)])

    def density(self, t, group: int):
        x = (1 - group) if self.swapped else group
        return self.model.conditional_density(t, [float(x)])


def two_sample_fit(dataset: Dataset, m: int, config: FitConfig = FitConfig(), has_tail: Optional[bool] = None) -> TwoSampleFit:
    if dataset.d != 1 or not np.all(np.isin(dataset.x[:, 0], (0.0, 1.0))):
        raise DataError("two-sample fit needs a single 0/1 covariate")
    model, report = mable_fit(dataset, m, None, config, has_tail)
    if model.gamma[0] >= 0:
        return TwoSampleFit(float(model.gamma[0]), model, report, False)
    flipped = dataset.with_covariates(1.0 - dataset.x)
    model, report = mable_fit(flipped, m, -model.gamma, config, has_tail)
    return TwoSampleFit(float(-model.gamma[0]), model, report, True)
