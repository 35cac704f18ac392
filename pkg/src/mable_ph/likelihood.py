"""Bernstein log-likelihood of the PH model and its derivatives.

Notation used below, per subject: ``eta = exp(gamma'(x - x0))``; exact
subjects contribute through ``f = beta_m(t) @ p`` and ``S = Bbar_m(t) @ p``;
censored subjects through ``S1 = S(t1)``, ``S2 = S(t2)`` and the ratio
``r = (S2/S1)**eta``, which is how ``S1**eta - S2**eta`` is kept stable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bernstein import beta_density_matrix, beta_survival_matrix
from .errors import DegenerateError, SingularityError
from .model import BernsteinPHModel, Dataset, Observation


@dataclass
class PreparedData:
    """Basis rows cached for one dataset, degree and tail choice.

    Column ``m+1`` (present when ``has_tail``) is the tail component: its
    density column is zero and its survival column is one on [0, 1] and zero
    at infinity.
    """

    m: int
    has_tail: bool
    dens_e: np.ndarray
    surv_e: np.ndarray
    surv_1: np.ndarray
    surv_2: np.ndarray
    x_e: np.ndarray
    x_c: np.ndarray
    n: int

    @property
    def m_star(self) -> int:
        return self.m + 1 if self.has_tail else self.m

    @property
    def d(self) -> int:
        return self.x_e.shape[1]

    @property
    def x_all(self) -> np.ndarray:
        return np.vstack([self.x_e, self.x_c])


def prepare(dataset: Dataset, m: int, has_tail: bool) -> PreparedData:
    exact = dataset.delta == 0
    cens = ~exact
    t_e = dataset.t1[exact]
    t1 = dataset.t1[cens]
    t2 = dataset.t2[cens]
    right = np.isinf(t2)
    dens_e = beta_density_matrix(m, t_e)
    surv_e = beta_survival_matrix(m, t_e)
    surv_1 = beta_survival_matrix(m, t1)
    surv_2 = beta_survival_matrix(m, np.where(right, 1.0, t2))
    surv_2[right] = 0.0
    if has_tail:
        dens_e = np.hstack([dens_e, np.zeros((len(t_e), 1))])
        surv_e = np.hstack([surv_e, np.ones((len(t_e), 1))])
        surv_1 = np.hstack([surv_1, np.ones((len(t1), 1))])
        surv_2 = np.hstack([surv_2, (~right).astype(float)[:, None]])
    return PreparedData(
        m, has_tail, dens_e, surv_e, surv_1, surv_2,
        dataset.x[exact], dataset.x[cens], dataset.n,
    )


def _lin(x, gamma, x0):
    if x.shape[1] == 0:
        return np.zeros(x.shape[0])
    return (x - x0) @ gamma


def _safe_log(v):
    with np.errstate(divide="ignore"):
        return np.log(v)


class _Terms:
    """Per-subject quantities shared by the likelihood and its derivatives."""

    def __init__(self, prep: PreparedData, gamma, p, x0):
        gamma = np.asarray(gamma, dtype=float).reshape(-1)
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        self.lin_e = _lin(prep.x_e, gamma, x0)
        self.lin_c = _lin(prep.x_c, gamma, x0)
        self.eta_e = np.exp(self.lin_e)
        self.eta_c = np.exp(self.lin_c)
        self.f = prep.dens_e @ p
        self.s = prep.surv_e @ p
        self.s1 = prep.surv_1 @ p
        self.s2 = prep.surv_2 @ p
        # A = eta * log S is log S(t|x)
        self.a_e = self.eta_e * _safe_log(self.s)
        self.a1 = self.eta_c * _safe_log(self.s1)
        self.a2 = self.eta_c * _safe_log(self.s2)
        with np.errstate(invalid="ignore", over="ignore"):
            self.r = np.where(self.s2 > 0, np.exp(self.a2 - self.a1), 0.0)
        self.pos2 = self.s2 > 0
        # at y2 = infinity S(y2) is 0 for every p and carries no derivative
        self.dead2 = ~np.any(prep.surv_2 != 0, axis=1)

    def loglik_parts(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            tail_e = np.where(self.eta_e == 1.0, 0.0, (self.eta_e - 1.0) * _safe_log(self.s))
            ll_e = self.lin_e + _safe_log(self.f) + tail_e
            ll_c = np.where(self.s1 > 0, self.a1 + np.log1p(-self.r), -np.inf)
        ll_e = np.where(np.isnan(ll_e), -np.inf, ll_e)
        ll_c = np.where(np.isnan(ll_c), -np.inf, ll_c)
        return ll_e, ll_c

    def check_finite(self, what, gamma=False, moving=None):
        if np.any(self.f <= 0) or np.any(self.s1 <= 0) or np.any(self.r >= 1.0):
            raise SingularityError(f"{what}: a likelihood contribution vanishes")
        # a subject sitting at x0 has eta == 1 whatever gamma is, so its log S
        # never enters the gamma derivatives
        hit = self.eta_e != 1.0
        if gamma:
            hit = hit | moving
        if np.any((self.s <= 0) & hit):
            raise SingularityError(f"{what}: survival vanishes at an exact time")


def loglik(prep: PreparedData, gamma, p, x0) -> float:
    """Sum of per-subject contributions; -inf when any contribution is zero."""
    ll_e, ll_c = _Terms(prep, gamma, p, x0).loglik_parts()
    return float(np.sum(ll_e) + np.sum(ll_c))


def loglik_contributions(prep: PreparedData, gamma, p, x0) -> np.ndarray:
    ll_e, ll_c = _Terms(prep, gamma, p, x0).loglik_parts()
    return np.concatenate([ll_e, ll_c])


def psi_matrix(prep: PreparedData, gamma, p, x0, terms: _Terms | None = None) -> np.ndarray:
    """Rows Psi(gamma, p; z_i) = d loglik_i / dp, exact subjects first."""
    t = terms or _Terms(prep, gamma, p, x0)
    t.check_finite("gradient in p")
    with np.errstate(divide="ignore", invalid="ignore"):
        c_s = np.where(t.eta_e == 1.0, 0.0, (t.eta_e - 1.0) / t.s)
        w1 = t.eta_c / ((1.0 - t.r) * t.s1)
        w2 = np.where(t.pos2, t.eta_c * t.r / ((1.0 - t.r) * t.s2), _w2_at_zero(t))
    psi_e = prep.dens_e / t.f[:, None] + c_s[:, None] * prep.surv_e
    if not np.all(np.isfinite(w2)):
        raise SingularityError("gradient in p: S(y2) = 0 with eta < 1 is unbounded")
    psi_c = w1[:, None] * prep.surv_1 - w2[:, None] * prep.surv_2
    return np.vstack([psi_e, psi_c])


def _w2_at_zero(t: _Terms):
    # limit of eta S2^(eta-1) / (S1^eta - S2^eta) as S2 -> 0
    eta = t.eta_c
    with np.errstate(divide="ignore"):
        lim = np.where(eta == 1.0, 1.0 / t.s1, np.where(eta > 1.0, 0.0, np.inf))
    return np.where(t.dead2, 0.0, lim)


def _c2_at_zero(t: _Terms):
    # limit of eta (eta-1) S2^(eta-2) / (S1^eta - S2^eta) as S2 -> 0
    eta = t.eta_c
    with np.errstate(divide="ignore"):
        at2 = 2.0 / t.s1**2
    lim = np.where((eta == 1.0) | (eta > 2.0), 0.0, np.where(eta == 2.0, at2, np.inf))
    return np.where(t.dead2, 0.0, lim)


def score_p(prep: PreparedData, gamma, p, x0) -> np.ndarray:
    return psi_matrix(prep, gamma, p, x0).sum(axis=0)


def hess_p(prep: PreparedData, gamma, p, x0) -> np.ndarray:
    t = _Terms(prep, gamma, p, x0)
    t.check_finite("Hessian in p")
    with np.errstate(divide="ignore", invalid="ignore"):
        c_s = np.where(t.eta_e == 1.0, 0.0, (t.eta_e - 1.0) / t.s**2)
        k = t.eta_c * (t.eta_c - 1.0) / (1.0 - t.r)
        c1 = k / t.s1**2
        c2 = np.where(t.pos2, k * (t.r / t.s2) / t.s2, _c2_at_zero(t))
    if not np.all(np.isfinite(c2)):
        raise SingularityError("Hessian in p: S(y2) = 0 with 1 < eta < 2 has unbounded curvature")
    de = prep.dens_e / t.f[:, None]
    h = -(de.T @ de) - (prep.surv_e.T * c_s) @ prep.surv_e
    h += (prep.surv_1.T * c1) @ prep.surv_1 - (prep.surv_2.T * c2) @ prep.surv_2
    psi_c = psi_matrix(prep, gamma, p, x0, t)[len(t.f):]
    h -= psi_c.T @ psi_c
    return 0.5 * (h + h.T)


def score_gamma(prep: PreparedData, gamma, p, x0) -> np.ndarray:
    t = _Terms(prep, gamma, p, x0)
    xe = x_tilde(prep.x_e, x0)
    a_e = _gamma_ready(t, xe, "gradient in gamma")
    g_c = _interval_g(t)
    return xe.T @ (1.0 + a_e) + x_tilde(prep.x_c, x0).T @ g_c


def _gamma_ready(t: _Terms, xe, what):
    moving = np.any(xe != 0, axis=1)
    t.check_finite(what, gamma=True, moving=moving)
    return np.where(moving, t.a_e, 0.0)


def _interval_g(t: _Terms):
    # (A1 - r A2) / (1 - r), with r*A2 -> 0 when S2 = 0
    ra2 = t.r * np.where(t.pos2, t.a2, 0.0)
    return (t.a1 - ra2) / (1.0 - t.r)


def x_tilde(x, x0):
    return x - np.asarray(x0, dtype=float).reshape(1, -1)


def hess_gamma(prep: PreparedData, gamma, p, x0) -> np.ndarray:
    t = _Terms(prep, gamma, p, x0)
    xe = x_tilde(prep.x_e, x0)
    a_e = _gamma_ready(t, xe, "Hessian in gamma")
    g = _interval_g(t)
    a2 = np.where(t.pos2, t.a2, 0.0)
    second = (t.a1 * t.a1 + t.a1 - t.r * (a2 * a2 + a2)) / (1.0 - t.r)
    w_c = second - g * g
    xc = x_tilde(prep.x_c, x0)
    h = (xe.T * a_e) @ xe + (xc.T * w_c) @ xc
    return 0.5 * (h + h.T)


def observed_information(prep: PreparedData, gamma, p, x0, cond_max: float = 1e12):
    """Average information -(1/n) d2 loglik / dgamma2 and standard errors."""
    h = hess_gamma(prep, gamma, p, x0)
    info = -h / prep.n
    if info.size == 0:
        raise DegenerateError("no covariates: information matrix is empty")
    if not np.all(np.isfinite(info)) or np.linalg.cond(info) > cond_max:
        raise DegenerateError("observed information is numerically singular")
    cov = np.linalg.inv(prep.n * info)
    diag = np.diag(cov)
    if np.any(diag <= 0):
        raise DegenerateError("observed information is not positive definite")
    return info, np.sqrt(diag)


# Model/dataset level wrappers ------------------------------------------------

def _prep_for(model: BernsteinPHModel, dataset: Dataset) -> PreparedData:
    if dataset.tau != model.tau:
        raise ValueError(f"dataset tau {dataset.tau} differs from model tau {model.tau}")
    return prepare(dataset, model.m, model.has_tail)


def loglik_total(model: BernsteinPHModel, dataset: Dataset) -> float:
    if dataset.n == 0:
        return 0.0
    return loglik(_prep_for(model, dataset), model.gamma, model.p, model.x0)


def loglik_obs(model: BernsteinPHModel, obs: Observation) -> float:
    """Contribution of one observation whose times are already rescaled to [0, 1]."""
    ds = Dataset.from_arrays([obs.y1], [obs.y2], [obs.delta], np.array([obs.x]).reshape(1, -1), tau=1.0)
    return loglik(prepare(ds, model.m, model.has_tail), model.gamma, model.p, model.x0)


def grad_p(model: BernsteinPHModel, dataset: Dataset) -> np.ndarray:
    return score_p(_prep_for(model, dataset), model.gamma, model.p, model.x0)


def hessian_p(model: BernsteinPHModel, dataset: Dataset) -> np.ndarray:
    return hess_p(_prep_for(model, dataset), model.gamma, model.p, model.x0)


def grad_gamma(model: BernsteinPHModel, dataset: Dataset) -> np.ndarray:
    return score_gamma(_prep_for(model, dataset), model.gamma, model.p, model.x0)


def hessian_gamma(model: BernsteinPHModel, dataset: Dataset) -> np.ndarray:
    return hess_gamma(_prep_for(model, dataset), model.gamma, model.p, model.x0)


def information(model: BernsteinPHModel, dataset: Dataset):
    return observed_information(_prep_for(model, dataset), model.gamma, model.p, model.x0)
