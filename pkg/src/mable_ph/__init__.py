"""Bernstein-polynomial proportional hazards regression for interval-censored data.

The baseline density is a finite beta mixture ``f_m(t) = sum_i p_i beta_mi(t)``
on [0, tau] with an optional exponential tail, and covariates act through
``S(t|x) = S(t|x0) ** exp(gamma'(x - x0))``.
"""
from .bernstein import (
    beta_density,
    beta_density_matrix,
    beta_survival,
    beta_survival_matrix,
    elevate_degree,
    regularized_beta,
)
from .degree_selection import (
    DegreeGrid,
    DegreeTable,
    changepoint_select,
    changepoint_statistic,
    profile_loglik_grid,
    select_degree,
)
from .errors import BaselineError, DataError, DegenerateError, NonConvergenceError, SingularityError
from .likelihood import (
    grad_gamma,
    grad_p,
    hessian_gamma,
    hessian_p,
    information,
    loglik_obs,
    loglik_total,
)
from .model import BernsteinPHModel, Dataset, Observation
from .optimizer import (
    FitConfig,
    FitReport,
    empirical_baseline,
    fixed_point_step,
    kkt_residual,
    mable_fit,
    newton_gamma,
    solve_p,
    two_sample_fit,
)
from .simulation import SimDesign, mse_report, simulate_weibull_ph, weibull_pmle

__all__ = [
    "BaselineError", "BernsteinPHModel", "DataError", "Dataset", "DegenerateError",
    "DegreeGrid", "DegreeTable", "FitConfig", "FitReport", "NonConvergenceError",
    "Observation", "SimDesign", "SingularityError",
    "beta_density", "beta_density_matrix", "beta_survival", "beta_survival_matrix",
    "changepoint_select", "changepoint_statistic", "elevate_degree", "empirical_baseline",
    "fixed_point_step", "grad_gamma", "grad_p", "hessian_gamma", "hessian_p", "information",
    "kkt_residual", "loglik_obs", "loglik_total", "mable_fit", "mse_report", "newton_gamma",
    "profile_loglik_grid", "regularized_beta", "select_degree", "simulate_weibull_ph",
    "solve_p", "two_sample_fit", "weibull_pmle",
]
