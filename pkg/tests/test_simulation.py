import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import central_gradient
from mable_ph import simulation
from mable_ph.dataio import write_observations
from mable_ph.errors import NonConvergenceError
from mable_ph.model import Dataset
from mable_ph.optimizer import mable_fit
from mable_ph.simulation import (
    ReplicateResult,
    SimDesign,
    Welford,
    mse_report,
    replicate_rng,
    simulate_weibull_ph,
    weibull_loglik,
    weibull_pmle,
)


def test_design_validation():
    with pytest.raises(ValueError):
        SimDesign(censor_prob=1.0)
    with pytest.raises(ValueError):
        SimDesign(n=5)
    with pytest.raises(ValueError):
        SimDesign(inspections=0)


def test_inspection_window_is_twice_the_95_percent_quantile():
    d = SimDesign()
    q95 = 2.0 * math.sqrt(-math.log(0.05))
    assert d.inspection_window == pytest.approx(2 * q95, rel=1e-14)
    # the quantile really is where the baseline survival hits 5%
    assert d.true_survival(q95) == pytest.approx(0.05, rel=1e-12)


# generator ----------------------------------------------------------------------

def test_weibull_median_without_covariate_effect():
    design = SimDesign(n=100_000, gamma_true=(0.0, 0.0), censor_prob=1e-12)
    ds = simulate_weibull_ph(design, 0)
    assert np.all(ds.delta == 0)
    assert np.median(ds.y1) == pytest.approx(2.0 * math.sqrt(math.log(2.0)), rel=0.01)


def test_censoring_fraction_is_seventy_percent():
    ds = simulate_weibull_ph(SimDesign(n=100_000), 0)
    assert ds.delta.mean() == pytest.approx(0.70, abs=0.01)


def test_censored_intervals_bracket_inspections():
    d = SimDesign(n=2000)
    ds = simulate_weibull_ph(d, 4)
    cens = ds.delta == 1
    assert np.all(ds.y1[cens] < ds.y2[cens])
    finite = np.isfinite(ds.y2) & cens
    assert np.all(ds.y2[finite] <= d.inspection_window)
    # left, interval and right censoring all occur
    assert np.any(ds.y1[cens] == 0) and np.any(~np.isfinite(ds.y2)) and np.any((ds.y1 > 0) & finite)


def test_covariate_distribution():
    ds = simulate_weibull_ph(SimDesign(n=20_000), 1)
    assert ds.x[:, 0].min() >= -1 and ds.x[:, 0].max() <= 1
    assert set(np.unique(ds.x[:, 1])) == {-1.0, 1.0}
    assert ds.x[:, 1].mean() == pytest.approx(0.0, abs=0.03)


def test_replicates_are_deterministic_and_independent_of_order():
    d = SimDesign(n=50)
    first = [write_observations(simulate_weibull_ph(d, r)) for r in (0, 1, 2)]
    backwards = [write_observations(simulate_weibull_ph(d, r)) for r in (2, 1, 0)][::-1]
    assert first == backwards
    assert first[0] != first[1]


def test_replicate_streams_differ_by_seed():
    a = replicate_rng(1, 0).uniform(size=4)
    b = replicate_rng(2, 0).uniform(size=4)
    assert not np.array_equal(a, b)


# parametric oracle ----------------------------------------------------------------

@settings(max_examples=25)
@given(st.integers(0, 10_000), st.floats(-0.5, 0.5), st.floats(0.3, 1.2))
def test_weibull_gradient_matches_finite_differences(r, shift, log_sigma):
    ds = simulate_weibull_ph(SimDesign(n=40), r)
    params = np.array([math.log(2.0) + shift, log_sigma, 0.4, -0.3])
    ll, grad = weibull_loglik(params, ds)
    fd = central_gradient(lambda v: weibull_loglik(v, ds)[0], params, 1e-6)
    assert np.max(np.abs(grad - fd)) <= 1e-5 * max(1.0, np.max(np.abs(grad)))


def test_weibull_fit_is_consistent_on_large_exact_sample():
    ds = simulate_weibull_ph(SimDesign(n=10_000, censor_prob=1e-12), 0)
    fit = weibull_pmle(ds)
    assert fit.theta == pytest.approx(2.0, rel=0.02)
    assert fit.sigma == pytest.approx(2.0, rel=0.02)
    np.testing.assert_allclose(fit.gamma, [0.5, -0.5], atol=0.05)


def test_weibull_fit_on_censored_design_reaches_stationary_point():
    ds = simulate_weibull_ph(SimDesign(), 7)
    fit = weibull_pmle(ds)
    params = np.concatenate([[math.log(fit.theta), math.log(fit.sigma)], fit.gamma])
    _, grad = weibull_loglik(params, ds)
    assert np.max(np.abs(grad)) < 1e-4 * ds.n


def test_constant_covariate_is_unidentifiable():
    ds = simulate_weibull_ph(SimDesign(n=200), 3)
    flat = ds.with_covariates(np.column_stack([ds.x[:, 0], np.ones(ds.n)]))
    fit = weibull_pmle(flat)
    assert fit.unidentifiable == (1,)
    assert math.isnan(fit.gamma[1]) and math.isfinite(fit.gamma[0])


def test_weibull_fit_reports_nonconvergence():
    ds = simulate_weibull_ph(SimDesign(n=60), 0)
    with pytest.raises(NonConvergenceError):
        weibull_pmle(ds, max_iter=1)


# accumulation -----------------------------------------------------------------------

@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=200))
def test_streaming_mean_matches_two_pass(values):
    acc = Welford()
    for v in values:
        acc.add(v * v)
    two_pass = sum(v * v for v in values) / len(values)
    assert acc.value == pytest.approx(two_pass, rel=1e-10, abs=1e-10)


def test_empty_accumulator_is_nan():
    assert np.isnan(Welford(2).value).all()


def test_perfect_estimates_give_zero_mse(monkeypatch):
    design = SimDesign(n=30, replicates=4)
    t_grid = np.linspace(0.0, design.horizon, 100)

    def truth(design, r, methods, config, grid):
        g = {m: np.array(design.gamma_true) for m in methods}
        c = {m: design.true_survival(t_grid) for m in methods}
        return ReplicateResult(r, g, c, {}, {})

    monkeypatch.setattr(simulation, "run_replicate", truth)
    rep = mse_report(design)
    for m in rep.gamma_mse:
        np.testing.assert_array_equal(rep.gamma_mse[m], 0.0)
        np.testing.assert_array_equal(rep.curve_mse[m], 0.0)
        assert rep.completed[m] == 4 and rep.failures[m] == 0


def test_failed_replicates_are_counted_and_skipped(monkeypatch):
    design = SimDesign(n=30, replicates=3)
    t_grid = np.linspace(0.0, design.horizon, 100)

    def flaky(design, r, methods, config, grid):
        g = {"P": np.array([1.5, -0.5])}
        c = {"P": design.true_survival(t_grid)}
        failed = {"P": "boom"} if r == 1 else {}
        return ReplicateResult(r, g, c, {}, failed)

    monkeypatch.setattr(simulation, "run_replicate", flaky)
    rep = mse_report(design, methods=("P",))
    assert rep.failures["P"] == 1 and rep.completed["P"] == 2
    np.testing.assert_allclose(rep.gamma_mse["P"], [1.0, 0.0])


def test_unknown_method_is_rejected():
    with pytest.raises(ValueError):
        mse_report(SimDesign(n=30, replicates=1), methods=("SP",))


def test_small_report_csv_layout():
    rep = mse_report(SimDesign(n=30, replicates=2))
    table = rep.table_csv().strip().splitlines()
    assert table[0] == "method,n,coefficient,mse,replicates,failures"
    assert len(table) == 1 + 3 * 2
    curve = rep.curve_csv().strip().splitlines()
    assert curve[0] == "t,method,mse"
    assert len(curve) == 1 + 3 * 100


def test_standard_errors_track_replicate_spread():
    design = SimDesign(n=100)
    estimates, ses = [], []
    # forty replicates leave the spread too noisy for a factor-two check
    for r in range(100):
        model, report = mable_fit(simulate_weibull_ph(design, r), 5)
        estimates.append(model.gamma)
        ses.append(report.standard_errors)
    estimates = np.array(estimates)
    sd = estimates.std(axis=0, ddof=1)
    mean_se = np.mean(ses, axis=0)
    # the information treats p as known, so it runs optimistic for gamma1
    assert np.all(mean_se < 2 * sd) and np.all(mean_se > sd / 2)
    # fits land within three empirical standard deviations of the truth
    inside = np.abs(estimates - np.array(design.gamma_true)) < 3 * sd
    assert inside.mean() > 0.95
