import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import random_dataset
from mable_ph.dataio import format_report, model_from_report, parse_observations, parse_report, write_observations
from mable_ph.errors import DataError


def test_blank_and_inf_upper_bounds_mean_right_censoring():
    ds = parse_observations("y1,y2,delta\n1,,1\n2,inf,1\n0.5,0.5,0\n")
    assert np.isinf(ds.y2[:2]).all()
    assert ds.tau == 2.0 and not ds.tau_known


def test_known_tau_is_kept():
    ds = parse_observations("y1,y2,delta\n0,1,1\n", tau=4.0)
    assert ds.tau == 4.0 and ds.tau_known


def test_blank_lines_are_skipped():
    ds = parse_observations("y1,y2,delta,x1\n0,1,1,2\n\n1,2,1,3\n")
    assert ds.n == 2
    np.testing.assert_array_equal(ds.x[:, 0], [2.0, 3.0])


@given(st.integers(0, 2**32 - 1), st.integers(0, 3))
def test_observation_csv_round_trip(seed, d):
    ds = random_dataset(np.random.default_rng(seed), 12, d)
    back = parse_observations(write_observations(ds))
    np.testing.assert_array_equal(back.y1, ds.y1)
    np.testing.assert_array_equal(back.y2, ds.y2)
    np.testing.assert_array_equal(back.delta, ds.delta)
    np.testing.assert_array_equal(back.x, ds.x)


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=6))
def test_report_floats_survive_text(values):
    text = format_report({"v": values[0]}, {"b": (["i", "w"], list(enumerate(values)))})
    header, blocks = parse_report(text)
    assert float(header["v"]) == values[0]
    assert [float(r[1]) for r in blocks["b"][1]] == values


def test_booleans_and_ints_in_header():
    header, _ = parse_report(format_report({"flag": True, "k": np.int64(3), "s": "ok"}, {}))
    assert header == {"flag": "true", "k": "3", "s": "ok"}


def test_report_without_weights_is_rejected():
    with pytest.raises(DataError):
        model_from_report("m = 2\nhas_tail = false\ntau = 1.0\n")


def test_malformed_header_line():
    with pytest.raises(DataError):
        parse_report("m 2\n")


def test_model_from_minimal_report():
    text = format_report({"m": 1, "has_tail": False, "tau": 2.0}, {"p": (["i", "weight"], [(0, 0.25), (1, 0.75)])})
    mdl = model_from_report(text)
    assert mdl.m == 1 and mdl.d == 0 and mdl.tau == 2.0
    # f(t) = (2 p0 (1-u) + 2 p1 u) / tau with u = t / tau
    assert mdl.baseline_density(1.0) == pytest.approx((0.25 + 0.75) / 2.0, rel=1e-14)
    assert math.isclose(mdl.baseline_survival(0.0), 1.0)
