import math

import numpy as np
import pytest

from helpers import GG_LOGLIK, GG_Y1, GG_Y2
from mable_ph.cli import EXIT_INPUT, EXIT_NONCONVERGED, EXIT_OK, main
from mable_ph.dataio import model_from_report, parse_report, write_observations
from mable_ph.optimizer import mable_fit
from mable_ph.simulation import SimDesign, simulate_weibull_ph


@pytest.fixture
def gg_csv(tmp_path):
    path = tmp_path / "gg.csv"
    rows = ["y1,y2,delta"] + [f"{a},{b},1" for a, b in zip(GG_Y1, GG_Y2)]
    path.write_text("\n".join(rows) + "\n")
    return path


@pytest.fixture(scope="module")
def weibull_data():
    return simulate_weibull_ph(SimDesign(n=80), 11)


@pytest.fixture
def weibull_csv(tmp_path, weibull_data):
    path = tmp_path / "weibull.csv"
    path.write_text(write_observations(weibull_data))
    return path


def read_curve(path):
    rows = np.loadtxt(path, delimiter=",", skiprows=1)
    return rows[:, 0], rows[:, 1].astype(int), rows[:, 2], rows[:, 3]


# fit ------------------------------------------------------------------------------

def test_gentleman_geyer_fit_reports_known_maximum(gg_csv, tmp_path):
    out = tmp_path / "fit.txt"
    assert main(["fit", "--input", str(gg_csv), "--degree", "6", "--output", str(out)]) == EXIT_OK
    header, blocks = parse_report(out.read_text())
    assert float(header["loglik"]) == pytest.approx(GG_LOGLIK, abs=1e-4)
    assert header["status"] == "converged"
    assert header["m"] == "6" and header["d"] == "0"
    # no covariates, so no coefficient section
    assert "gamma" not in blocks and "x0" not in blocks
    assert len(blocks["p"][1]) == 7


def test_report_holds_every_field(weibull_csv, tmp_path):
    out = tmp_path / "fit.txt"
    assert main(["fit", "--input", str(weibull_csv), "--degree", "5", "--output", str(out)]) == EXIT_OK
    header, blocks = parse_report(out.read_text())
    for key in ("m", "tau", "loglik", "kkt_residual", "outer_iters", "fixed_point_iters", "newton_iters", "x0_index"):
        assert key in header
    cols, rows = blocks["gamma"]
    assert cols == ["j", "estimate", "se"] and len(rows) == 2
    assert all(float(r[2]) > 0 for r in rows)
    assert float(header["kkt_residual"]) < 1e-6


def test_report_matches_in_memory_fit(weibull_csv, weibull_data, tmp_path):
    out = tmp_path / "fit.txt"
    main(["fit", "--input", str(weibull_csv), "--degree", "5", "--output", str(out)])
    model, report = mable_fit(weibull_data, 5)
    back = model_from_report(out.read_text())
    np.testing.assert_array_equal(back.p, model.p)
    np.testing.assert_array_equal(back.gamma, model.gamma)
    np.testing.assert_array_equal(back.x0, model.x0)
    assert back.tau == model.tau and back.has_tail == model.has_tail
    assert float(parse_report(out.read_text())[0]["loglik"]) == report.loglik


def test_gamma_init_from_previous_run_reaches_same_loglik(weibull_csv, tmp_path):
    first = tmp_path / "a.txt"
    main(["fit", "--input", str(weibull_csv), "--degree", "5", "--output", str(first)])
    header, blocks = parse_report(first.read_text())
    init = ",".join(r[1] for r in blocks["gamma"][1])
    second = tmp_path / "b.txt"
    code = main(["fit", "--input", str(weibull_csv), "--degree", "5", "--gamma-init", init, "--output", str(second)])
    assert code == EXIT_OK
    again = parse_report(second.read_text())[0]
    assert float(again["loglik"]) == pytest.approx(float(header["loglik"]), abs=1e-8)


def test_fit_on_selected_degree(gg_csv, tmp_path):
    out = tmp_path / "fit.txt"
    # the flat Gentleman-Geyer likelihood has no change point
    assert main(["fit", "--input", str(gg_csv), "--grid", "1:6", "--output", str(out)]) == EXIT_INPUT


def test_fit_needs_exactly_one_of_degree_and_grid(gg_csv, capsys):
    assert main(["fit", "--input", str(gg_csv)]) == EXIT_INPUT
    assert main(["fit", "--input", str(gg_csv), "--degree", "3", "--grid", "2:6"]) == EXIT_INPUT
    assert "exactly one" in capsys.readouterr().err


def test_nonconvergence_exits_two_with_partial_report(weibull_csv, tmp_path, capsys):
    out = tmp_path / "fit.txt"
    code = main(["fit", "--input", str(weibull_csv), "--degree", "5", "--max-outer", "1", "--output", str(out)])
    assert code == EXIT_NONCONVERGED
    assert parse_report(out.read_text())[0]["status"] == "not-converged"
    assert "error" in capsys.readouterr().err


def test_gamma_init_dimension_is_checked(weibull_csv, capsys):
    assert main(["fit", "--input", str(weibull_csv), "--degree", "4", "--gamma-init", "0.1"]) == EXIT_INPUT
    assert "2 covariates" in capsys.readouterr().err


# input errors -----------------------------------------------------------------------

@pytest.mark.parametrize(
    "body, fragment",
    [
        ("y1,y2,delta\n0,1,1\n0.5,abc,1\n", "row 3, column 'y2'"),
        ("y1,y2,delta\n0,1,1\n0.5,0.7,2\n", "row 3, column 'delta'"),
        ("y1,y2,delta,x1\n0,1,1,0.3\n0.5,0.7,1\n", "row 3: expected 4 columns"),
        ("y1,y2,delta,x1\n0,1,1,nan\n", "row 2, column 'x1'"),
        ("t1,t2,delta\n0,1,1\n", "header"),
        ("y1,y2,delta,z\n0,1,1,2\n", "x1"),
        ("", "header"),
        ("y1,y2,delta\n", "no observations"),
    ],
)
def test_malformed_csv_exits_one_with_location(tmp_path, capsys, body, fragment):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    assert main(["fit", "--input", str(path), "--degree", "3"]) == EXIT_INPUT
    assert fragment in capsys.readouterr().err


def test_inconsistent_row_reports_row_number(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("y1,y2,delta\n0,1,1\n0.8,0.4,1\n")
    assert main(["fit", "--input", str(path), "--degree", "3"]) == EXIT_INPUT
    err = capsys.readouterr().err
    assert "row 3" in err and "y1 < y2" in err


def test_missing_input_file(tmp_path):
    assert main(["fit", "--input", str(tmp_path / "nope.csv"), "--degree", "3"]) == EXIT_INPUT


def test_tau_below_data_is_rejected(gg_csv):
    assert main(["fit", "--input", str(gg_csv), "--degree", "3", "--tau", "2"]) == EXIT_INPUT


def test_bad_grid_text(gg_csv):
    assert main(["select-degree", "--input", str(gg_csv), "--grid", "3:4"]) == EXIT_INPUT
    assert main(["select-degree", "--input", str(gg_csv), "--grid", "two:six"]) == EXIT_INPUT


# select-degree ---------------------------------------------------------------------

def test_gentleman_geyer_degree_table_is_flat(gg_csv, tmp_path, capsys):
    out = tmp_path / "table.csv"
    assert main(["select-degree", "--input", str(gg_csv), "--grid", "1:6", "--output", str(out)]) == EXIT_OK
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "m,loglik,R"
    ll = np.array([float(line.split(",")[1]) for line in lines[1:]])
    assert [int(line.split(",")[0]) for line in lines[1:]] == [1, 2, 3, 4, 5, 6]
    np.testing.assert_allclose(ll[1:], GG_LOGLIK, atol=1e-4)
    assert "no change point" in capsys.readouterr().err


def test_select_degree_reports_choice(weibull_csv, tmp_path, capsys):
    out = tmp_path / "table.csv"
    assert main(["select-degree", "--input", str(weibull_csv), "--grid", "2:6", "--output", str(out)]) == EXIT_OK
    err = capsys.readouterr().err
    chosen = int(err.strip().rsplit(" ", 1)[1])
    assert 2 <= chosen <= 6
    rows = [line.split(",") for line in out.read_text().strip().splitlines()[1:]]
    r = np.array([float(v[2]) for v in rows])
    assert int(rows[int(np.nanargmax(r))][0]) == chosen


def test_profile_mode_runs(weibull_csv, tmp_path):
    out = tmp_path / "table.csv"
    code = main(["select-degree", "--input", str(weibull_csv), "--grid", "2:5", "--mode", "profile", "--output", str(out)])
    assert code == EXIT_OK
    assert len(out.read_text().strip().splitlines()) == 5


# curve -----------------------------------------------------------------------------

@pytest.fixture
def weibull_report(weibull_csv, tmp_path):
    out = tmp_path / "fit.txt"
    main(["fit", "--input", str(weibull_csv), "--degree", "5", "--tail", "on", "--output", str(out)])
    return out


def test_curve_round_trip_is_exact(weibull_report, weibull_data, tmp_path):
    out = tmp_path / "curve.csv"
    xs = [[0.2, 1.0], [-0.7, -1.0]]
    spec = ";".join(",".join(repr(v) for v in row) for row in xs)
    assert main(["curve", "--report", str(weibull_report), "--covariates", spec,
                 "--times", "0:6:61", "--output", str(out)]) == EXIT_OK
    t, ids, s, f = read_curve(out)
    model, _ = mable_fit(weibull_data, 5, has_tail=True)
    for j, x in enumerate(xs, start=1):
        sel = ids == j
        np.testing.assert_array_equal(s[sel], model.conditional_survival(t[sel], np.array(x)))
        np.testing.assert_array_equal(f[sel], model.conditional_density(t[sel], np.array(x)))


def test_curve_shape_and_ph_identity(weibull_report, tmp_path):
    out = tmp_path / "curve.csv"
    main(["curve", "--report", str(weibull_report), "--covariates", "0.9,1;-0.9,-1;0,1",
          "--times", "0:10:201", "--output", str(out)])
    t, ids, s, f = read_curve(out)
    model = model_from_report(weibull_report.read_text())
    for j in (1, 2, 3):
        sj = s[ids == j]
        assert sj[0] == 1.0
        assert np.all(np.diff(sj) <= 0)
        assert np.all(f[ids == j] >= 0)
    # the curve reaches past tau through the tail
    assert t.max() > model.tau and s[(ids == 1) & (t > model.tau)].min() > 0
    s1, s2 = s[ids == 1], s[ids == 2]
    inner = (t[ids == 1] > 0) & (s1 > 0) & (s1 < 1) & (s2 > 0) & (s2 < 1)
    a = np.log(-np.log(s1[inner]))
    b = np.log(-np.log(s2[inner]))
    assert inner.sum() > 100
    diff = a - b
    assert np.ptp(diff) < 1e-8
    expected = model.gamma @ (np.array([0.9, 1.0]) - np.array([-0.9, -1.0]))
    assert diff[0] == pytest.approx(expected, abs=1e-8)


def test_curve_at_baseline_equals_baseline(weibull_report, tmp_path):
    out = tmp_path / "curve.csv"
    main(["curve", "--report", str(weibull_report), "--output", str(out)])
    t, ids, s, f = read_curve(out)
    model = model_from_report(weibull_report.read_text())
    assert len(t) == 101 and t[-1] == model.tau
    np.testing.assert_array_equal(s, model.baseline_survival(t))
    np.testing.assert_array_equal(f, model.baseline_density(t))


def test_curve_rejects_wrong_dimension(weibull_report, capsys):
    assert main(["curve", "--report", str(weibull_report), "--covariates", "1,2,3"]) == EXIT_INPUT
    assert "covariate row 1" in capsys.readouterr().err


def test_curve_rejects_negative_times(weibull_report):
    assert main(["curve", "--report", str(weibull_report), "--times=-1,2"]) == EXIT_INPUT


def test_curve_from_covariate_free_report(gg_csv, tmp_path):
    rep = tmp_path / "fit.txt"
    main(["fit", "--input", str(gg_csv), "--degree", "6", "--output", str(rep)])
    out = tmp_path / "curve.csv"
    assert main(["curve", "--report", str(rep), "--times", "0,1,2,3", "--output", str(out)]) == EXIT_OK
    t, _, s, _ = read_curve(out)
    # uniform weights at m = 6 on [0, 3]: S is linear
    np.testing.assert_allclose(s, 1 - t / 3, atol=1e-3)


# simulate --------------------------------------------------------------------------

def test_simulate_is_deterministic(tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    curves = [tmp_path / "ca.csv", tmp_path / "cb.csv"]
    for out, cur in zip(paths, curves):
        code = main(["simulate", "--n", "40", "--replicates", "3", "--seed", "1",
                     "--grid", "2:6", "--output", str(out), "--curve-output", str(cur)])
        assert code == EXIT_OK
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert curves[0].read_bytes() == curves[1].read_bytes()
    lines = paths[0].read_text().strip().splitlines()
    assert lines[0] == "method,n,coefficient,mse,replicates,failures"
    assert all(math.isfinite(float(line.split(",")[3])) for line in lines[1:])


def test_simulate_seed_changes_output(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["simulate", "--n", "40", "--replicates", "2", "--seed", "1", "--methods", "P", "--output", str(a)])
    main(["simulate", "--n", "40", "--replicates", "2", "--seed", "2", "--methods", "P", "--output", str(b)])
    assert a.read_bytes() != b.read_bytes()


def test_simulate_rejects_bad_design(capsys):
    assert main(["simulate", "--n", "5", "--replicates", "1"]) == EXIT_INPUT
    assert main(["simulate", "--replicates", "0"]) == EXIT_INPUT
    assert main(["simulate", "--replicates", "1", "--methods", "SP"]) == EXIT_INPUT
