"""End-to-end smoke tests of the python bindings."""

import json
import os
import pathlib

import pytest

import shortfall_ld as sl

DATA = pathlib.Path(os.environ.get("TEST_DATA_DIR", pathlib.Path(__file__).parents[1] / "data"))


@pytest.fixture(scope="module")
def s1():
    return sl.load_scenario(str(DATA / "s1.json"))


def test_scenario_roundtrip(s1):
    assert (s1.n, s1.l, s1.k) == (1, 1, 3)
    assert s1.kind == "linear_gaussian"
    assert s1.c()[0][0] == pytest.approx(0.04, abs=1e-15)
    again = sl.parse_scenario(s1.to_json())
    assert again.digest() == s1.digest()


def test_bad_scenarios_raise():
    with pytest.raises(sl.ParseError):
        sl.parse_scenario("{not json")
    bad = json.loads(sl.load_scenario(str(DATA / "s1.json")).to_json())
    bad["linear"]["b"] = [[0.0, 0.0, 0.0]]
    with pytest.raises(sl.DefinitenessError):
        sl.parse_scenario(json.dumps(bad))


def test_conditions(s1):
    rep = sl.check_conditions(s1)
    assert rep.all_passed()
    assert rep.n1_min_eig == pytest.approx(0.0064, rel=1e-10)
    assert rep.n2_min_value == pytest.approx(0.0225, rel=1e-10)


def test_coefficients_and_portfolio(s1):
    frame = sl.eval_coefficients(s1, [0.0])
    assert frame.a[0] == pytest.approx(0.07)
    assert frame.r == pytest.approx(0.03)
    u = sl.optimal_portfolio(0.0, [0.0], frame)
    assert u[0] == pytest.approx(1.0)  # Kelly weight at the origin


def test_gaussian_rate(s1):
    sol = sl.gaussian_rate(1.0, s1)
    assert sol.P[0][0] == pytest.approx(-1.7629617436967942, rel=1e-10)
    assert sol.riccati_residual <= 1e-9 * (1 + abs(sol.P[0][0]))
    assert sol.max_re_eig_D < 0
    assert sl.gaussian_rate(0.0, s1).F == 0.0


def test_dual_solution_and_policy(s1):
    sol = sl.solve_shortfall(s1, -0.02)
    assert not sol.boundary
    assert 0.02 <= sol.J <= 0.1
    assert sol.saddle_residual <= 1e-8
    pol = sl.build_policy(sol, s1)
    assert pol.form == "linear"
    # dual value recomputable from the artifacts
    assert sol.J == pytest.approx(-sol.lambda_hat * -0.02 - sol.gauss.F, abs=1e-12)
    assert sl.check_saddle(sol, s1) <= 1e-8

    trunc = sl.truncate_policy(pol, 0.25)
    assert trunc([0.3])[0] == 0.0
    assert trunc([0.2])[0] == pytest.approx(pol([0.2])[0])


def test_grid_solver_matches_closed_form(s1):
    par = sl.as_parametric(s1)
    rs = sl.gaussian_rate(1.0, s1)
    params = sl.GridParams()
    params.N = 1001
    params.R = 0.8
    gs = sl.solve_ergodic_hjb(1.0, par, params)
    assert gs.Lambda == pytest.approx(rs.F, abs=1e-4)
    assert len(gs.m) == 1001
    assert min(gs.m) >= 0.0


def test_simulation_reproducible(s1):
    sol = sl.solve_shortfall(s1, -0.02)
    pol = sl.build_policy(sol, s1)
    tilt = sl.make_tilt(sol, s1)
    est1 = sl.estimate_shortfall(s1, [5.0, 10.0], 0.05, 500, 7, -0.02, True, pol, tilt)
    est2 = sl.estimate_shortfall(s1, [5.0, 10.0], 0.05, 500, 7, -0.02, True, pol, tilt)
    assert est1[1].p_hat == est2[1].p_hat
    assert est1[1].ess <= 500
    assert 0.0 <= est1[1].p_hat <= 1.0


def test_decay_regression(s1):
    sol = sl.solve_shortfall(s1, -0.02)
    pol = sl.build_policy(sol, s1)
    tilt = sl.make_tilt(sol, s1)
    est = sl.estimate_shortfall(s1, [10.0, 20.0, 40.0], 0.05, 2000, 11, -0.02, True, pol, tilt)
    reg = sl.estimate_decay_rate(est)
    assert reg.points == 3
    # short horizons overshoot the asymptotic rate but stay in its vicinity
    assert 0.0 < reg.slope < 5.0 * sol.J


def test_ergodic_average(s1):
    sol = sl.solve_shortfall(s1, -0.02)
    tilt = sl.make_tilt(sol, s1)
    avg, se = sl.ergodic_average(s1, tilt, [[0.0]], [1.0], 0.0, 500.0, 0.02, 3)
    mstar = sol.gauss.mstar[0]
    assert abs(avg - mstar) < 3 * se + 1e-3


def test_kelly_policy(s1):
    kelly = sl.kelly_policy(s1)
    assert kelly.K[0][0] == pytest.approx(10.0)
    assert kelly.k0[0] == pytest.approx(1.0)


def test_degenerate_benchmark_refusal(s1):
    bad = json.loads(s1.to_json())
    bad["linear"]["beta"] = [0.0, 0.0, 0.0]
    with pytest.raises(sl.DefinitenessError):
        sl.parse_scenario(json.dumps(bad))
    scen = sl.parse_scenario(json.dumps(bad), allow_degenerate_benchmark=True)
    with pytest.raises(sl.SolverError):
        sl.solve_shortfall(scen, -0.02)  # safe security alone is optimal
