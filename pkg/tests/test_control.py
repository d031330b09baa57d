"""Escape times, the cost curve, critical rates, and the fuel lower bound."""
import math

import numpy as np
import pytest

from tipcrit import (
    ControlSegment,
    ControlSignal,
    InfeasibleBudgetError,
    InfeasibleSideError,
    boundary_arrival,
    cost,
    critical_rate,
    escape_time,
    make_bang_bang,
    optimal_bang_bang,
    prototype_critical_rate_smooth,
    prototype_critical_slope,
    sample_cost_curve,
    verify_lower_bound,
)

MC_LAMBDA_3 = 2.1620322634033124  # root of 2m/sqrt(m-1)*atan(1/sqrt(m-1)) = 3
CUBIC_ESCAPE_DRIVE_1 = 1.8911073354918675  # integral of 1/(f+1) on [0, 1]


def implicit_slope_oracle(lambda_inf: float) -> float:
    """Independent bisection of the quadratic-prototype cost equation."""
    def fuel(m):
        s = math.sqrt(m - 1.0)
        return 2.0 * m / s * math.atan(1.0 / s)
    lo, hi = 1.0 + 1e-13, 2.0
    while fuel(hi) >= lambda_inf:
        hi *= 2.0
    while fuel(lo) <= lambda_inf:
        lo = 1.0 + (lo - 1.0) / 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if fuel(mid) > lambda_inf:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def cubic_rate_oracle(arclength: float) -> float:
    """scipy-based root of M * integral(1/(f+M), 0..1) = arclength."""
    import warnings

    from scipy.integrate import IntegrationWarning, quad as scipy_quad
    from scipy.optimize import brentq

    def fuel(m):
        with warnings.catch_warnings():
            # brentq probes near-singular m values on its way to the root
            warnings.simplefilter("ignore", IntegrationWarning)
            val, _ = scipy_quad(lambda y: m / (y * (y - 1) * (y + 2) + m),
                                0.0, 1.0, epsabs=1e-13, epsrel=1e-13,
                                limit=500)
        return val

    mu_plus = (14.0 * math.sqrt(7.0) - 20.0) / 27.0
    return brentq(lambda m: fuel(m) - arclength, mu_plus * (1 + 1e-9), 1e7,
                  xtol=1e-12, rtol=8.9e-16)


# --------------------------------------------------------------------------
# escape times
# --------------------------------------------------------------------------

def test_escape_time_quadratic(quad_field, quad_geometry):
    T = escape_time(quad_geometry, quad_field, 1, 2.0)
    assert T == pytest.approx(math.pi / 2.0, abs=1e-10)


def test_escape_time_infeasible_unbounded_side(quad_field, quad_geometry):
    with pytest.raises(InfeasibleSideError):
        escape_time(quad_geometry, quad_field, -1, 5.0)


def test_escape_time_below_depth_is_infeasible(quad_field, quad_geometry):
    with pytest.raises(InfeasibleSideError):
        escape_time(quad_geometry, quad_field, 1, 0.9)


def test_escape_time_cubic_pinned_by_oracle(cubic_field, cubic_geometry):
    T = escape_time(cubic_geometry, cubic_field, 1, 1.0)
    assert T == pytest.approx(CUBIC_ESCAPE_DRIVE_1, rel=1e-9)


# --------------------------------------------------------------------------
# cost
# --------------------------------------------------------------------------

def test_cost_quadratic_at_two(quad_field, quad_geometry):
    j_plus, j_minus, j = cost(quad_geometry, quad_field, 2.0)
    assert j_plus == pytest.approx(math.pi, abs=1e-9)
    assert j_minus == math.inf
    assert j == j_plus


def test_cost_limit_large_drive(quad_field, quad_geometry):
    j = cost(quad_geometry, quad_field, 1e6)[2]
    assert abs(j - 2.0) <= 1e-3


def test_cost_diverges_near_depth(quad_field, quad_geometry):
    assert cost(quad_geometry, quad_field, 1.0001)[2] > 100.0


def test_cost_below_depth_raises(quad_field, quad_geometry):
    with pytest.raises(InfeasibleSideError):
        cost(quad_geometry, quad_field, 0.5)


def test_cost_curve_csv_marks_infeasible_sides(tmp_path, quad_field,
                                               quad_geometry):
    curve = sample_cost_curve(quad_geometry, quad_field, [0.5, 2.0])
    path = tmp_path / "curve.csv"
    curve.write_csv(str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "M,J_plus,J_minus,J"
    assert lines[1].split(",")[1:] == ["inf", "inf", "inf"]
    assert lines[2].split(",")[2] == "inf"


def test_cost_strictly_decreasing_small_grid(quad_field, quad_geometry,
                                             cubic_field, cubic_geometry):
    for field, geometry in ((quad_field, quad_geometry),
                            (cubic_field, cubic_geometry)):
        grid = np.geomspace(geometry.mu * (1 + 1e-3), 1e3, 40)
        js = [row[3] for row in sample_cost_curve(geometry, field,
                                                  grid).samples]
        assert all(b < a for a, b in zip(js, js[1:]))


def test_cost_limits_per_side_cubic(cubic_field, cubic_geometry):
    j_plus, j_minus, _ = cost(cubic_geometry, cubic_field, 1e6)
    assert abs(j_plus - 1.0) <= 1e-3
    assert abs(j_minus - 2.0) <= 1e-3


# --------------------------------------------------------------------------
# critical rate
# --------------------------------------------------------------------------

def test_critical_rate_exact_at_pi(quad_field, quad_geometry):
    rate = critical_rate(quad_geometry, quad_field, math.pi)
    assert rate.m_c == pytest.approx(2.0, abs=1e-8)
    assert rate.side == 1


def test_critical_rate_lambda_three(quad_field, quad_geometry):
    rate = critical_rate(quad_geometry, quad_field, 3.0)
    assert rate.m_c == pytest.approx(MC_LAMBDA_3, abs=1e-6)
    assert rate.m_c == pytest.approx(implicit_slope_oracle(3.0), abs=1e-6)


def test_budget_below_radius_is_infeasible(quad_field, quad_geometry):
    with pytest.raises(InfeasibleBudgetError):
        critical_rate(quad_geometry, quad_field, 1.5)
    with pytest.raises(InfeasibleBudgetError):
        critical_rate(quad_geometry, quad_field, 2.0)  # budget == radius


def test_critical_rate_bracket_invariants(quad_field, quad_geometry):
    rate = critical_rate(quad_geometry, quad_field, 3.0)
    lo, hi = rate.bracket
    assert lo <= rate.m_c <= hi
    assert hi - lo <= 1e-8 * max(1.0, rate.m_c)
    assert rate.m_c > quad_geometry.mu
    j = cost(quad_geometry, quad_field, rate.m_c)[2]
    assert abs(j - 3.0) <= 1e-8 * 3.0


@pytest.mark.parametrize("arclength,expected", [
    (1.5, 1.3548283718988352),
    (2.0, 0.9517209871293442),
    (3.0, 0.7620893344187007),
    (50.0, 0.6317045640937642),
])
def test_cubic_critical_rates_pinned_by_oracle(cubic_field, cubic_geometry,
                                               arclength, expected):
    # frozen values recomputed here via the scipy oracle
    assert cubic_rate_oracle(arclength) == pytest.approx(expected, abs=1e-9)
    rate = critical_rate(cubic_geometry, cubic_field, arclength)
    assert rate.m_c == pytest.approx(expected, abs=1e-6)
    assert rate.side == 1


def test_root_consistency_random_budgets(quad_field, quad_geometry,
                                         cubic_field, cubic_geometry):
    rng = np.random.default_rng(99)
    for field, geometry in ((quad_field, quad_geometry),
                            (cubic_field, cubic_geometry)):
        for _ in range(25):
            L = geometry.radius * float(10.0 ** rng.uniform(0.01, 2.0))
            rate = critical_rate(geometry, field, L)
            j = cost(geometry, field, rate.m_c)[2]
            assert abs(j - L) <= 1e-8 * L


def test_rate_decreases_continuously_in_budget(quad_field, quad_geometry):
    grid = np.geomspace(2.1, 60.0, 25)
    rates = [critical_rate(quad_geometry, quad_field, float(L)).m_c
             for L in grid]
    ratio = grid[1] / grid[0]
    for a, b in zip(rates, rates[1:]):
        assert b < a
        assert (a - b) / a <= 10.0 * (ratio - 1.0)


# --------------------------------------------------------------------------
# optimal bang-bang
# --------------------------------------------------------------------------

def test_optimal_pulse_at_pi_budget(quad_field, quad_geometry):
    pulse, ramp = optimal_bang_bang(quad_geometry, quad_field, math.pi)
    assert pulse.height == pytest.approx(2.0, abs=1e-8)
    assert pulse.width == pytest.approx(math.pi / 2.0, abs=1e-8)
    assert pulse.sign == 1
    assert pulse.cost == pytest.approx(math.pi, abs=1e-8)
    assert ramp.sup_speed() == pytest.approx(pulse.height, rel=1e-12)
    assert ramp.final_value() == pytest.approx(math.pi, abs=1e-7)


def test_optimal_pulse_height_decreases_with_budget(quad_field, quad_geometry):
    pulse3, _ = optimal_bang_bang(quad_geometry, quad_field, 3.0)
    pulse4, _ = optimal_bang_bang(quad_geometry, quad_field, 4.0)
    assert pulse4.height < pulse3.height
    assert pulse4.cost == pytest.approx(4.0, abs=1e-7)


def test_optimal_pulse_uses_shallow_side_cubic(cubic_field, cubic_geometry):
    pulse, ramp = optimal_bang_bang(cubic_geometry, cubic_field, 50.0)
    assert pulse.sign == 1
    assert ramp.final_value() > 0


# --------------------------------------------------------------------------
# prototype closed forms
# --------------------------------------------------------------------------

def test_smooth_prototype_rate_values():
    assert prototype_critical_rate_smooth(3.0) == pytest.approx(4.0 / 3.0,
                                                                rel=1e-15)
    assert prototype_critical_rate_smooth(4.0) == pytest.approx(0.5, rel=1e-15)


def test_smooth_prototype_rate_decreases():
    values = [prototype_critical_rate_smooth(lam)
              for lam in (2.5, 3.0, 5.0, 10.0, 100.0)]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_smooth_prototype_rejects_small_amplitude():
    with pytest.raises(ValueError):
        prototype_critical_rate_smooth(2.0)


def test_prototype_slope_exact_at_pi():
    assert prototype_critical_slope(math.pi) == pytest.approx(2.0, abs=1e-10)


def test_prototype_slope_at_three():
    assert prototype_critical_slope(3.0) == pytest.approx(MC_LAMBDA_3,
                                                          abs=1e-10)


def test_prototype_slope_decreases_with_amplitude():
    assert prototype_critical_slope(10.0) < prototype_critical_slope(5.0)


def test_prototype_slope_rejects_small_amplitude():
    with pytest.raises(ValueError):
        prototype_critical_slope(1.9)


def test_prototype_slope_agrees_with_general_solver(quad_field, quad_geometry):
    for lam in (2.5, 3.0, 6.0, 20.0, 45.0):
        general = critical_rate(quad_geometry, quad_field, lam).m_c
        assert general == pytest.approx(prototype_critical_slope(lam),
                                        abs=1e-6)


# --------------------------------------------------------------------------
# fuel lower bound
# --------------------------------------------------------------------------

def test_lower_bound_equality_for_optimal_pulse(quad_field, quad_geometry):
    pulse, _ = optimal_bang_bang(quad_geometry, quad_field, math.pi)
    u = make_bang_bang(pulse.height, 0.0, pulse.width, pulse.sign)
    report = verify_lower_bound(quad_geometry, quad_field, u)
    assert report.satisfied
    assert report.integral == pytest.approx(math.pi, abs=1e-8)
    assert report.integral == pytest.approx(report.bound, abs=1e-8)


def test_lower_bound_equality_for_own_height(quad_field, quad_geometry):
    # a taller pulse cut exactly at its own passage time is optimal for
    # its own height, with fuel strictly below the pi budget
    width = escape_time(quad_geometry, quad_field, 1, 3.0)
    u = make_bang_bang(3.0, 0.0, width, +1)
    report = verify_lower_bound(quad_geometry, quad_field, u)
    assert report.satisfied
    assert report.integral < math.pi
    assert report.integral == pytest.approx(report.bound, abs=1e-8)


def test_lower_bound_strict_excess_for_split_pulse(quad_field, quad_geometry):
    # two pulses of height 2 separated by a relaxation gap waste fuel
    w1, gap = 0.4, 3.0
    lo, hi = 0.1, math.pi / 2.0

    def control(w2):
        return ControlSignal((ControlSegment(0.0, w1, 2.0),
                              ControlSegment(w1 + gap, w1 + gap + w2, 2.0)))

    assert not boundary_arrival(quad_field, quad_geometry, control(lo))
    assert boundary_arrival(quad_field, quad_geometry, control(hi))
    for _ in range(45):
        mid = 0.5 * (lo + hi)
        if boundary_arrival(quad_field, quad_geometry, control(mid)):
            hi = mid
        else:
            lo = mid
    report = verify_lower_bound(quad_geometry, quad_field, control(hi))
    assert report.satisfied
    assert report.integral - report.bound >= 1e-3


def test_lower_bound_rejects_non_arriving_control(quad_field, quad_geometry):
    u = make_bang_bang(2.0, 0.0, 0.3, +1)
    with pytest.raises(ValueError, match="arrival"):
        verify_lower_bound(quad_geometry, quad_field, u)
