"""Optimal escape control: passage times, the fuel cost curve, critical
forcing speeds, and the associated bang-bang pulse constructions.

For a constant drive of magnitude M that dominates the field on one basin
side, the fuel spent reaching the boundary is J(M) = M * T(M).  J is strictly
decreasing, diverges as M approaches the side's depth constant from above,
and tends to the traversed path length as M grows.  The critical speed for an
arclength budget L > R is the unique root of J(M) = L.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .field import BasinGeometry, ScalarField
from .forcing import ControlSignal, PiecewiseLinear
from .integrate import QuadratureFault, first_passage_time

__all__ = [
    "BangBangControl",
    "CostCurve",
    "CriticalRate",
    "LowerBoundReport",
    "InfeasibleSideError",
    "InfeasibleBudgetError",
    "escape_time",
    "cost",
    "sample_cost_curve",
    "critical_rate",
    "optimal_bang_bang",
    "prototype_critical_rate_smooth",
    "prototype_critical_slope",
    "verify_lower_bound",
]

ROOT_REL_TOL = 1e-8
LOWER_BOUND_SLACK = 1e-6


class InfeasibleSideError(ValueError):
    """Escape over the requested side is impossible at this drive level."""


class InfeasibleBudgetError(ValueError):
    """The arclength budget does not exceed the basin radius."""


@dataclass(frozen=True)
class BangBangControl:
    """Rectangular escape pulse: magnitude, duration, direction, and fuel."""

    height: float
    width: float
    sign: int
    cost: float


@dataclass(frozen=True)
class CriticalRate:
    m_c: float
    side: int
    arclength: float
    bracket: tuple[float, float]


@dataclass
class CostCurve:
    """Sampled rows ``(M, J_plus, J_minus, J)`` with inf for infeasible sides."""

    samples: list[tuple[float, float, float, float]]

    def write_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("M,J_plus,J_minus,J\n")
            for m, jp, jm, j in self.samples:
                fh.write(f"{_csv_num(m)},{_csv_num(jp)},{_csv_num(jm)},{_csv_num(j)}\n")


def _csv_num(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


# --------------------------------------------------------------------------
# passage times and cost
# --------------------------------------------------------------------------

def escape_time(geometry: BasinGeometry, field: ScalarField, side: int,
                drive: float) -> float:
    """Boundary passage time from the attractor under constant drive
    ``side * drive`` with ``drive > mu_side``."""
    if side not in (-1, 1):
        raise ValueError("side must be +1 or -1")
    if not geometry.has_side(side):
        raise InfeasibleSideError(
            f"side {side:+d} has no finite boundary point")
    mu_side = geometry.side_mu(side)
    if not drive > mu_side:
        raise InfeasibleSideError(
            f"drive {drive!r} does not exceed the side depth {mu_side!r}")
    # positivity of f + side*drive on the path follows from mu_side
    return first_passage_time(field, side * drive, geometry.attractor,
                              geometry.endpoint(side), skip_sign_check=True)


def cost(geometry: BasinGeometry, field: ScalarField,
         drive: float) -> tuple[float, float, float]:
    """Fuel ``J_side = M * T_side`` per side, and their minimum.

    Raises :class:`InfeasibleSideError` when neither side is escapable at
    this drive level (``drive <= mu``).
    """
    if not drive > 0.0:
        raise ValueError("drive must be positive")
    j_plus = j_minus = math.inf
    for side in (1, -1):
        try:
            t_side = escape_time(geometry, field, side, drive)
        except InfeasibleSideError:
            continue
        if side == 1:
            j_plus = drive * t_side
        else:
            j_minus = drive * t_side
    j = min(j_plus, j_minus)
    if math.isinf(j):
        raise InfeasibleSideError(
            f"drive {drive!r} does not exceed mu = {geometry.mu!r} on any side")
    return j_plus, j_minus, j


def sample_cost_curve(geometry: BasinGeometry, field: ScalarField,
                      drives) -> CostCurve:
    rows = []
    for m in drives:
        try:
            jp, jm, j = cost(geometry, field, float(m))
        except InfeasibleSideError:
            jp = jm = j = math.inf
        rows.append((float(m), jp, jm, j))
    return CostCurve(rows)


def _cost_min(geometry: BasinGeometry, field: ScalarField, drive: float) -> float:
    """min-side J, mapping quadrature blowup near mu to +inf."""
    try:
        return cost(geometry, field, drive)[2]
    except (InfeasibleSideError, QuadratureFault):
        return math.inf


# --------------------------------------------------------------------------
# critical rate
# --------------------------------------------------------------------------

def critical_rate(geometry: BasinGeometry, field: ScalarField,
                  arclength: float) -> CriticalRate:
    """Unique drive level with ``J(m_c) = arclength``, by bisection on the
    strictly decreasing cost curve.

    Requires ``arclength > radius``; at or below the radius no finite speed
    can spend enough fuel to cross, so the budget is infeasible.
    """
    L = float(arclength)
    if not L > geometry.radius:
        raise InfeasibleBudgetError(
            f"arclength {L!r} does not exceed the basin radius "
            f"{geometry.radius!r}; tipping is impossible at any speed")

    mu = geometry.mu
    # lower bracket: approach mu geometrically until J exceeds the budget
    m_lo = None
    for k in range(1, 54):
        cand = mu * (1.0 + 2.0 ** -k)
        if cand <= mu:
            break
        if _cost_min(geometry, field, cand) > L:
            m_lo = cand
            break
    if m_lo is None:
        raise InfeasibleBudgetError(
            f"could not bracket the critical rate above mu = {mu!r}")
    # upper bracket: grow geometrically until J drops below the budget
    m_hi = max(2.0 * mu, 2.0 * m_lo)
    for _ in range(80):
        if _cost_min(geometry, field, m_hi) < L:
            break
        m_hi *= 2.0
    else:
        raise InfeasibleBudgetError(
            f"cost stays above {L!r} up to drive {m_hi!r}")

    mid = 0.5 * (m_lo + m_hi)
    j_mid = _cost_min(geometry, field, mid)
    for _ in range(200):
        residual_ok = abs(j_mid - L) <= ROOT_REL_TOL * L
        bracket_ok = (m_hi - m_lo) <= ROOT_REL_TOL * max(1.0, mid)
        if residual_ok and bracket_ok:
            break
        if j_mid > L:
            m_lo = mid
        else:
            m_hi = mid
        new_mid = 0.5 * (m_lo + m_hi)
        if new_mid == mid:
            break  # float resolution reached
        mid = new_mid
        j_mid = _cost_min(geometry, field, mid)
    else:
        raise RuntimeError("critical-rate bisection did not converge")

    j_plus, j_minus, _ = cost(geometry, field, mid)
    side = 1 if j_plus <= j_minus else -1
    return CriticalRate(m_c=mid, side=side, arclength=L, bracket=(m_lo, m_hi))


def optimal_bang_bang(geometry: BasinGeometry, field: ScalarField,
                      arclength: float) -> tuple[BangBangControl, PiecewiseLinear]:
    """The cheapest tipping pulse for the budget, plus the linear forcing ramp
    whose derivative it is."""
    rate = critical_rate(geometry, field, arclength)
    width = escape_time(geometry, field, rate.side, rate.m_c)
    pulse = BangBangControl(height=rate.m_c, width=width, sign=rate.side,
                            cost=rate.m_c * width)
    ramp = PiecewiseLinear(((0.0, 0.0), (width, rate.side * rate.m_c * width)))
    return pulse, ramp


# --------------------------------------------------------------------------
# quadratic-prototype closed forms
# --------------------------------------------------------------------------

def _quadratic_cost(m: float) -> float:
    s = math.sqrt(m - 1.0)
    return 2.0 * m / s * math.atan(1.0 / s)


def prototype_critical_rate_smooth(lambda_inf: float) -> float:
    """Critical steepness of the sigmoid ramp family on the quadratic
    prototype field: ``4 / (lambda_inf * (lambda_inf - 2))``."""
    if not lambda_inf > 2.0:
        raise ValueError("lambda_inf must exceed 2")
    return 4.0 / (lambda_inf * (lambda_inf - 2.0))


def prototype_critical_slope(lambda_inf: float) -> float:
    """Critical slope of the linear ramp family on the quadratic prototype:
    the unique root of ``2m/sqrt(m-1) * atan(1/sqrt(m-1)) = lambda_inf``."""
    if not lambda_inf > 2.0:
        raise ValueError("lambda_inf must exceed 2")
    m_lo = None
    for k in range(1, 54):
        cand = 1.0 + 2.0 ** -k
        if _quadratic_cost(cand) > lambda_inf:
            m_lo = cand
            break
    if m_lo is None:
        raise RuntimeError("failed to bracket the critical slope from below")
    m_hi = 2.0 * max(1.0, m_lo)
    while _quadratic_cost(m_hi) >= lambda_inf:
        m_hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (m_lo + m_hi)
        if mid == m_lo or mid == m_hi:
            break
        if _quadratic_cost(mid) > lambda_inf:
            m_lo = mid
        else:
            m_hi = mid
        if m_hi - m_lo <= 1e-10 * max(1.0, mid):
            break
    return 0.5 * (m_lo + m_hi)


# --------------------------------------------------------------------------
# fuel lower bound
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LowerBoundReport:
    integral: float
    bound: float
    satisfied: bool


def verify_lower_bound(geometry: BasinGeometry, field: ScalarField,
                       control: ControlSignal,
                       settings=None) -> LowerBoundReport:
    """Check the fuel inequality: any control that drives the trajectory from
    the attractor to the basin boundary spends at least ``J(ess sup |u|)``.

    Raises :class:`ValueError` when the simulated trajectory never reaches
    the boundary, in which case the bound does not apply.
    """
    from .classify import boundary_arrival  # deferred: avoids import cycle

    ess = control.ess_sup()
    if ess <= 0.0:
        raise ValueError("control is identically zero")
    arrived = boundary_arrival(field, geometry, control, settings)
    if not arrived:
        raise ValueError(
            "control does not achieve boundary arrival; lower bound not applicable")
    integral = control.abs_integral()
    bound = cost(geometry, field, ess)[2]
    return LowerBoundReport(integral=integral, bound=bound,
                            satisfied=integral >= bound - LOWER_BOUND_SLACK)
