"""Controlled scalar ODE integration and first-passage quadrature.

The solver is an explicit Dormand-Prince 5(4) embedded pair with PI step-size
control.  Control discontinuities are handled by integrating each smooth
piece separately, so the stepper never evaluates the right-hand side across a
jump; events are located within an accepted step by bisection on fifth-order
sub-steps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .field import EvaluationFault, ScalarField
from .forcing import ControlSignal

__all__ = [
    "IntegrationSettings",
    "Event",
    "Trajectory",
    "IntegrationError",
    "SignChangeFault",
    "QuadratureFault",
    "integrate_pieces",
    "integrate_controlled",
    "integrate_autonomous",
    "first_passage_time",
]


class IntegrationError(RuntimeError):
    """Step size underflow or an otherwise unrecoverable integration state."""


class SignChangeFault(ValueError):
    """The first-passage integrand changes sign or vanishes on the path."""


class QuadratureFault(RuntimeError):
    """Adaptive quadrature hit its refinement cap (near-singular integrand)."""


@dataclass
class IntegrationSettings:
    rtol: float = 1e-8
    atol: float = 1e-10
    max_step: float = math.inf
    y_blowup: float = 1e6
    t_horizon_autonomous: float = 1e4

    def __post_init__(self):
        for name in ("rtol", "atol", "max_step", "y_blowup",
                     "t_horizon_autonomous"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class Event:
    """Terminal threshold crossing; ``direction`` +1 fires on upward
    crossings, -1 downward, 0 on either."""

    label: str
    threshold: float
    direction: int = 0


@dataclass
class Trajectory:
    times: list[float]
    states: list[float]
    reason: str  # "reached_t_end" | "event" | "blowup" | "step_failure"
    event_label: str | None = None
    event_time: float | None = None
    event_state: float | None = None

    @property
    def final_time(self) -> float:
        return self.times[-1]

    @property
    def final_state(self) -> float:
        return self.states[-1]

    def write_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t,y\n")
            for t, y in zip(self.times, self.states):
                fh.write(f"{t:.17g},{y:.17g}\n")


# --------------------------------------------------------------------------
# Dormand-Prince 5(4) tableau
# --------------------------------------------------------------------------

_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = (9017 / 3168, -355 / 33, 46732 / 5247,
                                49 / 176, -5103 / 18656)
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# fifth-order minus fourth-order weights, applied to k1..k7
_E1, _E3, _E4, _E5, _E6, _E7 = (71 / 57600, -71 / 16695, 71 / 1920,
                                -17253 / 339200, 22 / 525, -1 / 40)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_PI_ALPHA = 0.7 / 5.0
_PI_BETA = 0.4 / 5.0
_MAX_STEPS = 5_000_000


def _call(rhs: Callable[[float, float], float], t: float, y: float) -> float:
    try:
        v = rhs(t, y)
    except (OverflowError, ZeroDivisionError, EvaluationFault):
        return math.inf
    return v


def _propagate(rhs, t: float, y: float, h: float, k1: float) -> float:
    """Fifth-order solution one step of size ``h`` ahead (no error control)."""
    k2 = _call(rhs, t + _C2 * h, y + h * (_A21 * k1))
    k3 = _call(rhs, t + _C3 * h, y + h * (_A31 * k1 + _A32 * k2))
    k4 = _call(rhs, t + _C4 * h, y + h * (_A41 * k1 + _A42 * k2 + _A43 * k3))
    k5 = _call(rhs, t + _C5 * h,
               y + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4))
    k6 = _call(rhs, t + h,
               y + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4
                        + _A65 * k5))
    return y + h * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)


def _locate_event(event: Event, rhs, t0: float, y0: float, y1: float,
                  k1: float, h: float) -> tuple[float, float] | None:
    """Crossing time within an accepted step, by bisection on fifth-order
    sub-steps from the step start (a cubic interpolant is not accurate
    enough for the passage-time tolerances downstream)."""
    d0 = y0 - event.threshold
    d1 = y1 - event.threshold
    if d0 == 0.0:
        return None  # starting on the threshold counts as already departed
    if d0 < 0.0 <= d1:
        crossing = 1
    elif d0 > 0.0 >= d1:
        crossing = -1
    else:
        return None
    if event.direction != 0 and event.direction != crossing:
        return None
    lo, hi = 0.0, h
    y_hi = y1
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        y_mid = _propagate(rhs, t0, y0, mid, k1)
        g = y_mid - event.threshold
        if g == 0.0:
            return t0 + mid, y_mid
        if (g > 0.0) == (d0 > 0.0):
            lo = mid
        else:
            hi = mid
            y_hi = y_mid
    return t0 + hi, y_hi


def _initial_step(rhs, t0: float, y0: float, f0: float, span: float,
                  settings: IntegrationSettings) -> float:
    scale = settings.atol + settings.rtol * abs(y0)
    d0 = abs(y0) / scale
    d1 = abs(f0) / scale
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = _call(rhs, t0 + h0, y0 + h0 * f0)
    d2 = abs(f1 - f0) / scale / h0 if h0 > 0 else 0.0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span, settings.max_step)


def integrate_pieces(pieces: Sequence[tuple[float, float, Callable[[float, float], float]]],
                     y0: float, events: Sequence[Event] = (),
                     settings: IntegrationSettings | None = None) -> Trajectory:
    """Integrate a chain of smooth pieces ``(t_start, t_end, rhs)``.

    Steps are restarted at every piece boundary so each step sees a smooth
    right-hand side.  Terminal events are located to time tolerance 1e-10 by
    bisection inside the accepted step.
    """
    if settings is None:
        settings = IntegrationSettings()
    if not pieces:
        raise ValueError("no pieces to integrate")
    times = [pieces[0][0]]
    states = [float(y0)]
    y = float(y0)
    h: float | None = None
    err_old = 1e-4
    steps = 0

    for t_start, t_end, rhs in pieces:
        if not t_start < t_end:
            raise ValueError("piece must have positive duration")
        t = t_start
        k1 = _call(rhs, t, y)
        if h is None:
            h = _initial_step(rhs, t, y, k1, t_end - t_start, settings)
        while t < t_end:
            steps += 1
            if steps > _MAX_STEPS:
                return Trajectory(times, states, "step_failure")
            h = min(h, settings.max_step, t_end - t)
            if h < 1e-14 * max(1.0, abs(t)):
                return Trajectory(times, states, "step_failure")

            k2 = _call(rhs, t + _C2 * h, y + h * (_A21 * k1))
            k3 = _call(rhs, t + _C3 * h, y + h * (_A31 * k1 + _A32 * k2))
            k4 = _call(rhs, t + _C4 * h, y + h * (_A41 * k1 + _A42 * k2 + _A43 * k3))
            k5 = _call(rhs, t + _C5 * h,
                       y + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4))
            k6 = _call(rhs, t + h,
                       y + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4
                                + _A65 * k5))
            y_new = y + h * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
            k7 = _call(rhs, t + h, y_new)
            err_raw = h * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6
                           + _E7 * k7)
            scale = settings.atol + settings.rtol * max(abs(y), abs(y_new))
            err = abs(err_raw) / scale
            if not math.isfinite(err) or not math.isfinite(y_new):
                err = math.inf

            if err > 1.0:
                factor = _MIN_FACTOR if math.isinf(err) else max(
                    _MIN_FACTOR, _SAFETY * err ** -0.2)
                h *= factor
                continue

            t_new = t + h
            if t_end - t_new <= 1e-14 * max(1.0, abs(t_end)):
                t_new = t_end

            hit: tuple[float, float, str] | None = None
            for event in events:
                located = _locate_event(event, rhs, t, y, y_new, k1, h)
                if located is not None and (hit is None or located[0] < hit[0]):
                    hit = (located[0], located[1], event.label)
            if hit is not None:
                times.append(hit[0])
                states.append(hit[1])
                return Trajectory(times, states, "event", event_label=hit[2],
                                  event_time=hit[0], event_state=hit[1])

            times.append(t_new)
            states.append(y_new)
            if abs(y_new) >= settings.y_blowup:
                return Trajectory(times, states, "blowup")

            if err == 0.0:
                factor = _MAX_FACTOR
            else:
                factor = _SAFETY * err ** (-_PI_ALPHA) * err_old ** _PI_BETA
            h *= min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
            err_old = max(err, 1e-4)
            t, y, k1 = t_new, y_new, k7

    return Trajectory(times, states, "reached_t_end")


def _control_pieces(field: ScalarField, control: ControlSignal,
                    t0: float, t_end: float):
    """Split [t0, t_end] at control boundaries; each piece gets a frozen
    constant drive so the integrand is exactly smooth within it."""
    cuts = [t0]
    for b in control.boundaries():
        if t0 < b < t_end and b > cuts[-1]:
            cuts.append(b)
    cuts.append(t_end)
    pieces = []
    f = field.f
    for a, b in zip(cuts, cuts[1:]):
        c = control.value(0.5 * (a + b))
        if c == 0.0:
            pieces.append((a, b, lambda t, y, _f=f: _f(y)))
        else:
            pieces.append((a, b, lambda t, y, _f=f, _c=c: _f(y) + _c))
    return pieces


def integrate_controlled(field: ScalarField, control: ControlSignal, y0: float,
                         t0: float, t_end: float, events: Sequence[Event] = (),
                         settings: IntegrationSettings | None = None) -> Trajectory:
    """Solve ``y' = f(y) + u(t)`` for a piecewise-constant control ``u``."""
    if not t0 < t_end:
        raise ValueError("t0 must precede t_end")
    if not math.isfinite(y0):
        raise ValueError("y0 must be finite")
    return integrate_pieces(_control_pieces(field, control, t0, t_end),
                            y0, events, settings)


def integrate_autonomous(field: ScalarField, y0: float, t0: float, t_end: float,
                         events: Sequence[Event] = (),
                         settings: IntegrationSettings | None = None) -> Trajectory:
    """Solve the unforced flow ``y' = f(y)``."""
    if not t0 < t_end:
        raise ValueError("t0 must precede t_end")
    f = field.f
    return integrate_pieces([(t0, t_end, lambda t, y: f(y))], y0, events, settings)


# --------------------------------------------------------------------------
# first-passage quadrature
# --------------------------------------------------------------------------

_QUAD_MAX_DEPTH = 60
_QUAD_SIGN_GRID = 2048
# Per-panel relative floor.  The integrand keeps one sign, so panel
# magnitudes sum to |I| and the floor bounds the total relative error.  It
# must exceed the integrand's intrinsic roundoff amplification near an
# almost-vanishing denominator (eps * |f| / (f + drive), ~1e-10 at a relative
# clearance of 1e-6); below that the recursion chases unresolvable noise.
_QUAD_REL_FLOOR = 1e-9


def _adaptive_simpson(g, a, fa, m, fm, b, fb, whole, tol, depth):
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = g(lm)
    frm = g(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    if abs(delta) <= 15.0 * max(tol, _QUAD_REL_FLOOR * (abs(left) + abs(right))):
        return left + right + delta / 15.0
    if depth >= _QUAD_MAX_DEPTH:
        raise QuadratureFault(
            f"quadrature did not resolve near-singular integrand on "
            f"[{a!r}, {b!r}] within {_QUAD_MAX_DEPTH} refinement levels")
    half = 0.5 * tol
    return (_adaptive_simpson(g, a, fa, lm, flm, m, fm, left, half, depth + 1)
            + _adaptive_simpson(g, m, fm, rm, frm, b, fb, right, half, depth + 1))


def first_passage_time(field: ScalarField, drive: float, y_from: float,
                       y_to: float, abs_tol: float = 1e-10,
                       *, skip_sign_check: bool = False) -> float:
    """Time for ``y' = f(y) + drive`` to move from ``y_from`` to ``y_to``,
    computed as the quadrature of ``1 / (f + drive)`` along the path.

    Requires ``f + drive`` to keep a single nonzero sign on the closed
    interval (checked on a dense grid unless the caller has already
    established it from the basin geometry).
    """
    if y_from == y_to:
        return 0.0
    lo, hi = (y_from, y_to) if y_from < y_to else (y_to, y_from)

    f = field.f
    if not skip_sign_check:
        grid = np.linspace(lo, hi, _QUAD_SIGN_GRID + 1)
        vals = [f(float(x)) + drive for x in grid]
        vmin, vmax = min(vals), max(vals)
        if vmin <= 0.0 <= vmax:
            worst = min(grid, key=lambda x: abs(f(float(x)) + drive))
            raise SignChangeFault(
                f"f + drive changes sign or vanishes near y = {float(worst)!r}; "
                "the control does not dominate the field on this path")

    def g(y: float) -> float:
        return 1.0 / (f(y) + drive)

    a, b = y_from, y_to
    fa, fb = g(a), g(b)
    m = 0.5 * (a + b)
    fm = g(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    result = _adaptive_simpson(g, a, fa, m, fm, b, fb, whole, abs_tol, 0)
    if not result > 0.0:
        raise SignChangeFault(
            f"non-positive passage time {result!r}; drive direction is "
            "inconsistent with the requested path")
    return result
