"""Pullback trajectory classification: tracking, tipping, or balanced on the
basin boundary.

The forced trajectory starts exactly at the attractor at the time the forcing
switches on (the unique solution converging to the attractor backward in time
is constant before that).  It is integrated through the forcing support in
co-moving coordinates, then under the bare field until it either settles back
to the attractor or leaves the basin through one of its boundary points.  The
knife-edge balanced case is measure-zero and numerically undecidable in a
single run, so it is reported only when the trajectory is still hovering when
the autonomous horizon expires; parameter studies localize it with
:func:`threshold_bracket`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field, replace
from typing import Callable

from .field import BasinGeometry, ScalarField
from .forcing import (Composite, ControlSignal, ForcingProfile,
                      PiecewiseLinear, derivative_signal)
from .integrate import (Event, IntegrationError, IntegrationSettings,
                        Trajectory, integrate_autonomous, integrate_pieces)

__all__ = [
    "ClassificationSettings",
    "TippingOutcome",
    "ThresholdBracket",
    "StraddleError",
    "pullback_start",
    "classify",
    "classify_control",
    "classify_x_frame",
    "threshold_bracket",
    "boundary_arrival",
]

TRACKS = "tracks"
TIPS = "tips"
CRITICAL = "critical"


class StraddleError(ValueError):
    """The family endpoints do not bracket a tipping threshold."""


@dataclass
class ClassificationSettings:
    """Tolerances for outcome decisions; ``None`` entries are resolved from
    the basin geometry (fractions of the radius / relaxation time)."""

    track_tol: float | None = None          # default 1e-6 * radius
    exit_margin: float | None = None        # default 1e-4 * radius
    pullback_tol: float = 1e-10
    autonomous_horizon: float | None = None  # default 1e4 / |df(attractor)|
    integration: IntegrationSettings = dataclass_field(
        default_factory=IntegrationSettings)


@dataclass(frozen=True)
class _Resolved:
    track_tol: float
    exit_margin: float
    pullback_tol: float
    horizon: float
    integration: IntegrationSettings


def _resolve(settings: ClassificationSettings | None, field: ScalarField,
             geometry: BasinGeometry) -> _Resolved:
    s = settings or ClassificationSettings()
    radius = geometry.radius
    track_tol = s.track_tol if s.track_tol is not None else 1e-6 * radius
    exit_margin = s.exit_margin if s.exit_margin is not None else 1e-4 * radius
    if s.autonomous_horizon is not None:
        horizon = s.autonomous_horizon
    else:
        # characteristic-time budget over the attractor's relaxation rate
        horizon = (s.integration.t_horizon_autonomous
                   / abs(field.df(geometry.attractor)))
    return _Resolved(track_tol=track_tol, exit_margin=exit_margin,
                     pullback_tol=s.pullback_tol, horizon=horizon,
                     integration=s.integration)


@dataclass(frozen=True)
class TippingOutcome:
    """Variant plus diagnostics; ``final_value`` is in the frame the
    classification was reported in."""

    variant: str
    y_at_forcing_end: float
    min_boundary_distance: float
    final_time: float
    final_value: float
    final_distance_to_attractor: float | None = None
    exit_side: int | None = None
    exit_time: float | None = None
    boundary_distance: float | None = None

    def to_json_dict(self) -> dict:
        out: dict = {"variant": self.variant}
        if self.exit_side is not None:
            out["exit_side"] = self.exit_side
        if self.exit_time is not None:
            out["exit_time"] = self.exit_time
        if self.boundary_distance is not None:
            out["boundary_distance"] = self.boundary_distance
        out["y_at_forcing_end"] = self.y_at_forcing_end
        out["min_boundary_distance"] = self.min_boundary_distance
        out["final_time"] = self.final_time
        out["final_value"] = self.final_value
        return out


# --------------------------------------------------------------------------
# pullback start
# --------------------------------------------------------------------------

def pullback_start(field: ScalarField, geometry: BasinGeometry,
                   profile: ForcingProfile,
                   settings: ClassificationSettings | None = None
                   ) -> tuple[float, float]:
    """Start of the unique trajectory converging to the attractor backward in
    time: the forcing vanishes before ``t0``, so the trajectory sits exactly
    at the attractor there."""
    rs = _resolve(settings, field, geometry)
    t0 = profile.start_time()
    scale = max(1.0, abs(profile.final_value()))
    if abs(profile.value(t0)) > rs.pullback_tol * scale:
        raise ValueError(
            "profile does not vanish before its support; pullback start undefined")
    return t0, geometry.attractor


# --------------------------------------------------------------------------
# forced-phase integration
# --------------------------------------------------------------------------

def _min_boundary_distance(traj: Trajectory, geometry: BasinGeometry) -> float:
    best = math.inf
    for y in traj.states:
        if math.isfinite(geometry.beta):
            best = min(best, abs(y - geometry.beta))
        if math.isfinite(geometry.alpha):
            best = min(best, abs(y - geometry.alpha))
    return best


def _exit_events(geometry: BasinGeometry, margin: float) -> list[Event]:
    events = []
    if math.isfinite(geometry.beta):
        events.append(Event("exit_high", geometry.beta + margin, +1))
    if math.isfinite(geometry.alpha):
        events.append(Event("exit_low", geometry.alpha - margin, -1))
    return events


def _constant_pieces(field: ScalarField, signal: ControlSignal,
                     t0: float, t1: float):
    f = field.f
    cuts = [t0]
    for b in signal.boundaries():
        if t0 < b < t1 and b > cuts[-1]:
            cuts.append(b)
    cuts.append(t1)
    pieces = []
    for a, b in zip(cuts, cuts[1:]):
        c = signal.value(0.5 * (a + b))
        if c == 0.0:
            pieces.append((a, b, lambda t, y, _f=f: _f(y)))
        else:
            pieces.append((a, b, lambda t, y, _f=f, _c=c: _f(y) + _c))
    return pieces


def _is_piecewise_linear(profile: ForcingProfile) -> bool:
    if isinstance(profile, PiecewiseLinear):
        return True
    if isinstance(profile, Composite):
        return all(_is_piecewise_linear(p) for p in profile.parts)
    return False


def _forced_pieces(field: ScalarField, profile: ForcingProfile,
                   t0: float, t1: float):
    if _is_piecewise_linear(profile):
        return _constant_pieces(field, derivative_signal(profile), t0, t1)
    # smooth drive (tanh pulse or mixed composite), split where non-smooth
    f = field.f
    speed = profile.speed
    cuts = [t0]
    for b in sorted(profile.speed_breakpoints()):
        if t0 < b < t1 and b > cuts[-1]:
            cuts.append(b)
    cuts.append(t1)
    rhs = lambda t, y: f(y) + speed(t)
    return [(a, b, rhs) for a, b in zip(cuts, cuts[1:])]


# --------------------------------------------------------------------------
# classification
# --------------------------------------------------------------------------

def _classify_core(field: ScalarField, geometry: BasinGeometry,
                   pieces, t0: float, t_support_end: float,
                   rs: _Resolved) -> TippingOutcome:
    a = geometry.attractor
    exit_events = _exit_events(geometry, rs.exit_margin)

    min_dist = math.inf
    if t_support_end > t0 and pieces:
        forced = integrate_pieces(pieces, a, exit_events, rs.integration)
        min_dist = _min_boundary_distance(forced, geometry)
        if forced.reason == "event":
            side = 1 if forced.event_label == "exit_high" else -1
            return TippingOutcome(
                variant=TIPS, y_at_forcing_end=forced.final_state,
                min_boundary_distance=min_dist, final_time=forced.final_time,
                final_value=forced.final_state, exit_side=side,
                exit_time=forced.event_time)
        if forced.reason == "blowup":
            side = 1 if forced.final_state > a else -1
            return TippingOutcome(
                variant=TIPS, y_at_forcing_end=forced.final_state,
                min_boundary_distance=min_dist, final_time=forced.final_time,
                final_value=forced.final_state, exit_side=side,
                exit_time=forced.final_time)
        if forced.reason == "step_failure":
            raise IntegrationError(
                "step size underflow while integrating the forced phase")
        y_end = forced.final_state
    else:
        y_end = a

    if math.isfinite(geometry.beta):
        min_dist = min(min_dist, abs(y_end - geometry.beta))
    if math.isfinite(geometry.alpha):
        min_dist = min(min_dist, abs(y_end - geometry.alpha))

    if abs(y_end - a) <= rs.track_tol:
        return TippingOutcome(
            variant=TRACKS, y_at_forcing_end=y_end,
            min_boundary_distance=min_dist, final_time=t_support_end,
            final_value=y_end, final_distance_to_attractor=abs(y_end - a))

    settle_events = [Event("settle_high", a + rs.track_tol, -1),
                     Event("settle_low", a - rs.track_tol, +1)]
    tail = integrate_autonomous(field, y_end, t_support_end,
                                t_support_end + rs.horizon,
                                settle_events + exit_events, rs.integration)
    min_dist = min(min_dist, _min_boundary_distance(tail, geometry))

    if tail.reason == "event":
        if tail.event_label in ("settle_high", "settle_low"):
            return TippingOutcome(
                variant=TRACKS, y_at_forcing_end=y_end,
                min_boundary_distance=min_dist, final_time=tail.final_time,
                final_value=tail.final_state,
                final_distance_to_attractor=abs(tail.final_state - a))
        side = 1 if tail.event_label == "exit_high" else -1
        return TippingOutcome(
            variant=TIPS, y_at_forcing_end=y_end,
            min_boundary_distance=min_dist, final_time=tail.final_time,
            final_value=tail.final_state, exit_side=side,
            exit_time=tail.event_time)
    if tail.reason == "blowup":
        side = 1 if tail.final_state > a else -1
        return TippingOutcome(
            variant=TIPS, y_at_forcing_end=y_end,
            min_boundary_distance=min_dist, final_time=tail.final_time,
            final_value=tail.final_state, exit_side=side,
            exit_time=tail.final_time)
    if tail.reason == "step_failure":
        raise IntegrationError(
            "step size underflow while integrating the autonomous tail")

    # horizon expired with the trajectory still hovering near the boundary
    hover = math.inf
    if math.isfinite(geometry.beta):
        hover = min(hover, abs(tail.final_state - geometry.beta))
    if math.isfinite(geometry.alpha):
        hover = min(hover, abs(tail.final_state - geometry.alpha))
    return TippingOutcome(
        variant=CRITICAL, y_at_forcing_end=y_end,
        min_boundary_distance=min_dist, final_time=tail.final_time,
        final_value=tail.final_state, boundary_distance=hover)


def classify(field: ScalarField, geometry: BasinGeometry,
             profile: ForcingProfile,
             settings: ClassificationSettings | None = None) -> TippingOutcome:
    """Classify the pullback trajectory of a forcing profile in co-moving
    coordinates."""
    rs = _resolve(settings, field, geometry)
    t0, _ = pullback_start(field, geometry, profile, settings)
    t_end = profile.end_time()
    pieces = _forced_pieces(field, profile, t0, t_end) if t_end > t0 else []
    return _classify_core(field, geometry, pieces, t0, t_end, rs)


def classify_control(field: ScalarField, geometry: BasinGeometry,
                     control: ControlSignal,
                     settings: ClassificationSettings | None = None
                     ) -> TippingOutcome:
    """Classify a piecewise-constant control signal directly."""
    rs = _resolve(settings, field, geometry)
    t0 = control.start_time()
    t_end = control.end_time()
    pieces = (_constant_pieces(field, control, t0, t_end)
              if t_end > t0 else [])
    return _classify_core(field, geometry, pieces, t0, t_end, rs)


def classify_x_frame(field: ScalarField, geometry: BasinGeometry,
                     profile: ForcingProfile,
                     settings: ClassificationSettings | None = None
                     ) -> TippingOutcome:
    """Classification reported in the original (shifting) frame.

    The co-moving substitution is a bijection on trajectories, so the variant
    is identical; reported positions are shifted by the forcing value at
    their own times."""
    out = classify(field, geometry, profile, settings)
    return replace(
        out,
        final_value=out.final_value - profile.value(out.final_time),
        y_at_forcing_end=out.y_at_forcing_end - profile.value(profile.end_time()),
    )


def boundary_arrival(field: ScalarField, geometry: BasinGeometry,
                     control: ControlSignal,
                     settings: ClassificationSettings | None = None,
                     arrival_tol: float | None = None) -> bool:
    """True when the controlled trajectory reaches the basin boundary, either
    crossing it or grazing it within ``arrival_tol`` (1e-5 * radius by
    default)."""
    tol = arrival_tol if arrival_tol is not None else 1e-5 * geometry.radius
    outcome = classify_control(field, geometry, control, settings)
    if outcome.variant == TIPS:
        return True
    return outcome.min_boundary_distance <= tol


# --------------------------------------------------------------------------
# threshold bracketing
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ThresholdBracket:
    param_critical: float
    bracket_width: float


def _leans_tipping(outcome: TippingOutcome, geometry: BasinGeometry) -> bool:
    if outcome.variant == TIPS:
        return True
    if outcome.variant == TRACKS:
        return False
    # hovering: the repeller side of the final state decides the eventual fate
    y = outcome.final_value
    dist_high = abs(y - geometry.beta) if math.isfinite(geometry.beta) else math.inf
    dist_low = abs(y - geometry.alpha) if math.isfinite(geometry.alpha) else math.inf
    if dist_high <= dist_low:
        return y >= geometry.beta
    return y <= geometry.alpha


def threshold_bracket(field: ScalarField, geometry: BasinGeometry,
                      family: Callable[[float], ForcingProfile],
                      param_range: tuple[float, float],
                      settings: ClassificationSettings | None = None,
                      rel_width: float = 1e-6) -> ThresholdBracket:
    """Bisect a monotone forcing family for its tipping threshold.

    The low end of ``param_range`` must track and the high end must tip;
    otherwise no threshold is bracketed and :class:`StraddleError` is raised.
    """
    lo, hi = float(param_range[0]), float(param_range[1])
    if not lo < hi:
        raise ValueError("param_range must be increasing")
    if _leans_tipping(classify(field, geometry, family(lo), settings), geometry):
        raise StraddleError(f"family already tips at the low end {lo!r}")
    if not _leans_tipping(classify(field, geometry, family(hi), settings), geometry):
        raise StraddleError(f"family does not tip at the high end {hi!r}")

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if _leans_tipping(classify(field, geometry, family(mid), settings),
                          geometry):
            hi = mid
        else:
            lo = mid
        if hi - lo <= rel_width * max(abs(lo), abs(hi)):
            break
    return ThresholdBracket(param_critical=0.5 * (lo + hi),
                            bracket_width=hi - lo)
