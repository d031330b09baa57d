"""External forcing functions and their derivative control signals.

A forcing is a function of time that starts at 0, settles to a finite limit,
and drives the dynamics through its time derivative once the problem is moved
to co-moving coordinates.  Three representations are supported: piecewise
linear (exact slopes), truncated tanh ramps (analytic pulse), and composites
with disjoint supports.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ForcingProfile",
    "PiecewiseLinear",
    "TanhRamp",
    "Composite",
    "ControlSegment",
    "ControlSignal",
    "ArclengthReport",
    "make_piecewise_linear_ramp",
    "make_tanh_ramp",
    "make_bang_bang",
    "derivative_signal",
    "arclength_report",
    "sample_random_forcing",
    "parse_forcing_spec",
]

TANH_TAIL_TOL = 1e-10
TANH_SAMPLING_SEGMENTS = 2048


# --------------------------------------------------------------------------
# control signals (piecewise-constant derivative data)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ControlSegment:
    start: float
    end: float
    value: float


@dataclass(frozen=True)
class ControlSignal:
    """Piecewise-constant function of time, zero outside its segments."""

    segments: tuple[ControlSegment, ...]

    def __post_init__(self):
        prev_end = -math.inf
        for seg in self.segments:
            if not (math.isfinite(seg.start) and math.isfinite(seg.end)
                    and math.isfinite(seg.value)):
                raise ValueError(f"non-finite control segment {seg!r}")
            if not seg.start < seg.end:
                raise ValueError(f"empty control segment {seg!r}")
            if seg.start < prev_end:
                raise ValueError("control segments must be ordered and disjoint")
            prev_end = seg.end

    def value(self, t: float) -> float:
        for seg in self.segments:
            if seg.start <= t < seg.end:
                return seg.value
            if t < seg.start:
                break
        return 0.0

    def integral(self) -> float:
        return sum(s.value * (s.end - s.start) for s in self.segments)

    def abs_integral(self) -> float:
        return sum(abs(s.value) * (s.end - s.start) for s in self.segments)

    def ess_sup(self) -> float:
        return max((abs(s.value) for s in self.segments), default=0.0)

    def start_time(self) -> float:
        return self.segments[0].start if self.segments else 0.0

    def end_time(self) -> float:
        return self.segments[-1].end if self.segments else 0.0

    def boundaries(self) -> list[float]:
        times: list[float] = []
        for seg in self.segments:
            if not times or seg.start > times[-1]:
                times.append(seg.start)
            times.append(seg.end)
        return times

    def shifted(self, dt: float) -> "ControlSignal":
        return ControlSignal(tuple(
            ControlSegment(s.start + dt, s.end + dt, s.value)
            for s in self.segments))


def make_bang_bang(height: float, onset: float, width: float,
                   sign: int) -> ControlSignal:
    """Single rectangular pulse of magnitude ``height`` and the given sign."""
    if not height > 0.0:
        raise ValueError("pulse height must be positive")
    if not width > 0.0:
        raise ValueError("pulse width must be positive")
    if sign not in (-1, 1):
        raise ValueError("sign must be +1 or -1")
    return ControlSignal((ControlSegment(onset, onset + width, sign * height),))


# --------------------------------------------------------------------------
# forcing profiles
# --------------------------------------------------------------------------

class ForcingProfile:
    """Common interface for forcing representations."""

    def value(self, t: float) -> float:
        raise NotImplementedError

    def speed(self, t: float) -> float:
        raise NotImplementedError

    def start_time(self) -> float:
        raise NotImplementedError

    def end_time(self) -> float:
        raise NotImplementedError

    def final_value(self) -> float:
        raise NotImplementedError

    def arclength(self) -> float:
        raise NotImplementedError

    def sup_speed(self) -> float:
        raise NotImplementedError

    def monotone(self) -> bool:
        raise NotImplementedError

    def speed_breakpoints(self) -> list[float]:
        """Times where the derivative may be discontinuous or non-smooth."""
        raise NotImplementedError


@dataclass(frozen=True)
class PiecewiseLinear(ForcingProfile):
    """Knot list ``(t, value)``; constant before the first and after the last
    knot.  The first knot value must be 0 so the profile vanishes backward in
    time."""

    knots: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.knots:
            raise ValueError("at least one knot required")
        times = [k[0] for k in self.knots]
        for t, v in self.knots:
            if not (math.isfinite(t) and math.isfinite(v)):
                raise ValueError("knots must be finite")
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise ValueError("knot times must be strictly increasing")
        if self.knots[0][1] != 0.0:
            raise ValueError("first knot value must be 0")

    def _times(self) -> list[float]:
        return [k[0] for k in self.knots]

    def value(self, t: float) -> float:
        knots = self.knots
        if t <= knots[0][0]:
            return knots[0][1]
        if t >= knots[-1][0]:
            return knots[-1][1]
        i = bisect_right(self._times(), t) - 1
        t0, v0 = knots[i]
        t1, v1 = knots[i + 1]
        return v0 + (v1 - v0) * (t - t0) / (t1 - t0)

    def speed(self, t: float) -> float:
        knots = self.knots
        if t < knots[0][0] or t >= knots[-1][0]:
            return 0.0
        i = bisect_right(self._times(), t) - 1
        t0, v0 = knots[i]
        t1, v1 = knots[i + 1]
        return (v1 - v0) / (t1 - t0)

    def start_time(self) -> float:
        return self.knots[0][0]

    def end_time(self) -> float:
        return self.knots[-1][0]

    def final_value(self) -> float:
        return self.knots[-1][1]

    def arclength(self) -> float:
        return sum(abs(v1 - v0) for (_, v0), (_, v1)
                   in zip(self.knots, self.knots[1:]))

    def sup_speed(self) -> float:
        return max((abs((v1 - v0) / (t1 - t0)) for (t0, v0), (t1, v1)
                    in zip(self.knots, self.knots[1:])), default=0.0)

    def monotone(self) -> bool:
        diffs = [v1 - v0 for (_, v0), (_, v1) in zip(self.knots, self.knots[1:])]
        return all(d >= 0.0 for d in diffs) or all(d <= 0.0 for d in diffs)

    def speed_breakpoints(self) -> list[float]:
        return [k[0] for k in self.knots]

    def shifted(self, dt: float) -> "PiecewiseLinear":
        return PiecewiseLinear(tuple((t + dt, v) for t, v in self.knots))

    def direction(self) -> int:
        f = self.final_value()
        return 0 if f == 0.0 else (1 if f > 0.0 else -1)


@dataclass(frozen=True)
class TanhRamp(ForcingProfile):
    """Sigmoid ramp from 0 to ``lambda_inf``, truncated to a finite support.

    Outside ``[-truncation_time, truncation_time]`` the profile is treated as
    exactly 0 / exactly ``lambda_inf``, which makes the pullback start exact;
    the derivative mass dropped in each tail is below the truncation
    tolerance used at construction.
    """

    lambda_inf: float
    rate: float
    truncation_time: float

    def __post_init__(self):
        if not (self.lambda_inf > 0.0 and self.rate > 0.0
                and self.truncation_time > 0.0):
            raise ValueError("lambda_inf, rate, truncation_time must be positive")

    def value(self, t: float) -> float:
        if t <= -self.truncation_time:
            return 0.0
        if t >= self.truncation_time:
            return self.lambda_inf
        return 0.5 * self.lambda_inf * (
            1.0 + math.tanh(0.5 * self.lambda_inf * self.rate * t))

    def speed(self, t: float) -> float:
        if t < -self.truncation_time or t >= self.truncation_time:
            return 0.0
        sech = 1.0 / math.cosh(0.5 * self.lambda_inf * self.rate * t)
        return (0.5 * self.lambda_inf) ** 2 * self.rate * sech * sech

    def start_time(self) -> float:
        return -self.truncation_time

    def end_time(self) -> float:
        return self.truncation_time

    def final_value(self) -> float:
        return self.lambda_inf

    def arclength(self) -> float:
        return self.lambda_inf

    def sup_speed(self) -> float:
        return (0.5 * self.lambda_inf) ** 2 * self.rate

    def monotone(self) -> bool:
        return True

    def speed_breakpoints(self) -> list[float]:
        return [-self.truncation_time, self.truncation_time]

    def direction(self) -> int:
        return 1


@dataclass(frozen=True)
class Composite(ForcingProfile):
    """Ordered profiles with disjoint supports, summed."""

    parts: tuple[ForcingProfile, ...]

    def __post_init__(self):
        if not self.parts:
            raise ValueError("composite needs at least one part")
        for prev, nxt in zip(self.parts, self.parts[1:]):
            if nxt.start_time() < prev.end_time():
                raise ValueError("composite parts must have disjoint supports")

    def value(self, t: float) -> float:
        return sum(p.value(t) for p in self.parts)

    def speed(self, t: float) -> float:
        return sum(p.speed(t) for p in self.parts)

    def start_time(self) -> float:
        return self.parts[0].start_time()

    def end_time(self) -> float:
        return self.parts[-1].end_time()

    def final_value(self) -> float:
        return sum(p.final_value() for p in self.parts)

    def arclength(self) -> float:
        return sum(p.arclength() for p in self.parts)

    def sup_speed(self) -> float:
        return max(p.sup_speed() for p in self.parts)

    def monotone(self) -> bool:
        if not all(p.monotone() for p in self.parts):
            return False
        signs = {d for d in (_direction(p) for p in self.parts) if d != 0}
        return len(signs) <= 1

    def speed_breakpoints(self) -> list[float]:
        out: list[float] = []
        for p in self.parts:
            out.extend(p.speed_breakpoints())
        return out

    def shifted(self, dt: float) -> "Composite":
        return Composite(tuple(p.shifted(dt) for p in self.parts))  # type: ignore[attr-defined]


def _direction(profile: ForcingProfile) -> int:
    d = getattr(profile, "direction", None)
    if d is not None:
        return d()
    f = profile.final_value()
    return 0 if f == 0.0 else (1 if f > 0.0 else -1)


# --------------------------------------------------------------------------
# constructors
# --------------------------------------------------------------------------

def make_piecewise_linear_ramp(lambda_inf: float, slope: float) -> PiecewiseLinear:
    """Linear ramp from 0 to ``lambda_inf`` at constant ``slope``."""
    if not (lambda_inf > 0.0 and math.isfinite(lambda_inf)):
        raise ValueError("lambda_inf must be positive and finite")
    if not (slope > 0.0 and math.isfinite(slope)):
        raise ValueError("slope must be positive and finite")
    return PiecewiseLinear(((0.0, 0.0), (lambda_inf / slope, lambda_inf)))


def make_tanh_ramp(lambda_inf: float, rate: float,
                   tail_tol: float = TANH_TAIL_TOL) -> TanhRamp:
    """Tanh ramp truncated where both tails are within ``tail_tol`` of their
    limits (relative to ``lambda_inf``)."""
    if not (lambda_inf > 0.0 and rate > 0.0):
        raise ValueError("lambda_inf and rate must be positive")
    if not 0.0 < tail_tol <= 1e-6:
        raise ValueError("tail_tol must lie in (0, 1e-6]")
    # target slightly inside the tolerance: evaluating the tail involves a
    # 1 - tanh cancellation whose roundoff would otherwise graze the bound
    target = 0.999 * tail_tol
    truncation = math.log((1.0 - target) / target) / (lambda_inf * rate)
    return TanhRamp(lambda_inf=lambda_inf, rate=rate, truncation_time=truncation)


# --------------------------------------------------------------------------
# derivative signals and arclength
# --------------------------------------------------------------------------

def derivative_signal(profile: ForcingProfile) -> ControlSignal:
    """Time derivative of the profile as a piecewise-constant signal.

    Piecewise-linear profiles yield their exact per-segment slopes.  A tanh
    ramp is sampled onto a uniform grid across its truncated support (the
    classifier integrates the analytic pulse instead; this form exists for
    callers that need an explicit signal).
    """
    if isinstance(profile, PiecewiseLinear):
        segments = []
        for (t0, v0), (t1, v1) in zip(profile.knots, profile.knots[1:]):
            slope = (v1 - v0) / (t1 - t0)
            if slope != 0.0:
                segments.append(ControlSegment(t0, t1, slope))
        return ControlSignal(tuple(segments))
    if isinstance(profile, TanhRamp):
        ts = np.linspace(-profile.truncation_time, profile.truncation_time,
                         TANH_SAMPLING_SEGMENTS + 1)
        segments = []
        for t0, t1 in zip(ts, ts[1:]):
            slope = (profile.value(float(t1)) - profile.value(float(t0))) / (t1 - t0)
            if slope != 0.0:
                segments.append(ControlSegment(float(t0), float(t1), float(slope)))
        return ControlSignal(tuple(segments))
    if isinstance(profile, Composite):
        segments = []
        for part in profile.parts:
            segments.extend(derivative_signal(part).segments)
        return ControlSignal(tuple(segments))
    raise TypeError(f"unsupported profile type {type(profile).__name__}")


@dataclass(frozen=True)
class ArclengthReport:
    arclength: float
    sup_speed: float
    final_value: float
    monotone: bool


def arclength_report(profile: ForcingProfile) -> ArclengthReport:
    return ArclengthReport(
        arclength=profile.arclength(),
        sup_speed=profile.sup_speed(),
        final_value=profile.final_value(),
        monotone=profile.monotone(),
    )


# --------------------------------------------------------------------------
# random forcings for verification sweeps
# --------------------------------------------------------------------------

def sample_random_forcing(arclength: float, speed_cap: float,
                          n_segments: int, seed: int) -> PiecewiseLinear:
    """Random piecewise-linear forcing with the exact requested arclength and
    every slope magnitude in ``[0.2, 1.0] * speed_cap``.

    The signed displacements partition ``arclength``; segment durations
    follow from the drawn slopes, so the total duration is emergent.
    Deterministic for a given seed.
    """
    if not arclength > 0.0:
        raise ValueError("arclength must be positive")
    if not speed_cap > 0.0:
        raise ValueError("speed_cap must be positive")
    if n_segments < 1:
        raise ValueError("n_segments must be at least 1")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    weights = rng.uniform(0.05, 1.0, size=n_segments)
    magnitudes = weights * (arclength / weights.sum())
    signs = rng.choice((-1.0, 1.0), size=n_segments)
    speeds = rng.uniform(0.2, 1.0, size=n_segments) * speed_cap

    knots = [(0.0, 0.0)]
    t, v = 0.0, 0.0
    for mag, sign, speed in zip(magnitudes, signs, speeds):
        t += float(mag / speed)
        v += float(sign * mag)
        knots.append((t, v))
    return PiecewiseLinear(tuple(knots))


# --------------------------------------------------------------------------
# CLI mini-language
# --------------------------------------------------------------------------

def parse_forcing_spec(spec: str) -> ForcingProfile:
    """Parse a forcing specification string.

    Formats: ``pl:LAMBDA_INF:SLOPE``, ``tanh:LAMBDA_INF:R``,
    ``knots:t0,v0;t1,v1;...``, ``random:L:CAP:N:SEED``.
    """
    head, _, rest = spec.partition(":")
    try:
        if head == "pl":
            lam, slope = rest.split(":")
            return make_piecewise_linear_ramp(float(lam), float(slope))
        if head == "tanh":
            lam, rate = rest.split(":")
            return make_tanh_ramp(float(lam), float(rate))
        if head == "knots":
            knots = []
            for pair in rest.split(";"):
                t_text, v_text = pair.split(",")
                knots.append((float(t_text), float(v_text)))
            return PiecewiseLinear(tuple(knots))
        if head == "random":
            l_text, cap_text, n_text, seed_text = rest.split(":")
            return sample_random_forcing(float(l_text), float(cap_text),
                                         int(n_text), int(seed_text))
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ValueError) and "forcing spec" in str(exc):
            raise
        raise ValueError(f"bad forcing spec {spec!r}: {exc}") from exc
    raise ValueError(
        f"bad forcing spec {spec!r}: expected pl:, tanh:, knots: or random:")
