"""Slow/fast geometry and gait analysis of closed-loop trajectories.

The voltage nullcline ``-pi_c V^3 + pi_l V = pi_s s`` is the slow manifold.
Its folds sit at ``V = +-V_minus`` with ``V_minus = sqrt(pi_l / (3 pi_c))``;
from a fold the voltage jumps to the opposite branch at ``-+2 V_minus``. The
fold at ``+V_minus`` is reached at strain ``+s_switch``: ``F(V) = -pi_c V^3 +
pi_l V`` is maximal there, so the double root appears for positive strain.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .integrate import Trajectory, dense_eval
from .model import DimensionlessGroups, rhs_dimensionless

__all__ = [
    "SwitchingPoints",
    "ManifoldRoot",
    "PhaseSegment",
    "LimitCycleSummary",
    "NoLimitCycleError",
    "slow_manifold_roots",
    "switching_points",
    "segment_phases",
    "detect_limit_cycle",
    "manifold_residual",
    "hysteresis_loop",
    "loop_symmetry_distance",
    "loop_area",
    "section_crossings",
    "displacement_speed",
]

DEFAULT_RATE_THRESHOLD = 30.0


class NoLimitCycleError(RuntimeError):
    """The trajectory does not settle on a periodic orbit that can be measured."""


class TrajectoryTooShortError(ValueError):
    pass


@dataclass(frozen=True)
class SwitchingPoints:
    """Analytic fold data, as positive magnitudes."""

    V_minus: float
    V_plus: float
    s_switch: float

    def as_dict(self) -> dict:
        return asdict(self)


class ManifoldRoot(NamedTuple):
    V: float
    stability: str


@dataclass(frozen=True)
class PhaseSegment:
    kind: str
    t_start: float
    t_end: float

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


@dataclass
class LimitCycleSummary:
    period: float
    period_spread: float
    strain_amplitude: float
    v_jump_start: float
    v_jump_end: float
    com_advance_per_cycle: float
    mean_speed: float
    n_cycles_used: int
    half_period: float
    periods: list = field(default_factory=list)
    crossing_times: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)


def switching_points(g: DimensionlessGroups) -> SwitchingPoints:
    """Fold voltage, landing voltage and threshold strain.

    Only the ratios ``pi_l/pi_c`` and ``pi_l/pi_s`` enter, so scaling all
    three electrical groups by a common factor leaves the result unchanged.
    """
    r_lc = g.pi_l / g.pi_c
    r_ls = g.pi_l / g.pi_s
    V_minus = math.sqrt(r_lc / 3.0)
    s_switch = 2.0 * r_ls * math.sqrt(r_lc) / (3.0 * math.sqrt(3.0))
    return SwitchingPoints(V_minus=V_minus, V_plus=2.0 * V_minus, s_switch=s_switch)


def _cubic(V, s, g):
    return -g.pi_c * V**3 + g.pi_l * V - g.pi_s * s


def _polish(V, s, g):
    for _ in range(2):
        f = _cubic(V, s, g)
        df = -3.0 * g.pi_c * V * V + g.pi_l
        if df == 0.0:
            break
        V_new = V - f / df
        if abs(_cubic(V_new, s, g)) < abs(f):
            V = V_new
        else:
            break
    return V


def slow_manifold_roots(s: float, g: DimensionlessGroups) -> list[ManifoldRoot]:
    """Real voltages on the slow manifold at strain ``s``, ascending.

    Three roots (with a repeated one at a fold) inside the bistable band
    ``|s| <= s_switch``, one outside. A root is stable when
    ``d/dV (-pi_c V^3 + pi_l V) < 0``.
    """
    # V^3 + p V + q = 0
    p = -g.pi_l / g.pi_c
    q = g.pi_s * s / g.pi_c
    disc = 4.0 * p**3 + 27.0 * q**2
    if disc < 0.0:
        r = 2.0 * math.sqrt(-p / 3.0)
        arg = 3.0 * q / (p * r)
        phi = math.acos(max(-1.0, min(1.0, arg)))
        roots = [r * math.cos(phi / 3.0 - 2.0 * math.pi * k / 3.0) for k in range(3)]
    elif disc == 0.0:
        if q == 0.0:
            roots = [0.0, 0.0, 0.0]
        else:
            roots = [3.0 * q / p, -1.5 * q / p, -1.5 * q / p]
    else:
        sq = math.sqrt(disc / 108.0)
        roots = [np.cbrt(-0.5 * q + sq) + np.cbrt(-0.5 * q - sq)]
    out = []
    for V in sorted(roots):
        V = float(_polish(V, s, g))
        slope = -3.0 * g.pi_c * V * V + g.pi_l
        out.append(ManifoldRoot(V, "stable" if slope < 0.0 else "unstable"))
    return out


def manifold_residual(traj: Trajectory, g: DimensionlessGroups) -> np.ndarray:
    """Distance from the slow manifold, ``|F(V) - pi_s s| / (pi_l V_minus)``."""
    V = traj.states[:, 0]
    s = traj.states[:, 2]
    return np.abs(_cubic(V, s, g)) / (g.pi_l * switching_points(g).V_minus)


def _two_means_1d(x: np.ndarray, iters: int = 100) -> np.ndarray:
    lo, hi = float(x.min()), float(x.max())
    labels = np.zeros(x.shape, dtype=bool)
    for _ in range(iters):
        new = np.abs(x - hi) < np.abs(x - lo)
        if np.array_equal(new, labels) and _ > 0:
            break
        labels = new
        if labels.all() or not labels.any():
            break
        lo, hi = float(x[~labels].mean()), float(x[labels].mean())
    return labels


def voltage_rate(traj: Trajectory, g: DimensionlessGroups | None = None) -> np.ndarray:
    if g is None:
        return traj.derivatives[:, 0]
    return rhs_dimensionless(traj.states.T, g)[0]


def segment_phases(
    traj: Trajectory,
    g: DimensionlessGroups | None = None,
    v_rate_threshold: float = DEFAULT_RATE_THRESHOLD,
) -> list[PhaseSegment]:
    """Split the trajectory into alternating slow and fast segments.

    ``log10 |V'|`` is split into two clusters; a sample is fast when ``|V'|``
    exceeds ``v_rate_threshold`` times the median of the slow cluster. Runs
    shorter than one sample are not possible, so segments tile the span
    exactly from the first to the last recorded time.
    """
    if len(traj) < 3:
        raise TrajectoryTooShortError("need at least three samples to classify phases")
    rate = np.abs(voltage_rate(traj, g))
    logr = np.log10(np.maximum(rate, 1e-300))
    high = _two_means_1d(logr)
    if high.all() or not high.any() or np.ptp(logr) < 1.0:
        slow_median = float(np.median(rate))
    else:
        slow_median = float(np.median(rate[~high]))
    if slow_median > 0.0:
        fast = rate > v_rate_threshold * slow_median
    else:
        fast = np.zeros(rate.shape, dtype=bool)

    t = traj.times
    change = np.flatnonzero(np.diff(fast.astype(np.int8))) + 1
    starts = np.concatenate([[0], change])
    ends = np.concatenate([change, [len(t) - 1]])
    return [
        PhaseSegment("fast" if fast[a] else "slow", float(t[a]), float(t[b]))
        for a, b in zip(starts, ends)
    ]


def section_crossings(traj: Trajectory, direction: int = 1) -> np.ndarray:
    """Times where ``s`` crosses zero (``direction`` +1 up, -1 down, 0 both).

    Located on the dense interpolant of the recorded samples. Upward
    crossings reuse the integrator's section events when present.
    """
    if direction == 1:
        ev = traj.events_of("poincare-crossing")
        if ev:
            return np.array([e.time for e in ev])
    s = traj.states[:, 2]
    sa, sb = s[:-1], s[1:]
    up = (sa < 0.0) & (sb >= 0.0)
    down = (sa > 0.0) & (sb <= 0.0)
    mask = up if direction == 1 else down if direction == -1 else up | down
    out = []
    for i in np.flatnonzero(mask):
        ta, tb = traj.times[i], traj.times[i + 1]
        if sb[i] == 0.0:
            out.append(float(tb))
            continue
        out.append(brentq(lambda tt: dense_eval(traj, tt)[2], ta, tb, xtol=1e-13, rtol=1e-15))
    return np.array(out)


def _u_com_at(traj: Trajectory, times: np.ndarray) -> np.ndarray:
    if traj.u_com is None:
        raise ValueError("trajectory does not track u_com")
    return np.array([dense_eval(traj, t)[-1] for t in times])


def detect_limit_cycle(
    traj: Trajectory,
    g: DimensionlessGroups | None = None,
    transient_crossings: int = 2,
    min_crossings: int = 4,
    max_spread: float = 0.05,
    v_rate_threshold: float = DEFAULT_RATE_THRESHOLD,
) -> LimitCycleSummary:
    """Measure the periodic orbit through the section ``s = 0``, ``v_s > 0``.

    The first ``transient_crossings`` crossings are dropped; at least
    ``min_crossings`` must remain and the spread of the periods between
    them, ``(max - min) / mean``, must not exceed ``max_spread``.
    """
    crossings = section_crossings(traj, 1)
    kept = crossings[transient_crossings:]
    if len(kept) < min_crossings:
        raise NoLimitCycleError(
            f"found {len(crossings)} section crossings in [{traj.t0:g}, {traj.t1:g}], "
            f"need {min_crossings} after discarding {transient_crossings}"
        )
    periods = np.diff(kept)
    period = float(periods.mean())
    spread = float((periods.max() - periods.min()) / period)
    if spread > max_spread:
        raise NoLimitCycleError(f"period spread {spread:.3%} exceeds {max_spread:.0%}")

    t = traj.times
    span = (t >= kept[0]) & (t <= kept[-1])
    strain_amplitude = float(np.abs(traj.states[span, 2]).max())

    starts, ends = [], []
    for seg in segment_phases(traj, g, v_rate_threshold):
        if seg.kind == "fast" and seg.t_start >= kept[0] and seg.t_end <= kept[-1]:
            i0 = np.searchsorted(t, seg.t_start)
            i1 = np.searchsorted(t, seg.t_end)
            starts.append(abs(traj.states[i0, 0]))
            ends.append(abs(traj.states[i1, 0]))
    if not starts:
        raise NoLimitCycleError("no fast jumps inside the measured cycles")

    u = _u_com_at(traj, kept)
    advance = float(np.diff(u).mean())

    both = section_crossings(traj, 0)
    both = both[(both >= kept[0]) & (both <= kept[-1])]
    half = float(np.diff(both).mean()) if len(both) > 1 else float("nan")

    return LimitCycleSummary(
        period=period,
        period_spread=spread,
        strain_amplitude=strain_amplitude,
        v_jump_start=float(np.mean(starts)),
        v_jump_end=float(np.mean(ends)),
        com_advance_per_cycle=advance,
        mean_speed=advance / period,
        n_cycles_used=len(periods),
        half_period=half,
        periods=[float(x) for x in periods],
        crossing_times=[float(x) for x in kept],
    )


def hysteresis_loop(
    traj: Trajectory,
    summary: LimitCycleSummary | None = None,
    max_gap: float = 1e-3,
) -> tuple[np.ndarray, np.ndarray]:
    """``(s, V)`` over the last measured cycle, from one section crossing to the next.

    Intervals whose chord exceeds ``max_gap`` (in units of the cycle
    amplitude) are refined on the dense interpolant, so the fast jumps are
    traced as finely as the slow branches.
    """
    if summary is None:
        summary = detect_limit_cycle(traj)
    ta, tb = summary.crossing_times[-2], summary.crossing_times[-1]
    t = traj.times
    inside = np.flatnonzero((t > ta) & (t < tb))
    knots = np.concatenate([[ta], t[inside], [tb]])
    x = dense_eval(traj, knots)
    s, V = x[:, 2], x[:, 0]
    chord = np.hypot(np.diff(s) / np.abs(s).max(), np.diff(V) / np.abs(V).max())
    n_sub = np.maximum(1, np.ceil(chord / max_gap).astype(int))
    if np.any(n_sub > 1):
        pieces = [np.linspace(a, b, n, endpoint=False) for a, b, n in zip(knots[:-1], knots[1:], n_sub)]
        fine = np.concatenate(pieces + [[tb]])
        x = dense_eval(traj, fine)
        s, V = x[:, 2], x[:, 0]
    return s, V


def loop_area(s: np.ndarray, V: np.ndarray) -> float:
    """Enclosed area of a closed ``(s, V)`` polygon (shoelace)."""
    return 0.5 * abs(float(np.dot(s, np.roll(V, -1)) - np.dot(V, np.roll(s, -1))))


def loop_symmetry_distance(s: np.ndarray, V: np.ndarray) -> float:
    """Largest distance from the sign-flipped loop to the loop itself.

    Coordinates are divided by their amplitudes first, so the result is a
    fraction of the cycle amplitude.
    """
    pts = np.column_stack([s / np.abs(s).max(), V / np.abs(V).max()])
    dist, _ = cKDTree(pts).query(-pts)
    return float(dist.max())


def displacement_speed(traj: Trajectory) -> float:
    """Net COM displacement over the recorded span divided by its duration.

    This is the locomotion measure when no periodic orbit is found, e.g. for
    creeping or stuck gaits. On a limit cycle it tends to ``mean_speed`` as
    the span grows.
    """
    if traj.u_com is None:
        raise ValueError("trajectory does not track u_com")
    span = traj.times[-1] - traj.times[0]
    if span <= 0.0:
        raise TrajectoryTooShortError("trajectory has zero duration")
    return float((traj.u_com[-1] - traj.u_com[0]) / span)
