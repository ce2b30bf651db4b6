"""Adaptive Dormand-Prince 5(4) integration with dense output and events.

The stepper core is one Python function. It is compiled with numba when the
right-hand side and the event function are numba dispatchers, and executed
as plain Python otherwise, so both paths share every line of the algorithm.

Right-hand sides have the signature ``rhs(t, y, p) -> dy`` where ``p`` is a
float parameter vector. With ``com_index`` set, an extra component
``u_com' = y[com_index]`` is appended to the integrated vector so the
center-of-mass displacement carries the same local error control as the
state.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numba
import numpy as np
from numba import types
from numba.core.dispatcher import Dispatcher
from numba.extending import overload, register_jitable

from .model import (
    REFERENCE_INITIAL_STATE,
    DimensionlessGroups,
    State,
    closed_loop_into,
    closed_loop_kernel,
    comstrain_into,
    comstrain_kernel,
)

logger = logging.getLogger(__name__)

__all__ = [
    "IntegratorConfig",
    "Trajectory",
    "Event",
    "EventFunction",
    "EventSet",
    "IntegrationError",
    "StepUnderflowError",
    "MaxStepsError",
    "NonFiniteError",
    "integrate",
    "dense_eval",
    "simulate",
    "CLOSED_LOOP_EVENTS",
    "COMSTRAIN_EVENTS",
    "harmonic_kernel",
]


class IntegrationError(RuntimeError):
    """Numerical failure inside the stepper."""

    def __init__(self, message, t=None, h=None, n_steps=None):
        super().__init__(message)
        self.t = t
        self.h = h
        self.n_steps = n_steps


class StepUnderflowError(IntegrationError):
    """Step size fell below ``h_min``; the problem is too stiff for the explicit pair."""


class MaxStepsError(IntegrationError):
    pass


class NonFiniteError(IntegrationError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    h_init: float | None = None
    h_min: float = 1e-14
    h_max: float = 0.5
    max_steps: int = 50_000_000
    record_stride: int = 1

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not (0 < self.h_min <= self.h_max):
            raise ValueError("need 0 < h_min <= h_max")
        if self.h_init is not None and not (self.h_min <= self.h_init <= self.h_max):
            raise ValueError("need h_min <= h_init <= h_max")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")

    def with_tolerance_scale(self, factor: float) -> "IntegratorConfig":
        from dataclasses import replace

        return replace(self, rel_tol=self.rel_tol * factor, abs_tol=self.abs_tol * factor)


@dataclass(frozen=True)
class Event:
    time: float
    state: np.ndarray
    kind: str
    residual: float
    u_com: float = float("nan")


@dataclass(frozen=True)
class EventFunction:
    """A scalar event ``fn(t, y) -> float``; crossings of zero are reported.

    ``direction`` is +1 for increasing crossings, -1 for decreasing, 0 for both.
    """

    fn: Callable
    kind: str = "user-defined"
    direction: int = 0


@dataclass(frozen=True)
class EventSet:
    """Several events evaluated by one vector function ``fn(t, y) -> array``."""

    fn: Callable
    kinds: tuple
    directions: tuple

    def __len__(self):
        return len(self.kinds)


@dataclass
class Trajectory:
    """Recorded solution.

    ``derivatives`` holds the right-hand side at each recorded sample, which
    makes :meth:`dense_eval` a cubic Hermite interpolant that reproduces the
    knots exactly.
    """

    times: np.ndarray
    states: np.ndarray
    derivatives: np.ndarray
    u_com: np.ndarray | None
    n_steps: int
    n_rejected: int
    h_accepted_min: float
    events: list = field(default_factory=list)
    com_index: int | None = 1

    def __len__(self):
        return len(self.times)

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    def state_at(self, i: int) -> State:
        return State(*self.states[i])

    def dense_eval(self, t):
        return dense_eval(self, t)

    def events_of(self, kind: str) -> list:
        return [ev for ev in self.events if ev.kind == kind]

    def step_sizes(self) -> np.ndarray:
        return np.diff(self.times)


@numba.njit(cache=True, nogil=True)
def harmonic_into(t, y, p, out):
    out[0] = 0.0
    out[1] = 0.0
    out[2] = y[3]
    out[3] = -y[2]


@numba.njit(cache=True, nogil=True)
def harmonic_kernel(t, y, p):
    """Test problem on a 4-state layout: ``s' = v_s``, ``v_s' = -s``."""
    out = np.empty(4)
    harmonic_into(t, y, p, out)
    return out


@numba.njit(cache=True, nogil=True)
def _no_events(t, y):
    return np.zeros(0)


@numba.njit(cache=True, nogil=True)
def _closed_loop_event_values(t, y):
    out = np.empty(3)
    out[0] = y[0]
    out[1] = y[0]
    out[2] = y[2]
    return out


@numba.njit(cache=True, nogil=True)
def _comstrain_event_values(t, y):
    out = np.empty(3)
    out[0] = y[0]
    out[1] = y[0]
    out[2] = y[3]
    return out


# Built-in right-hand sides and event sets are addressed by integer id so
# the compiled stepper never receives a function object and can be cached
# on disk. Arbitrary callables are still accepted (see call_rhs).
RHS_CLOSED_LOOP, RHS_COMSTRAIN, RHS_HARMONIC = 0, 1, 2
EVENTS_NONE, EVENTS_CLOSED_LOOP, EVENTS_COMSTRAIN = 0, 1, 2
_BUILTIN_RHS = (closed_loop_kernel, comstrain_kernel, harmonic_kernel)
_BUILTIN_EVENTS = (_no_events, _closed_loop_event_values, _comstrain_event_values)
_BUILTIN_INTO = (closed_loop_into, comstrain_into, harmonic_into)
_BUILTIN_RHS_IDS = {fn: i for i, fn in enumerate(_BUILTIN_RHS)}


def _eval(rhs, t, z, p, n, com_index, out):
    """Write ``rhs`` at ``z`` into ``out``, plus ``u_com'`` when tracked."""
    if isinstance(rhs, int):
        _BUILTIN_INTO[rhs].py_func(t, z, p, out)
    else:
        dy = rhs(t, z[:n], p)
        for i in range(n):
            out[i] = dy[i]
    if com_index >= 0:
        out[n] = z[com_index]


def call_events(evfun, t, y):
    if isinstance(evfun, int):
        return _BUILTIN_EVENTS[evfun].py_func(t, y)
    return np.asarray(evfun(t, y), dtype=float)


@overload(_eval, jit_options={"cache": True, "nogil": True})
def _eval_ol(rhs, t, z, p, n, com_index, out):
    if isinstance(rhs, types.Integer):

        def impl(rhs, t, z, p, n, com_index, out):
            if rhs == RHS_CLOSED_LOOP:
                closed_loop_into(t, z, p, out)
            elif rhs == RHS_COMSTRAIN:
                comstrain_into(t, z, p, out)
            else:
                harmonic_into(t, z, p, out)
            if com_index >= 0:
                out[n] = z[com_index]

        return impl

    def impl(rhs, t, z, p, n, com_index, out):
        dy = rhs(t, z[:n], p)
        for i in range(n):
            out[i] = dy[i]
        if com_index >= 0:
            out[n] = z[com_index]

    return impl


@overload(call_events, jit_options={"cache": True, "nogil": True})
def _call_events_ol(evfun, t, y):
    if isinstance(evfun, types.Integer):

        def impl(evfun, t, y):
            if evfun == EVENTS_CLOSED_LOOP:
                return _closed_loop_event_values(t, y)
            if evfun == EVENTS_COMSTRAIN:
                return _comstrain_event_values(t, y)
            return _no_events(t, y)

        return impl

    def impl(evfun, t, y):
        return evfun(t, y)

    return impl


# Dormand-Prince 5(4) tableau and Hairer's 4th-order continuous extension.
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_A71, _A73, _A74, _A75, _A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40
_D1 = -12715105075 / 11282082432
_D3 = 87487479700 / 32700410799
_D4 = -10690763975 / 1880347072
_D5 = 701980252875 / 199316789632
_D6 = -1453857185 / 822651844
_D7 = 69997945 / 29380423

_SAFE = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 10.0
_BETA = 0.04
_EXPO = 0.2 - 0.75 * _BETA

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_MAX_STEPS = 2
STATUS_NONFINITE = 3


@register_jitable(cache=True)
def _combo(z, h, a1, k1, a2, k2, a3, k3, a4, k4, a5, k5, out):
    for i in range(z.shape[0]):
        out[i] = z[i] + h * (a1 * k1[i] + a2 * k2[i] + a3 * k3[i] + a4 * k4[i] + a5 * k5[i])


@register_jitable(cache=True)
def _all_finite(a):
    for i in range(a.shape[0]):
        if not np.isfinite(a[i]):
            return False
    return True


@register_jitable(cache=True)
def _dense(r1, r2, r3, r4, r5, theta):
    th1 = 1.0 - theta
    return r1 + theta * (r2 + th1 * (r3 + theta * (r4 + th1 * r5)))


@register_jitable(cache=True)
def _crossed(ga, gb, direction):
    if direction > 0:
        return ga < 0.0 and gb >= 0.0
    if direction < 0:
        return ga > 0.0 and gb <= 0.0
    return (ga < 0.0 and gb >= 0.0) or (ga > 0.0 and gb <= 0.0)


@register_jitable(cache=True)
def _localize(evfun, j, ta, ga, tb, gb, t_old, h, r1, r2, r3, r4, r5, tol):
    """Illinois regula falsi with forced bisection, on the dense interpolant."""
    best_t, best_g = tb, gb
    if abs(ga) < abs(gb):
        best_t, best_g = ta, ga
    side = 0
    for it in range(200):
        if abs(best_g) <= tol or tb - ta <= 4.0 * 2.220446049250313e-16 * max(abs(ta), abs(tb), 1.0):
            break
        if it % 4 == 3:
            tm = 0.5 * (ta + tb)
        else:
            tm = tb - gb * (tb - ta) / (gb - ga)
            if not (ta < tm < tb):
                tm = 0.5 * (ta + tb)
        zm = _dense(r1, r2, r3, r4, r5, (tm - t_old) / h)
        gm = call_events(evfun, tm, zm)[j]
        if abs(gm) < abs(best_g):
            best_t, best_g = tm, gm
        if (gm < 0.0) == (ga < 0.0) and gm != 0.0:
            ta, ga = tm, gm
            if side == -1:
                gb = 0.5 * gb
            side = -1
        else:
            tb, gb = tm, gm
            if side == 1:
                ga = 0.5 * ga
            side = 1
        if gm == 0.0:
            best_t, best_g = tm, gm
            break
    return best_t, best_g


def _core(rhs, evfun, y0, t0, t1, p, rtol, atol, h_init, h_min, h_max, max_steps, stride, com_index, ev_dirs, ev_tol):
    n = y0.shape[0]
    nz = n + 1 if com_index >= 0 else n
    z = np.zeros(nz)
    for i in range(n):
        z[i] = y0[i]

    cap = 1024
    ts = np.empty(cap)
    zs = np.empty((cap, nz))
    dzs = np.empty((cap, nz))
    n_rec = 0

    ne = ev_dirs.shape[0]
    ev_cap = 64
    ev_t = np.empty(ev_cap)
    ev_z = np.empty((ev_cap, nz))
    ev_j = np.empty(ev_cap, dtype=np.int64)
    ev_r = np.empty(ev_cap)
    n_ev = 0

    t = t0
    k1 = np.empty(nz)
    k2 = np.empty(nz)
    k3 = np.empty(nz)
    k4 = np.empty(nz)
    k5 = np.empty(nz)
    k6 = np.empty(nz)
    k7 = np.empty(nz)
    zt = np.empty(nz)
    z_new = np.empty(nz)
    _eval(rhs, t, z, p, n, com_index, k1)
    if not _all_finite(k1):
        return (STATUS_NONFINITE, t, 0.0, 0, 0, 0.0, ts[:0], zs[:0], dzs[:0], ev_t[:0], ev_z[:0], ev_j[:0], ev_r[:0])

    ts[0] = t
    zs[0, :] = z
    dzs[0, :] = k1
    n_rec = 1

    g_old = call_events(evfun, t, z)

    if h_init > 0.0:
        h = h_init
    else:
        sk = atol + rtol * np.abs(z)
        d0 = math.sqrt(np.mean((z / sk) ** 2))
        d1 = math.sqrt(np.mean((k1 / sk) ** 2))
        if d0 < 1e-5 or d1 < 1e-5:
            h = 1e-6
        else:
            h = 0.01 * d0 / d1
        h = min(max(h, h_min), h_max)
    h = min(h, t1 - t0)

    fac_old = 1e-4
    n_acc = 0
    n_rej = 0
    last_rejected = False
    h_acc_min = np.inf
    status = STATUS_OK
    since_rec = 0

    while t < t1:
        if n_acc + n_rej >= max_steps:
            status = STATUS_MAX_STEPS
            break
        last = False
        if t + 1.01 * h >= t1:
            h = t1 - t
            last = True

        _combo(z, h, _A21, k1, 0.0, k1, 0.0, k1, 0.0, k1, 0.0, k1, zt)
        _eval(rhs, t + _C2 * h, zt, p, n, com_index, k2)
        _combo(z, h, _A31, k1, _A32, k2, 0.0, k1, 0.0, k1, 0.0, k1, zt)
        _eval(rhs, t + _C3 * h, zt, p, n, com_index, k3)
        _combo(z, h, _A41, k1, _A42, k2, _A43, k3, 0.0, k1, 0.0, k1, zt)
        _eval(rhs, t + _C4 * h, zt, p, n, com_index, k4)
        _combo(z, h, _A51, k1, _A52, k2, _A53, k3, _A54, k4, 0.0, k1, zt)
        _eval(rhs, t + _C5 * h, zt, p, n, com_index, k5)
        _combo(z, h, _A61, k1, _A62, k2, _A63, k3, _A64, k4, _A65, k5, zt)
        _eval(rhs, t + h, zt, p, n, com_index, k6)
        _combo(z, h, _A71, k1, _A73, k3, _A74, k4, _A75, k5, _A76, k6, z_new)
        _eval(rhs, t + h, z_new, p, n, com_index, k7)

        if not (_all_finite(z_new) and _all_finite(k7)):
            err = np.inf
        else:
            acc = 0.0
            for i in range(nz):
                ei = h * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i] + _E6 * k6[i] + _E7 * k7[i])
                sk = atol + rtol * max(abs(z[i]), abs(z_new[i]))
                acc += (ei / sk) ** 2
            err = math.sqrt(acc / nz)

        if err <= 1.0:
            fac11 = err**_EXPO if err > 0.0 else 0.0
            fac = fac11 / fac_old**_BETA
            fac = max(1.0 / _FAC_MAX, min(1.0 / _FAC_MIN, fac / _SAFE))
            h_new = h / fac
            fac_old = max(err, 1e-4)

            t_old = t
            t_new = t1 if last else t + h

            if ne > 0:
                g_new = call_events(evfun, t_new, z_new)
                found = False
                for j in range(ne):
                    if _crossed(g_old[j], g_new[j], ev_dirs[j]):
                        found = True
                if found:
                    r1 = z.copy()
                    r2 = z_new - z
                    r3 = h * k1 - r2
                    r4 = r2 - h * k7 - r3
                    r5 = h * (_D1 * k1 + _D3 * k3 + _D4 * k4 + _D5 * k5 + _D6 * k6 + _D7 * k7)
                    for j in range(ne):
                        if _crossed(g_old[j], g_new[j], ev_dirs[j]):
                            te, ge = _localize(
                                evfun, j, t_old, g_old[j], t_new, g_new[j], t_old, h, r1, r2, r3, r4, r5, ev_tol
                            )
                            if n_ev == ev_cap:
                                ev_cap *= 2
                                ev_t2 = np.empty(ev_cap)
                                ev_z2 = np.empty((ev_cap, nz))
                                ev_j2 = np.empty(ev_cap, dtype=np.int64)
                                ev_r2 = np.empty(ev_cap)
                                ev_t2[:n_ev] = ev_t[:n_ev]
                                ev_z2[:n_ev] = ev_z[:n_ev]
                                ev_j2[:n_ev] = ev_j[:n_ev]
                                ev_r2[:n_ev] = ev_r[:n_ev]
                                ev_t, ev_z, ev_j, ev_r = ev_t2, ev_z2, ev_j2, ev_r2
                            ev_t[n_ev] = te
                            ev_z[n_ev] = _dense(r1, r2, r3, r4, r5, (te - t_old) / h)
                            ev_j[n_ev] = j
                            ev_r[n_ev] = abs(ge)
                            n_ev += 1
                g_old = g_new

            if h < h_acc_min and not last:
                h_acc_min = h
            t = t_new
            z, z_new = z_new, z
            k1, k7 = k7, k1
            n_acc += 1
            since_rec += 1

            if since_rec >= stride or t >= t1:
                since_rec = 0
                if n_rec == cap:
                    cap *= 2
                    ts2 = np.empty(cap)
                    zs2 = np.empty((cap, nz))
                    dzs2 = np.empty((cap, nz))
                    ts2[:n_rec] = ts[:n_rec]
                    zs2[:n_rec] = zs[:n_rec]
                    dzs2[:n_rec] = dzs[:n_rec]
                    ts, zs, dzs = ts2, zs2, dzs2
                ts[n_rec] = t
                zs[n_rec, :] = z
                dzs[n_rec, :] = k1
                n_rec += 1

            if last_rejected:
                h_new = min(h_new, h)
            last_rejected = False
            h = min(h_new, h_max)
        else:
            n_rej += 1
            last_rejected = True
            if math.isfinite(err):
                fac11 = err**_EXPO
                h = h / min(1.0 / _FAC_MIN, fac11 / _SAFE)
            else:
                h = 0.1 * h
            if h < h_min:
                # shrinking only to dodge NaN/inf is a non-finite failure, not stiffness
                status = STATUS_UNDERFLOW if math.isfinite(err) else STATUS_NONFINITE
                break

    return (
        status,
        t,
        h,
        n_acc,
        n_rej,
        h_acc_min,
        ts[:n_rec],
        zs[:n_rec],
        dzs[:n_rec],
        ev_t[:n_ev],
        ev_z[:n_ev],
        ev_j[:n_ev],
        ev_r[:n_ev],
    )


_core_jit = numba.njit(cache=True, nogil=True)(_core)


CLOSED_LOOP_EVENTS = EventSet(
    fn=EVENTS_CLOSED_LOOP,
    kinds=("switching-up", "switching-down", "poincare-crossing"),
    directions=(1, -1, 1),
)
COMSTRAIN_EVENTS = EventSet(
    fn=EVENTS_COMSTRAIN,
    kinds=("switching-up", "switching-down", "poincare-crossing"),
    directions=(1, -1, 1),
)


def _is_jitted(fn) -> bool:
    return isinstance(fn, Dispatcher)


def _compilable(fn) -> bool:
    return isinstance(fn, int) or _is_jitted(fn)


_combined_cache: dict = {}


def _combine_events(events: Sequence[EventFunction]) -> EventSet:
    fns = tuple(ev.fn for ev in events)
    kinds = tuple(ev.kind for ev in events)
    dirs = tuple(int(np.sign(ev.direction)) for ev in events)
    if all(_is_jitted(fn) for fn in fns):
        key = fns
        if key not in _combined_cache:
            # numba cannot iterate over a heterogeneous tuple of dispatchers,
            # so the combined function is generated with each one as a global
            names = {f"_ev{i}": fn for i, fn in enumerate(fns)}
            body = "".join(f"    out[{i}] = _ev{i}(t, y)\n" for i in range(len(fns)))
            src = f"def combined(t, y):\n    out = np.empty({len(fns)})\n{body}    return out\n"
            scope = {"np": np, **names}
            exec(src, scope)
            _combined_cache[key] = numba.njit(nogil=True)(scope["combined"])
        return EventSet(_combined_cache[key], kinds, dirs)

    def combined(t, y):
        return np.array([float(fn(t, y)) for fn in fns])

    return EventSet(combined, kinds, dirs)


def integrate(
    rhs: Callable,
    x0,
    t0: float,
    t1: float,
    cfg: IntegratorConfig | None = None,
    events: EventSet | Sequence[EventFunction] | None = None,
    params=None,
    com_index: int | None = 1,
    event_tol: float = 1e-12,
) -> tuple[Trajectory, list[Event]]:
    """Integrate ``y' = rhs(t, y, params)`` from ``t0`` to ``t1``.

    Parameters
    ----------
    rhs : callable
        ``rhs(t, y, p)`` returning the derivative as an array. A numba
        dispatcher (together with jitted events) selects the compiled path.
    x0 : array_like
        Initial state.
    cfg : IntegratorConfig, optional
    events : EventSet or sequence of EventFunction, optional
        Event functions receive the full integrated vector, including the
        appended ``u_com`` when ``com_index`` is set.
    params : array_like, optional
        Parameter vector forwarded to ``rhs``.
    com_index : int or None
        Index of the velocity integrated into ``u_com``; ``None`` disables it.
    event_tol : float
        Target ``|g|`` at a localized event.

    Returns
    -------
    trajectory, events
    """
    cfg = cfg or IntegratorConfig()
    if not (t1 > t0):
        raise ValueError(f"need t1 > t0, got t0={t0!r}, t1={t1!r}")
    y0 = np.array(x0, dtype=float)
    if y0.ndim != 1 or not np.all(np.isfinite(y0)):
        raise ValueError("x0 must be a finite 1-D state")
    p = np.zeros(0) if params is None else np.ascontiguousarray(params, dtype=float)
    n = y0.shape[0]
    ci = -1 if com_index is None else int(com_index)
    if ci >= n:
        raise ValueError("com_index out of range")

    rhs = _BUILTIN_RHS_IDS.get(rhs, rhs)
    if events is None:
        evset = EventSet(EVENTS_NONE, (), ())
    elif isinstance(events, EventSet):
        evset = events
    else:
        evset = _combine_events(list(events))
    dirs = np.array(evset.directions, dtype=np.int64)

    args = (
        rhs,
        evset.fn,
        y0,
        float(t0),
        float(t1),
        p,
        float(cfg.rel_tol),
        float(cfg.abs_tol),
        float(cfg.h_init) if cfg.h_init is not None else -1.0,
        float(cfg.h_min),
        float(cfg.h_max),
        int(cfg.max_steps),
        int(cfg.record_stride),
        ci,
        dirs,
        float(event_tol),
    )
    if _compilable(rhs) and _compilable(evset.fn):
        out = _core_jit(*args)
    else:
        # overflow is caught and reported as NonFiniteError below
        with np.errstate(over="ignore", invalid="ignore"):
            out = _core(*args)
    status, t_end, h_end, n_acc, n_rej, h_acc_min, ts, zs, dzs, ev_t, ev_z, ev_j, ev_r = out

    if status == STATUS_UNDERFLOW:
        raise StepUnderflowError(
            f"step size {h_end:.3e} fell below h_min={cfg.h_min:.3e} at t={t_end:.12g} "
            f"after {n_acc} accepted / {n_rej} rejected steps; the problem is too stiff "
            "for the explicit pair at these settings",
            t=t_end,
            h=h_end,
            n_steps=n_acc,
        )
    if status == STATUS_MAX_STEPS:
        raise MaxStepsError(f"max_steps={cfg.max_steps} exceeded at t={t_end:.12g}", t=t_end, n_steps=n_acc)
    if status == STATUS_NONFINITE:
        raise NonFiniteError(f"right-hand side is not finite at t={t_end:.12g}", t=t_end)

    order = np.argsort(ev_t, kind="stable")
    ev_list = [
        Event(
            time=float(ev_t[i]),
            state=ev_z[i, :n].copy(),
            kind=evset.kinds[ev_j[i]],
            residual=float(ev_r[i]),
            u_com=float(ev_z[i, n]) if ci >= 0 else float("nan"),
        )
        for i in order
    ]
    traj = Trajectory(
        times=ts,
        states=zs[:, :n],
        derivatives=dzs[:, :n],
        u_com=zs[:, n] if ci >= 0 else None,
        n_steps=int(n_acc),
        n_rejected=int(n_rej),
        h_accepted_min=float(h_acc_min),
        events=ev_list,
        com_index=None if ci < 0 else ci,
    )
    logger.debug("integrated to t=%g in %d steps (%d rejected), %d events", t_end, n_acc, n_rej, len(ev_list))
    return traj, ev_list


def dense_eval(traj: Trajectory, t):
    """Cubic Hermite interpolation of the recorded trajectory.

    Returns the interpolated state (and ``u_com`` if tracked) at scalar or
    array ``t``. With ``record_stride=1`` the knots are the accepted steps and
    the interpolant is fourth-order accurate, like the stepper's local error.
    """
    ts = traj.times
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < ts[0]) or np.any(t_arr > ts[-1]):
        raise ValueError(f"t outside recorded span [{ts[0]!r}, {ts[-1]!r}]")
    tt = np.atleast_1d(t_arr)
    i = np.clip(np.searchsorted(ts, tt, side="right") - 1, 0, len(ts) - 2)
    j = i + 1
    ya, yb = traj.states[i], traj.states[j]
    fa, fb = traj.derivatives[i], traj.derivatives[j]
    if traj.u_com is not None:
        c = traj.com_index
        ya = np.column_stack([ya, traj.u_com[i]])
        yb = np.column_stack([yb, traj.u_com[j]])
        fa = np.column_stack([fa, traj.states[i, c]])
        fb = np.column_stack([fb, traj.states[j, c]])
    h = (ts[j] - ts[i])[:, None]
    th = (tt[:, None] - ts[i][:, None]) / h
    h00 = (1 + 2 * th) * (1 - th) ** 2
    h10 = th * (1 - th) ** 2
    h01 = th**2 * (3 - 2 * th)
    h11 = th**2 * (th - 1)
    out = h00 * ya + h10 * h * fa + h01 * yb + h11 * h * fb
    at_a = tt == ts[i]
    at_b = tt == ts[j]
    out[at_a] = ya[at_a]
    out[at_b] = yb[at_b]
    return out[0] if t_arr.ndim == 0 else out


def simulate(
    groups: DimensionlessGroups,
    x0=REFERENCE_INITIAL_STATE,
    t_span: tuple[float, float] = (0.0, 200.0),
    cfg: IntegratorConfig | None = None,
    events: EventSet | Sequence[EventFunction] | None = CLOSED_LOOP_EVENTS,
) -> tuple[Trajectory, list[Event]]:
    """Integrate the dimensionless closed loop with switching and section events.

    Switching events are sign changes of V (the fast jump crosses V = 0);
    the section is ``s = 0`` crossed with ``v_s > 0``.
    """
    return integrate(
        closed_loop_kernel,
        np.asarray(x0, dtype=float),
        t_span[0],
        t_span[1],
        cfg,
        events=events,
        params=groups.as_array(),
        com_index=1,
    )
