"""Closed-loop crawler model: parameter/state types and right-hand sides.

Every right-hand side is a pure function. The arithmetic kernels
(``_dimensionless_terms`` and friends) are written so the same source runs
element-wise on numpy arrays and compiles under numba for the integrator.

Conventions
-----------
Dimensionless state ordering is ``(V, v_com, s, v_s)``. The dimensional
state has two views: two-mass ``(V, u1, u2, du1, du2)`` and
center-of-mass/strain ``(V, u_com, du_com, s, ds)``.

The center-of-mass friction term is the *sum* of the two contact forces,
``m u_com'' = -(f_f(du1) + f_f(du2)) / 2``, which is what adding the two
mass equations gives.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from typing import NamedTuple

import numba
import numpy as np

__all__ = [
    "DimensionalParams",
    "DimensionlessGroups",
    "State",
    "TwoMassState",
    "ComStrainState",
    "REFERENCE_GROUPS",
    "REFERENCE_INITIAL_STATE",
    "sigma_shape",
    "friction_sigma_dimensional",
    "friction_sigma_dimensionless",
    "rhs_dimensionless",
    "rhs_slow",
    "rhs_fast",
    "rhs_dimensional_two_mass",
    "rhs_dimensional_comstrain",
    "apply_phi",
    "two_mass_to_comstrain",
    "comstrain_to_two_mass",
]

GROUP_NAMES = ("zeta", "pi_f", "pi_v", "pi_eps", "n_f", "pi_c", "pi_l", "pi_s")


class ParameterError(ValueError):
    """Raised for a parameter set violating its invariants."""


def _check_positive(obj, names):
    for name in names:
        value = getattr(obj, name)
        if not math.isfinite(value) or value <= 0:
            raise ParameterError(f"{name} must be finite and > 0, got {value!r}")


@dataclass(frozen=True)
class DimensionalParams:
    """Physical parameters of the crawler and its controller, SI units.

    ``i_ext`` is a constant applied current (A); the dimensionless model has
    no group for it, so only the dimensional right-hand sides read it.
    """

    m: float
    l0: float
    k: float
    b: float
    f_max: float
    k_v: float
    c: float
    alpha: float
    beta: float
    gamma: float
    eps_f: float
    n_f: float
    i_ext: float = 0.0

    def __post_init__(self):
        _check_positive(
            self,
            ("m", "l0", "k", "f_max", "k_v", "c", "alpha", "beta", "gamma", "eps_f"),
        )
        # b = 0 is the undamped limit; allowed so that zeta = 0 round-trips
        if not math.isfinite(self.b) or self.b < 0:
            raise ParameterError(f"b must be finite and >= 0, got {self.b!r}")
        if not math.isfinite(self.n_f) or self.n_f < 0:
            raise ParameterError(f"n_f must be finite and >= 0, got {self.n_f!r}")
        if not math.isfinite(self.i_ext):
            raise ParameterError("i_ext must be finite")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DimensionlessGroups:
    """The eight dimensionless groups of the closed loop plus the timescale split.

    ``epsilon`` only enters the slow/fast rewritings; the scaled groups
    ``epsilon * pi_i`` are exposed as properties and never stored.
    """

    zeta: float
    pi_f: float
    pi_v: float
    pi_eps: float
    n_f: float
    pi_c: float
    pi_l: float
    pi_s: float
    epsilon: float = 1e-4

    def __post_init__(self):
        _check_positive(self, ("pi_f", "pi_v", "pi_eps", "pi_c", "pi_l", "pi_s"))
        for name in ("zeta", "n_f"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ParameterError(f"{name} must be finite and >= 0, got {value!r}")
        if not (0.0 < self.epsilon < 1.0):
            raise ParameterError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")

    @property
    def pi_c_eps(self) -> float:
        return self.epsilon * self.pi_c

    @property
    def pi_l_eps(self) -> float:
        return self.epsilon * self.pi_l

    @property
    def pi_s_eps(self) -> float:
        return self.epsilon * self.pi_s

    def as_array(self) -> np.ndarray:
        """Pack the eight groups in the order used by the compiled kernels."""
        return np.array([getattr(self, name) for name in GROUP_NAMES], dtype=float)

    def as_dict(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> "DimensionlessGroups":
        return replace(self, **changes)

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


class State(NamedTuple):
    """Dimensionless closed-loop state."""

    V: float
    v_com: float
    s: float
    v_s: float


class TwoMassState(NamedTuple):
    """Dimensional state, displacement/velocity of each mass."""

    V: float
    u1: float
    u2: float
    du1: float
    du2: float


class ComStrainState(NamedTuple):
    """Dimensional state, center-of-mass and strain coordinates."""

    V: float
    u_com: float
    du_com: float
    s: float
    ds: float


REFERENCE_GROUPS = DimensionlessGroups(
    zeta=4.7,
    pi_f=2.5,
    pi_v=0.5,
    pi_eps=4.7e3,
    n_f=1.5,
    pi_c=1e4,
    pi_l=2e4,
    pi_s=2e4,
)
REFERENCE_INITIAL_STATE = State(V=2.0, v_com=0.0, s=0.0, v_s=0.0)


def sigma_shape(y, n_f):
    """Normalized anisotropic friction profile.

    ``(tanh(y + n_f) - tanh(n_f)) / (1 + tanh(n_f))``; zero at ``y = 0``,
    saturating at -1 for backward slip and at
    ``(1 - tanh n_f) / (1 + tanh n_f)`` for forward slip.
    """
    tn = np.tanh(n_f)
    return (np.tanh(y + n_f) - tn) / (1.0 + tn)


def friction_sigma_dimensional(v, eps_f, n_f):
    """Friction profile at a dimensional contact speed ``v`` (m/s)."""
    return sigma_shape(v / eps_f, n_f)


def friction_sigma_dimensionless(v, pi_eps, n_f):
    """Friction profile at a dimensionless contact speed.

    The slope group multiplies the speed: ``v / eps_f`` with
    ``v = v_dimless * l*/t*`` is ``pi_eps * v_dimless``.
    """
    return sigma_shape(pi_eps * v, n_f)


def _dimensionless_terms(V, v_com, s, v_s, zeta, pi_f, pi_v, pi_eps, n_f, pi_c, pi_l, pi_s):
    tn = np.tanh(n_f)
    back = (np.tanh(pi_eps * (v_com - 0.5 * v_s) + n_f) - tn) / (1.0 + tn)
    front = (np.tanh(pi_eps * (v_com + 0.5 * v_s) + n_f) - tn) / (1.0 + tn)
    dV = -pi_c * V * V * V + pi_l * V - pi_s * s
    dv_com = -0.5 * pi_f * (back + front)
    ds = v_s
    dv_s = pi_f * (back - front) - s - 2.0 * zeta * v_s + 2.0 * pi_v * V
    return dV, dv_com, ds, dv_s


def _comstrain_terms(V, du_com, s, ds, m, k, b, f_max, k_v, c, alpha, beta, gamma, eps_f, n_f, i_ext):
    tn = np.tanh(n_f)
    f_back = f_max * (np.tanh((du_com - 0.5 * ds) / eps_f + n_f) - tn) / (1.0 + tn)
    f_front = f_max * (np.tanh((du_com + 0.5 * ds) / eps_f + n_f) - tn) / (1.0 + tn)
    dV = (-alpha * V * V * V + beta * V - gamma * s + i_ext) / c
    dd_com = -0.5 * (f_back + f_front) / m
    dd_s = (f_back - f_front - 2.0 * (k * s + b * ds - k_v * V)) / m
    return dV, dd_com, dd_s


def _two_mass_terms(V, u1, u2, du1, du2, m, k, b, f_max, k_v, c, alpha, beta, gamma, eps_f, n_f, i_ext):
    tn = np.tanh(n_f)
    ff1 = f_max * (np.tanh(du1 / eps_f + n_f) - tn) / (1.0 + tn)
    ff2 = f_max * (np.tanh(du2 / eps_f + n_f) - tn) / (1.0 + tn)
    f = k_v * V
    dV = (-alpha * V * V * V + beta * V - gamma * (u2 - u1) + i_ext) / c
    ddu1 = (k * (u2 - u1) + b * (du2 - du1) - ff1 - f) / m
    ddu2 = (k * (u1 - u2) + b * (du1 - du2) - ff2 + f) / m
    return dV, ddu1, ddu2


def _dimensional_args(p: DimensionalParams):
    return (p.m, p.k, p.b, p.f_max, p.k_v, p.c, p.alpha, p.beta, p.gamma, p.eps_f, p.n_f, p.i_ext)


def _as_columns(x, n):
    arr = np.asarray(x, dtype=float)
    if arr.shape[0] != n:
        raise ValueError(f"expected {n} state components along axis 0, got shape {arr.shape}")
    return arr


def rhs_dimensionless(x, g: DimensionlessGroups) -> np.ndarray:
    """Time derivative of the dimensionless closed loop.

    ``x`` is a :class:`State` or any array whose first axis holds
    ``(V, v_com, s, v_s)``; trailing axes broadcast, so a ``(4, N)`` batch
    of states is evaluated in one call.
    """
    V, v_com, s, v_s = _as_columns(x, 4)
    terms = _dimensionless_terms(
        V, v_com, s, v_s, g.zeta, g.pi_f, g.pi_v, g.pi_eps, g.n_f, g.pi_c, g.pi_l, g.pi_s
    )
    return np.array(np.broadcast_arrays(*terms))


def rhs_slow(x, g: DimensionlessGroups) -> np.ndarray:
    """Slow-time form: ``eps V' = -pi_c^e V^3 + pi_l^e V - pi_s^e s``.

    Identical to :func:`rhs_dimensionless` up to rounding in ``eps * pi / eps``.
    """
    V, v_com, s, v_s = _as_columns(x, 4)
    eps = g.epsilon
    out = rhs_dimensionless(x, g)
    out[0] = (-g.pi_c_eps * V**3 + g.pi_l_eps * V - g.pi_s_eps * s) / eps
    return out


def rhs_fast(x, g: DimensionlessGroups) -> np.ndarray:
    """Fast-time form (time ``T = t / eps``); equals ``eps * rhs_dimensionless``."""
    V, v_com, s, v_s = _as_columns(x, 4)
    out = g.epsilon * rhs_dimensionless(x, g)
    out[0] = -g.pi_c_eps * V**3 + g.pi_l_eps * V - g.pi_s_eps * s
    return out


def rhs_dimensional_two_mass(x, p: DimensionalParams) -> np.ndarray:
    """Derivative of ``(V, u1, u2, du1, du2)`` in seconds."""
    V, u1, u2, du1, du2 = _as_columns(x, 5)
    dV, ddu1, ddu2 = _two_mass_terms(V, u1, u2, du1, du2, *_dimensional_args(p))
    return np.array(np.broadcast_arrays(dV, du1, du2, ddu1, ddu2))


def rhs_dimensional_comstrain(x, p: DimensionalParams) -> np.ndarray:
    """Derivative of ``(V, u_com, du_com, s, ds)`` in seconds."""
    V, u_com, du_com, s, ds = _as_columns(x, 5)
    dV, dd_com, dd_s = _comstrain_terms(V, du_com, s, ds, *_dimensional_args(p))
    return np.array(np.broadcast_arrays(dV, du_com, dd_com, ds, dd_s))


def two_mass_to_comstrain(x) -> np.ndarray:
    V, u1, u2, du1, du2 = _as_columns(x, 5)
    return np.array(np.broadcast_arrays(V, 0.5 * (u1 + u2), 0.5 * (du1 + du2), u2 - u1, du2 - du1))


def comstrain_to_two_mass(x) -> np.ndarray:
    V, u_com, du_com, s, ds = _as_columns(x, 5)
    return np.array(
        np.broadcast_arrays(V, u_com - 0.5 * s, u_com + 0.5 * s, du_com - 0.5 * ds, du_com + 0.5 * ds)
    )


def apply_phi(x):
    """Sign-flip symmetry ``(V, v_com, s, v_s) -> (-V, v_com, -s, -v_s)``.

    Returns a :class:`State` for a single state, an array otherwise. The
    same map acts on derivatives.
    """
    if isinstance(x, State):
        return State(-x.V, x.v_com, -x.s, -x.v_s)
    arr = _as_columns(x, 4)
    return arr * np.array([-1.0, 1.0, -1.0, -1.0]).reshape((4,) + (1,) * (arr.ndim - 1))


def check_strain(x, warn=True) -> bool:
    """Soft plausibility check ``|s| < 1``; warns instead of raising."""
    s = np.asarray(x, dtype=float)[2]
    ok = bool(np.all(np.abs(s) < 1.0))
    if not ok and warn:
        import warnings

        warnings.warn("strain magnitude reached the natural segment length", RuntimeWarning, stacklevel=2)
    return ok


# Compiled kernels used by the integrator. Parameter vectors follow
# GROUP_NAMES and the _dimensional_args ordering respectively.

_terms_dimless_jit = numba.njit(cache=True, inline="always")(_dimensionless_terms)
_terms_comstrain_jit = numba.njit(cache=True, inline="always")(_comstrain_terms)


@numba.njit(cache=True, nogil=True)
def closed_loop_into(t, y, p, out):
    out[0], out[1], out[2], out[3] = _terms_dimless_jit(
        y[0], y[1], y[2], y[3], p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7]
    )


@numba.njit(cache=True, nogil=True)
def closed_loop_kernel(t, y, p):
    out = np.empty(4)
    closed_loop_into(t, y, p, out)
    return out


@numba.njit(cache=True, nogil=True)
def comstrain_into(t, y, p, out):
    dV, dd_com, dd_s = _terms_comstrain_jit(
        y[0], y[2], y[3], y[4], p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8], p[9], p[10], p[11]
    )
    out[0] = dV
    out[1] = y[2]
    out[2] = dd_com
    out[3] = y[4]
    out[4] = dd_s


@numba.njit(cache=True, nogil=True)
def comstrain_kernel(t, y, p):
    out = np.empty(5)
    comstrain_into(t, y, p, out)
    return out


def dimensional_param_vector(p: DimensionalParams) -> np.ndarray:
    return np.array(_dimensional_args(p), dtype=float)
