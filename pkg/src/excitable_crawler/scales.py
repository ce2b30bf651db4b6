"""Characteristic scales and the dimensional <-> dimensionless maps.

Mechanical scales are fixed by the body: ``l* = l0``, ``m* = 2m`` and
``t* = sqrt(m / 2k)``. The voltage scale is ``V* = kappa sqrt(c / (t* alpha))``
with ``kappa = 100`` by default, which pins ``pi_c = kappa**2`` for every
parameter set.

Eleven dimensional parameters in four base units leave eight groups:
``t*``, ``l*`` and ``V*`` absorb three of the remaining freedoms, and the
cubic coefficient closes the last one through ``pi_c = kappa**2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ComStrainState, DimensionalParams, DimensionlessGroups, ParameterError, State

DEFAULT_KAPPA = 100.0
DEFAULT_EPSILON = 1e-4


@dataclass(frozen=True)
class CharacteristicScales:
    l_star: float
    m_star: float
    t_star: float
    V_star: float
    kappa: float = DEFAULT_KAPPA

    @property
    def v_star(self) -> float:
        """Velocity scale ``l* / t*``."""
        return self.l_star / self.t_star


@dataclass(frozen=True)
class ScaledGroups:
    pi_c_eps: float
    pi_l_eps: float
    pi_s_eps: float


def characteristic_scales(p: DimensionalParams, kappa: float = DEFAULT_KAPPA) -> CharacteristicScales:
    if not math.isfinite(kappa) or kappa <= 0:
        raise ParameterError(f"kappa must be > 0, got {kappa!r}")
    t_star = math.sqrt(p.m / (2.0 * p.k))
    V_star = kappa * math.sqrt(p.c / (t_star * p.alpha))
    return CharacteristicScales(l_star=p.l0, m_star=2.0 * p.m, t_star=t_star, V_star=V_star, kappa=kappa)


def groups_from_dimensional(
    p: DimensionalParams, kappa: float = DEFAULT_KAPPA, epsilon: float = DEFAULT_EPSILON
) -> DimensionlessGroups:
    sc = characteristic_scales(p, kappa)
    l, t, Vs = sc.l_star, sc.t_star, sc.V_star
    return DimensionlessGroups(
        zeta=p.b / math.sqrt(2.0 * p.m * p.k),
        pi_f=p.f_max / (2.0 * p.k * l),
        pi_v=0.5 * p.k_v * Vs / (p.k * l),
        pi_eps=l / (t * p.eps_f),
        n_f=p.n_f,
        pi_c=p.alpha * Vs**2 * t / p.c,
        pi_l=p.beta * t / p.c,
        pi_s=p.gamma * l * t / (p.c * Vs),
        epsilon=epsilon,
    )


def dimensional_from_groups(
    g: DimensionlessGroups,
    *,
    m: float,
    l0: float,
    c: float,
    k: float,
    alpha: float,
    kappa: float = DEFAULT_KAPPA,
    rtol: float = 1e-9,
) -> DimensionalParams:
    """Invert the group definitions given five anchor parameters.

    ``pi_c`` carries no information once ``V*`` is fixed by ``kappa``; it
    must equal ``kappa**2`` (to ``rtol``) or the groups are unreachable.
    """
    for name, value in (("m", m), ("l0", l0), ("c", c), ("k", k), ("alpha", alpha)):
        if not math.isfinite(value) or value <= 0:
            raise ParameterError(f"anchor {name} must be > 0, got {value!r}")
    if not math.isclose(g.pi_c, kappa**2, rel_tol=rtol):
        raise ParameterError(
            f"pi_c = {g.pi_c!r} is unreachable: the V* convention forces pi_c = kappa**2 = {kappa**2!r}"
        )
    t_star = math.sqrt(m / (2.0 * k))
    V_star = kappa * math.sqrt(c / (t_star * alpha))
    return DimensionalParams(
        m=m,
        l0=l0,
        k=k,
        b=g.zeta * math.sqrt(2.0 * m * k),
        f_max=g.pi_f * 2.0 * k * l0,
        k_v=2.0 * g.pi_v * k * l0 / V_star,
        c=c,
        alpha=alpha,
        beta=g.pi_l * c / t_star,
        gamma=g.pi_s * c * V_star / (l0 * t_star),
        eps_f=l0 / (t_star * g.pi_eps),
        n_f=g.n_f,
    )


def split_timescales(g: DimensionlessGroups) -> ScaledGroups:
    """The order-one electrical groups ``eps * pi_i`` for ``i`` in c, l, s."""
    return ScaledGroups(g.pi_c_eps, g.pi_l_eps, g.pi_s_eps)


# State maps. Velocities scale by t*/l*; the dimensionless state has no
# absolute displacement, so u_com travels alongside as its own column.

def nondimensionalize_state(x, sc: CharacteristicScales) -> tuple[State, float]:
    """Map a :class:`ComStrainState` to ``(State, u_com / l*)``."""
    V, u_com, du_com, s, ds = np.asarray(x, dtype=float)
    vel = sc.t_star / sc.l_star
    state = State(V / sc.V_star, du_com * vel, s / sc.l_star, ds * vel)
    return state, u_com / sc.l_star


def redimensionalize_state(x, sc: CharacteristicScales, u_com: float = 0.0) -> ComStrainState:
    V, v_com, s, v_s = np.asarray(x, dtype=float)
    vel = sc.l_star / sc.t_star
    return ComStrainState(V * sc.V_star, u_com * sc.l_star, v_com * vel, s * sc.l_star, v_s * vel)


def nondimensionalize_trajectory(times, states, sc: CharacteristicScales):
    """Rescale a dimensional com/strain time series, shape ``(N, 5)``.

    Returns dimensionless times, ``(N, 4)`` states and ``u_com``.
    """
    states = np.asarray(states, dtype=float)
    vel = sc.t_star / sc.l_star
    out = np.column_stack(
        [states[:, 0] / sc.V_star, states[:, 2] * vel, states[:, 3] / sc.l_star, states[:, 4] * vel]
    )
    return np.asarray(times, dtype=float) / sc.t_star, out, states[:, 1] / sc.l_star
