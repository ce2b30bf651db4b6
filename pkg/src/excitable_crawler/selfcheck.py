"""Built-in oracle suite run by ``excitable-crawler selfcheck``.

Each check is cheap (well under a second once the integrator is compiled)
and compares the package against an independent statement of the same
fact: a symmetry, a change of coordinates, a closed form or an exact
solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import slow_manifold_roots, switching_points
from .integrate import IntegratorConfig, harmonic_kernel, integrate
from .model import (
    REFERENCE_GROUPS,
    apply_phi,
    comstrain_to_two_mass,
    rhs_dimensional_comstrain,
    rhs_dimensional_two_mass,
    rhs_dimensionless,
    rhs_fast,
    rhs_slow,
    two_mass_to_comstrain,
)
from .scales import (
    characteristic_scales,
    dimensional_from_groups,
    groups_from_dimensional,
    nondimensionalize_state,
    redimensionalize_state,
)

# anchors giving t* = 0.1 s and V* = 0.1 V
ANCHORS = dict(m=0.005, l0=0.1, c=1e-6, k=0.25, alpha=10.0)
N_RANDOM = 1000


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def random_states(n: int = N_RANDOM, seed: int = 0) -> np.ndarray:
    """``(4, n)`` dimensionless states spanning both voltage branches."""
    rng = np.random.default_rng(seed)
    lo = np.array([-2.5, -0.5, -1.0, -2.0])
    hi = -lo
    return (lo[:, None] + (hi - lo)[:, None] * rng.random((4, n)))


def max_relative_error(a, b) -> float:
    """Worst per-state ``||a - b||_inf / ||b||_inf`` over a batch (axis 0 = components)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = np.maximum(np.abs(b).max(axis=0), np.finfo(float).tiny)
    return float((np.abs(a - b).max(axis=0) / scale).max())


def check_switching_arithmetic() -> CheckResult:
    sp = switching_points(REFERENCE_GROUPS)
    # exact values for pi_l/pi_c = 2 and pi_l/pi_s = 1
    ref = (math.sqrt(2.0 / 3.0), 2.0 * math.sqrt(2.0 / 3.0), 2.0 * math.sqrt(2.0) / (3.0 * math.sqrt(3.0)))
    err = max(abs(a - b) for a, b in zip((sp.V_minus, sp.V_plus, sp.s_switch), ref))
    scaled = switching_points(REFERENCE_GROUPS.replace(
        pi_c=REFERENCE_GROUPS.pi_c_eps, pi_l=REFERENCE_GROUPS.pi_l_eps, pi_s=REFERENCE_GROUPS.pi_s_eps
    ))
    ok = err < 1e-12 and abs(sp.V_minus - 0.816497) < 1e-6 and scaled == sp
    return CheckResult(
        "switching-arithmetic", ok, f"V_minus={sp.V_minus:.7f} V_plus={sp.V_plus:.7f} s_switch={sp.s_switch:.7f}"
    )


def check_equivariance() -> CheckResult:
    x = random_states()
    lhs = rhs_dimensionless(apply_phi(x), REFERENCE_GROUPS)
    rhs = apply_phi(rhs_dimensionless(x, REFERENCE_GROUPS))
    err = max_relative_error(lhs, rhs)
    return CheckResult("phi-equivariance", err <= 1e-12, f"max rel err {err:.2e} on {x.shape[1]} states")


def check_coordinates() -> CheckResult:
    p = dimensional_from_groups(REFERENCE_GROUPS, **ANCHORS)
    sc = characteristic_scales(p)
    x = random_states(seed=1)
    u_com = np.random.default_rng(2).uniform(-1.0, 1.0, x.shape[1])
    cs = np.array([redimensionalize_state(col, sc, u) for col, u in zip(x.T, u_com)]).T
    tm = comstrain_to_two_mass(cs)
    # the map is linear, so it carries derivatives the same way as states
    via_two_mass = two_mass_to_comstrain(rhs_dimensional_two_mass(tm, p))
    direct = rhs_dimensional_comstrain(cs, p)
    err = max_relative_error(via_two_mass, direct)
    return CheckResult("two-mass-vs-com-strain", err <= 1e-12, f"max rel err {err:.2e}")


def check_round_trips() -> CheckResult:
    p = dimensional_from_groups(REFERENCE_GROUPS, **ANCHORS)
    g = groups_from_dimensional(p, epsilon=REFERENCE_GROUPS.epsilon)
    a, b = np.array(g.as_array()), np.array(REFERENCE_GROUPS.as_array())
    err_g = float(np.max(np.abs(a - b) / np.abs(b).clip(min=1e-300)))
    sc = characteristic_scales(p)
    x = random_states(n=50, seed=3)
    err_x = 0.0
    for col in x.T:
        back, u = nondimensionalize_state(redimensionalize_state(col, sc, 0.25), sc)
        err_x = max(err_x, float(np.max(np.abs(np.array(back) - col))), abs(u - 0.25))
    ok = err_g < 1e-12 and err_x < 1e-12
    return CheckResult("scaling-round-trips", ok, f"groups rel err {err_g:.2e}, state err {err_x:.2e}")


def check_time_scale_forms() -> CheckResult:
    x = random_states(seed=4)
    full = rhs_dimensionless(x, REFERENCE_GROUPS)
    err_slow = max_relative_error(rhs_slow(x, REFERENCE_GROUPS), full)
    err_fast = max_relative_error(rhs_fast(x, REFERENCE_GROUPS) / REFERENCE_GROUPS.epsilon, full)
    ok = max(err_slow, err_fast) <= 1e-12
    return CheckResult("slow-fast-forms", ok, f"slow {err_slow:.2e}, fast {err_fast:.2e}")


def check_manifold_roots() -> CheckResult:
    g = REFERENCE_GROUPS
    s_sw = switching_points(g).s_switch
    worst = 0.0
    counts_ok = True
    for s in np.linspace(-2.0 * s_sw, 2.0 * s_sw, 201):
        roots = slow_manifold_roots(float(s), g)
        for r in roots:
            worst = max(worst, abs(-g.pi_c * r.V**3 + g.pi_l * r.V - g.pi_s * s))
        expect = 3 if abs(s) < s_sw - 1e-8 else 1 if abs(s) > s_sw + 1e-8 else None
        if expect is not None and len(roots) != expect:
            counts_ok = False
    ok = bool(counts_ok and worst < 1e-10 * g.pi_l)
    return CheckResult("slow-manifold-roots", ok, f"max residual {worst:.2e}, counts {'ok' if counts_ok else 'wrong'}")


def check_harmonic() -> CheckResult:
    y0 = np.array([0.0, 0.0, 1.0, 0.0])
    traj, _ = integrate(harmonic_kernel, y0, 0.0, 2.0 * math.pi, IntegratorConfig(), events=None, com_index=None)
    err = float(np.max(np.abs(traj.states[-1] - y0)))
    return CheckResult("harmonic-oscillator", err < 1e-6, f"return error {err:.2e} after one period")


CHECKS = (
    check_switching_arithmetic,
    check_equivariance,
    check_coordinates,
    check_round_trips,
    check_time_scale_forms,
    check_manifold_roots,
    check_harmonic,
)


def run_selfcheck() -> list[CheckResult]:
    results = []
    for check in CHECKS:
        try:
            results.append(check())
        except Exception as exc:  # a crashing check is a failing check
            results.append(CheckResult(check.__name__.removeprefix("check_"), False, f"raised {exc!r}"))
    return results
