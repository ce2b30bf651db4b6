import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from excitable_crawler.model import REFERENCE_GROUPS, ComStrainState, DimensionalParams, ParameterError, State
from excitable_crawler.scales import (
    characteristic_scales,
    dimensional_from_groups,
    groups_from_dimensional,
    nondimensionalize_state,
    nondimensionalize_trajectory,
    redimensionalize_state,
    split_timescales,
)
from excitable_crawler.selfcheck import ANCHORS

finite = dict(allow_nan=False, allow_infinity=False)


@pytest.fixture
def ref_params():
    return dimensional_from_groups(REFERENCE_GROUPS, **ANCHORS)


def test_reference_magnitudes(ref_params):
    sc = characteristic_scales(ref_params)
    assert sc.t_star == pytest.approx(0.1, rel=1e-14)
    assert sc.V_star == pytest.approx(0.1, rel=1e-14)
    assert sc.l_star == 0.1
    assert sc.m_star == 0.01
    assert sc.v_star == pytest.approx(1.0, rel=1e-14)
    assert groups_from_dimensional(ref_params).pi_c == pytest.approx(1e4, rel=1e-14)


def test_inverted_parameters(ref_params):
    p = ref_params
    assert p.b == pytest.approx(0.235, rel=1e-12)
    assert p.f_max == pytest.approx(0.125, rel=1e-12)
    assert p.k_v == pytest.approx(0.25, rel=1e-12)
    assert p.beta == pytest.approx(0.2, rel=1e-12)
    assert p.gamma == pytest.approx(0.2, rel=1e-12)
    assert p.eps_f == pytest.approx(0.1 / (0.1 * 4.7e3), rel=1e-12)


def test_zero_damping_gives_zero_zeta(ref_params):
    p = DimensionalParams(**{**ref_params.as_dict(), "b": 0.0})
    assert groups_from_dimensional(p).zeta == 0.0


def test_pi_c_is_pinned_by_kappa():
    for kappa in (10.0, 100.0, 1e3):
        p = dimensional_from_groups(REFERENCE_GROUPS.replace(pi_c=kappa**2), kappa=kappa, **ANCHORS)
        assert groups_from_dimensional(p, kappa=kappa).pi_c == pytest.approx(kappa**2, rel=1e-13)


def test_unreachable_pi_c_rejected():
    with pytest.raises(ParameterError, match="unreachable"):
        dimensional_from_groups(REFERENCE_GROUPS.replace(pi_c=5e3), **ANCHORS)


def test_bad_anchor_rejected():
    with pytest.raises(ParameterError):
        dimensional_from_groups(REFERENCE_GROUPS, **{**ANCHORS, "k": -1.0})


@settings(max_examples=100, deadline=None)
@given(
    zeta=st.one_of(st.just(0.0), st.floats(1e-6, 20.0, **finite)),
    pi_f=st.floats(1e-3, 1e3, **finite),
    pi_v=st.floats(1e-3, 1e3, **finite),
    pi_eps=st.floats(1.0, 1e6, **finite),
    n_f=st.floats(0.0, 5.0, **finite),
    pi_l=st.floats(1e-2, 1e6, **finite),
    pi_s=st.floats(1e-2, 1e6, **finite),
    m=st.floats(1e-4, 1.0, **finite),
    l0=st.floats(1e-3, 1.0, **finite),
    k=st.floats(1e-2, 1e2, **finite),
)
def test_round_trip_groups(zeta, pi_f, pi_v, pi_eps, n_f, pi_l, pi_s, m, l0, k):
    g = REFERENCE_GROUPS.replace(zeta=zeta, pi_f=pi_f, pi_v=pi_v, pi_eps=pi_eps, n_f=n_f, pi_l=pi_l, pi_s=pi_s)
    p = dimensional_from_groups(g, m=m, l0=l0, c=1e-6, k=k, alpha=10.0)
    back = groups_from_dimensional(p, epsilon=g.epsilon)
    np.testing.assert_allclose(back.as_array(), g.as_array(), rtol=1e-12, atol=0.0)


def test_round_trip_params(ref_params):
    g = groups_from_dimensional(ref_params)
    p = dimensional_from_groups(g, **ANCHORS)
    for name, value in ref_params.as_dict().items():
        assert getattr(p, name) == pytest.approx(value, rel=1e-12, abs=0.0), name


def test_group_scaling_laws(ref_params):
    """Doubling stiffness halves t*^2 and rescales every group by its known power."""
    p2 = DimensionalParams(**{**ref_params.as_dict(), "k": 2 * ref_params.k})
    g1, g2 = groups_from_dimensional(ref_params), groups_from_dimensional(p2)
    r = 2.0**0.5
    assert g2.zeta == pytest.approx(g1.zeta / r, rel=1e-13)
    assert g2.pi_f == pytest.approx(g1.pi_f / 2, rel=1e-13)
    assert g2.pi_eps == pytest.approx(g1.pi_eps * r, rel=1e-13)
    assert g2.pi_l == pytest.approx(g1.pi_l / r, rel=1e-13)
    assert g2.pi_c == pytest.approx(g1.pi_c, rel=1e-13)


def test_split_timescales():
    eg = split_timescales(REFERENCE_GROUPS)
    assert (eg.pi_c_eps, eg.pi_l_eps, eg.pi_s_eps) == pytest.approx((1.0, 2.0, 2.0))


def test_state_round_trip(ref_params):
    sc = characteristic_scales(ref_params)
    x = State(1.3, -0.02, 0.4, 0.7)
    dim = redimensionalize_state(x, sc, u_com=3.0)
    assert isinstance(dim, ComStrainState)
    back, u = nondimensionalize_state(dim, sc)
    np.testing.assert_allclose(back, x, rtol=1e-15)
    assert u == pytest.approx(3.0)


def test_trajectory_rescaling(ref_params):
    sc = characteristic_scales(ref_params)
    t = np.array([0.0, 0.1, 0.2])
    states = np.array([[0.2, 0.01, 1.0, 0.05, 2.0]] * 3)
    td, xd, ud = nondimensionalize_trajectory(t, states, sc)
    np.testing.assert_allclose(td, [0.0, 1.0, 2.0])
    # v* = 1 m/s, so velocities are unchanged
    np.testing.assert_allclose(xd[0], [2.0, 1.0, 0.5, 2.0])
    np.testing.assert_allclose(ud, 0.1)
