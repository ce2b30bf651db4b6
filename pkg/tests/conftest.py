import pytest

from excitable_crawler.analysis import detect_limit_cycle
from excitable_crawler.integrate import simulate
from excitable_crawler.model import REFERENCE_GROUPS, REFERENCE_INITIAL_STATE

HORIZON = (0.0, 200.0)


@pytest.fixture(scope="session")
def ref_run():
    """Default closed-loop run, shared because it costs a few seconds."""
    return simulate(REFERENCE_GROUPS, REFERENCE_INITIAL_STATE, HORIZON)


@pytest.fixture(scope="session")
def ref_traj(ref_run):
    return ref_run[0]


@pytest.fixture(scope="session")
def ref_cycle(ref_traj):
    return detect_limit_cycle(ref_traj, REFERENCE_GROUPS)
