import numpy as np
import pytest

from critdamp import assemble, builtin_model
from critdamp.continuation import TraceConfig, trace
from critdamp.roots import find_initial_points, find_singular_points


@pytest.fixture(scope="session")
def sdof1k():
    return assemble(*builtin_model("sdof1k"))


@pytest.fixture(scope="session")
def sdof2k():
    return assemble(*builtin_model("sdof2k"))


@pytest.fixture(scope="session")
def chain():
    return assemble(*builtin_model("chain4dof"))


def sdof2k_plane(fixed_name, value):
    """sdof2k on the plane used for one block of initial values."""
    model, plane = builtin_model("sdof2k")
    if fixed_name == "nu1":
        plane = plane.replace(p_name="zeta", q_name="nu2", fixed={"nu1": value},
                              p_range=(0.0, 10.0), q_range=(0.0, 2.5))
    else:
        plane = plane.replace(p_name="nu1", q_name="nu2", fixed={"zeta": value},
                              p_range=(0.0, 2.5), q_range=(0.0, 2.5))
    return assemble(model, plane)


@pytest.fixture(scope="session")
def chain_s2(chain):
    return find_singular_points(chain, "S2")


@pytest.fixture(scope="session")
def chain_starts(chain):
    return find_initial_points(chain, {"nu": 0.06})


@pytest.fixture(scope="session")
def chain_curves(chain, chain_starts):
    """(backward, forward) pair per start at nu = 0.06, ordered by zeta."""
    return [trace(chain, s, TraceConfig()) for s in chain_starts]


@pytest.fixture(scope="session")
def sdof1k_curves(sdof1k):
    """Lower curve (forward from nu=0) and the two halves of the upper curve."""
    lo, up = find_initial_points(sdof1k, {"zeta": 1.0})
    lower = trace(sdof1k, lo, TraceConfig(direction=1))
    up_back, up_fwd = trace(sdof1k, up, TraceConfig())
    return {"L": [lower], "U": [up_back, up_fwd]}


def rng(seed=0):
    return np.random.default_rng(seed)
