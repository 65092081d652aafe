import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rayleigh_watch import ChannelGrid, FlowState

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")

# independent high-resolution quadrature (closed-form u, Gauss-Legendre in y)
E1_EXACT = 2 * np.pi * (2 / np.sqrt(3) - 1)
E2_ORACLE = 0.248109689892864
KINETIC_ORACLE = 0.12919119475702695


def tilted(X, Y):
    return 2 * Y - np.sin(2 * np.pi * X - Y)


@pytest.fixture
def grid():
    return ChannelGrid(64, 129)


@pytest.fixture
def tilted_state():
    g = ChannelGrid(128, 257)
    return FlowState(g, g.sample(tilted))
