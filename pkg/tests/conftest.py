import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# fixtures drawn inside @given tests are immutable DomainSpecs, so sharing
# them across generated examples is safe
settings.register_profile(
    "default",
    max_examples=50,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
    derandomize=True,
)
settings.load_profile("default")

from viscodecay.domain import DomainSpec, zero_boundary


@pytest.fixture
def unit_interval():
    return DomainSpec(1, (1.0,), (101,))


@pytest.fixture
def fine_interval():
    return DomainSpec(1, (1.0,), (201,))


@pytest.fixture
def unit_square():
    return DomainSpec(2, (1.0, 1.0), (51, 51))


def random_smooth_field(dom, rng, modes=6):
    """Random low-mode sine combination; Dirichlet-compatible and smooth."""
    coef = rng.normal(size=(modes,) * dom.dim)
    if dom.dim == 1:
        x = dom.axes()[0]
        u = sum(
            coef[k] * np.sin((k + 1) * np.pi * x / dom.lengths[0]) for k in range(modes)
        )
    else:
        x, y = dom.meshgrid()
        u = sum(
            coef[i, j]
            * np.sin((i + 1) * np.pi * x / dom.lengths[0])
            * np.sin((j + 1) * np.pi * y / dom.lengths[1])
            for i in range(modes)
            for j in range(modes)
        )
    return zero_boundary(u, dom)
