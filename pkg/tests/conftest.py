import numpy as np
import pytest

from scenbar.core import MonomialBasis, Region, VerificationProblem
from scenbar.systems import LinearSystem, RoomTemperatureSystem


@pytest.fixture
def room_system():
    return RoomTemperatureSystem()


@pytest.fixture
def quad_basis():
    return MonomialBasis(1, 2)


@pytest.fixture
def room_problem():
    """The room-temperature study configuration."""
    return VerificationProblem(
        state_region=Region((17.0,), (30.0,)),
        initial_region=Region((17.0,), (18.0,)),
        unsafe_region=Region((28.0,), (30.0,)),
        horizon=3,
        rho=0.1,
        beta=0.005,
        beta_s=0.005,
        delta=0.015,
        epsilon=0.03,
        lipschitz_bound=2160.0,
        variance_bound=0.005,
        mu=-1e-3,
        p_max=12.0,
    )


def make_toy_problem(**overrides):
    """Zero-noise contracting linear system, sized so sound runs stay tiny."""
    kw = dict(
        state_region=Region((-1.0,), (1.0,)),
        initial_region=Region((-0.1,), (0.1,)),
        unsafe_region=Region((0.9,), (1.0,)),
        horizon=3,
        rho=0.5,
        beta=0.005,
        beta_s=0.005,
        delta=0.05,
        epsilon=0.15,
        lipschitz_bound=10.0,  # lipschitz_linear(m=1, p_max=4, frobenius=0.5)
        variance_bound=1.25e-5,  # delta^2 * beta_s, so one realization suffices
        mu=-1e-3,
        p_max=4.0,
    )
    kw.update(overrides)
    return VerificationProblem(**kw)


@pytest.fixture
def toy_problem():
    return make_toy_problem()


@pytest.fixture
def toy_system():
    return LinearSystem(a=0.5, sigma_w=0.0)


def assert_close(actual, expected, tol, label=""):
    assert abs(actual - expected) <= tol, f"{label}: {actual} vs {expected} (tol {tol})"


def rng(seed=0):
    return np.random.default_rng(seed)
