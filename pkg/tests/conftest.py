import numpy as np
import pytest

from photonmem import CavityParams, ShutterSchedule, simulate_release
from photonmem.modes import ModeFunction, normalized_mode


@pytest.fixture(scope="session")
def params():
    return CavityParams()


@pytest.fixture(scope="session")
def base_release(params):
    """Stock release simulation (opens at 150 ns), shared across tests."""
    return simulate_release(params, ShutterSchedule(t_release_ns=150.0))


def boxcar(t0: float, width_ns: float, dt: float = 1.0) -> ModeFunction:
    n = int(round(width_ns / dt))
    return normalized_mode(np.ones(n), t0, dt)


def gaussian_mode(center: float, sigma: float, t0: float, n: int, dt: float = 1.0) -> ModeFunction:
    t = t0 + dt * np.arange(n)
    return normalized_mode(np.exp(-0.5 * ((t - center) / sigma) ** 2), t0, dt)
