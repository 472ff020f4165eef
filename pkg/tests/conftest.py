import numpy as np
import pytest

from stochpend import (
    NoiseAmplitudes,
    NoiseChannelConfig,
    PendulumParams,
    PeriodicDriftSpec,
)
from stochpend.presets import default_noise_pair


@pytest.fixture(scope="session")
def params():
    return PendulumParams(l=1.0, g=1.0)


@pytest.fixture(scope="session")
def pair_config():
    return default_noise_pair()


@pytest.fixture(scope="session")
def ou_config():
    """Plain mean-reverting channel with unit stationary variance."""
    return NoiseChannelConfig(
        drift=PeriodicDriftSpec(tau=1.0, alpha=1.0),
        beta=float(np.sqrt(2.0)), z0=0.0, driver="shared")


@pytest.fixture()
def rng():
    return np.random.default_rng(20250810)


def random_amps(rng, lo=0.0, hi=0.6):
    return NoiseAmplitudes(*rng.uniform(lo, hi, size=2))
