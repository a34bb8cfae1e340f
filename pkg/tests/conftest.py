import numpy as np
import pytest

from voxdet.config.stages import SynthConfig
from voxdet.core.volume import Volume3
from voxdet.services.synth_service import generate


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_volume():
    def make(dims, seed=0):
        return Volume3(np.random.default_rng(seed).random(dims))
    return make


@pytest.fixture(scope="session")
def default_test_volumes():
    """Five default-config synthetic volumes (seeds 0..4)."""
    return [generate(SynthConfig(seed=k)) for k in range(5)]


@pytest.fixture
def small_synth():
    """Config small enough for quick CLI / pipeline runs."""
    return SynthConfig(dims=(40, 40, 40), n_objects=2, min_separation=12.0, seed=3)
