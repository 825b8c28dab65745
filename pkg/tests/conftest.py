import numpy as np
import pytest

from bvpseg.signal import Signal, SynthesisConfig, synthesize_bvp


@pytest.fixture(scope="session")
def clean_bvp() -> Signal:
    return synthesize_bvp(SynthesisConfig(), seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
