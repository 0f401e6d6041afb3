import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stegobench.imagecore import GRAY, RGB, ImageBuffer
from stegobench.synthetic import synth_cover

settings.register_profile(
    "suite",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))


@pytest.fixture
def gray_cover():
    return synth_cover(11, 64, 64, 1)


@pytest.fixture
def rgb_cover():
    return synth_cover(12, 64, 64, 3)


def random_image(rng, h=32, w=32, channels=3):
    arr = rng.integers(0, 256, size=(h, w, channels), dtype=np.uint8)
    return ImageBuffer(arr, RGB if channels == 3 else GRAY)
