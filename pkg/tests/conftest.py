import os

import hypothesis
import numpy as np
import pytest

from helpers import GG_Y1, GG_Y2
from mable_ph.model import Dataset

hypothesis.settings.register_profile("ci", max_examples=60, deadline=None, derandomize=True)
hypothesis.settings.register_profile("dev", max_examples=20, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=500, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


@pytest.fixture
def gg_dataset():
    return Dataset.from_arrays(GG_Y1, GG_Y2, [1] * 6)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
