import os

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(int(os.environ.get("SVFAPPROX_SEED", "0")))
