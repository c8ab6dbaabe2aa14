import numpy as np
import pytest

from insfem.verify.cases import lid_cavity_system as cavity_system  # noqa: F401


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
