import numpy as np
import pytest

from stochdec.prob import JointDistribution

REF = [[0.4, 0.1], [0.1, 0.4]]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def ref_joint():
    return JointDistribution(np.array(REF))
