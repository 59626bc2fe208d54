import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from jiggle_rr.model import INFINITE, ReducedParams  # noqa: E402


@pytest.fixture
def p_chi1_beta10():
    return ReducedParams.create(1.0, 10.0)


@pytest.fixture
def p_chi1_zero_t():
    return ReducedParams.create(1.0, INFINITE)
