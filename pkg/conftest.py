import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from util import make_rng  # noqa: E402


@pytest.fixture
def rng():
    return make_rng(1234)


@pytest.fixture
def rng_factory():
    return make_rng
