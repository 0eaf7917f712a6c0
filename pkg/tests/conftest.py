"""Shared fixtures.

The desk-scale amplitude table (10^4 steps over the full pulse window) is
expensive enough to build once per session; everything downstream treats
it as read-only.
"""

import numpy as np
import pytest

from paritysim import model, sme
from paritysim.pulse import default_pulse


@pytest.fixture(scope="session")
def config():
    return model.default_config()


@pytest.fixture(scope="session")
def pulse():
    return default_pulse()


@pytest.fixture(scope="session")
def desk_table(config, pulse):
    return sme.build_table(config, pulse, 10_000)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
