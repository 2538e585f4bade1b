from __future__ import annotations

import numpy as np
import pytest

from helpers import star_table


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def star():
    return star_table()
