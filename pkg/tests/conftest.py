import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import path_network


@pytest.fixture
def path5():
    return path_network(5)


@pytest.fixture
def path3():
    return path_network(3)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
