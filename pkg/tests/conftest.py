import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from otconv.measures import new_discrete


def random_measure(rng, n, dim, uniform=False):
    pts = rng.uniform(-1.0, 1.0, size=(n, dim))
    w = np.full(n, 1.0 / n) if uniform else rng.uniform(0.05, 1.0, size=n)
    return new_discrete(pts, w / w.sum())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
