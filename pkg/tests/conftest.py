import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from decisionmap.classifier import train_softmax
from decisionmap.datasets import make_blobs

# shared acceptance-experiment definitions live next to the other scripts
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "scripts"))


@pytest.fixture(scope="session")
def blobs_small():
    return make_blobs(n=60, classes=3, dim=4, seed=11)


@pytest.fixture(scope="session")
def blobs_softmax(blobs_small):
    return train_softmax(blobs_small, epochs=200, learning_rate=1.0, seed=0)


def finite_diff_gradient(fn, x, h=1e-5):
    """Central-difference gradient of a scalar function, one coordinate at a time."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for d in range(x.size):
        e = np.zeros_like(x)
        e.flat[d] = h
        g.flat[d] = (fn(x + e) - fn(x - e)) / (2 * h)
    return g


def golden_section_line_search(line_loss):
    """Independent line-search oracle: golden section plus a parabolic polish.

    Golden section alone stalls near sqrt(eps) on a quadratic's flat bottom,
    so one exact three-point parabola step recovers full precision.
    """
    x = minimize_scalar(line_loss, method="golden", options={"xtol": 1e-12}).x
    h = 1e-3 * max(1.0, abs(x))
    g0, g1, g2 = line_loss(x - h), line_loss(x), line_loss(x + h)
    denom = g0 - 2.0 * g1 + g2
    if denom <= 0:
        return x
    return x + 0.5 * h * (g0 - g2) / denom
