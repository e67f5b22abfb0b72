import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spmnl.model import DesignMatrix, ShareMatrix, class_probabilities, solve_spatial_filter
from spmnl.weights import build_knn_weights


@pytest.fixture
def rng():
    return np.random.default_rng(20240915)


def make_sar_dataset(n, rho, seed, k_neighbors=5, beta=None, n_classes=3):
    """Small spatial multinomial dataset with known parameters."""
    gen = np.random.default_rng(seed)
    coords = gen.normal(size=(n, 2))
    weights = build_knn_weights(coords, k_neighbors)
    n_cov = 2 if beta is None else np.atleast_2d(beta).shape[1]
    X = gen.normal(size=(n, n_cov))
    if beta is None:
        beta = np.array([[1.0, 0.5], [0.5, 1.0]])[: n_classes - 1]
    beta = np.atleast_2d(beta)
    mu = np.zeros((n, n_classes))
    for j in range(n_classes - 1):
        rhs = X @ beta[j]
        mu[:, j] = solve_spatial_filter(weights.W, rho, rhs) if rho else rhs
    y = class_probabilities(mu)
    return ShareMatrix(y), DesignMatrix(X), weights, beta
