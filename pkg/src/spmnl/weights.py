"""Row-stochastic k-nearest-neighbour spatial weight matrices.

Also provides the precomputed log-determinant grid for log|I - rho W|,
kept around for experimenting with likelihood variants of the rho
Metropolis-Hastings step (the default rho target does not use it).
"""

from __future__ import annotations

import numpy as np


class SpatialWeights:
    """Dense row-stochastic neighbourhood matrix with zero diagonal.

    Every row has exactly k nonzero entries, each equal to 1/k.
    """

    def __init__(self, W, k):
        W = np.array(W, dtype=float)
        n = W.shape[0]
        if W.ndim != 2 or W.shape[1] != n:
            raise ValueError("weight matrix must be square")
        if np.any(np.diag(W) != 0.0):
            raise ValueError("no region may neighbour itself (nonzero diagonal)")
        if W.min() < 0.0:
            raise ValueError("weights must be non-negative")
        row_sums = W.sum(axis=1)
        if np.max(np.abs(row_sums - 1.0)) > 1e-12:
            bad = int(np.argmax(np.abs(row_sums - 1.0)))
            raise ValueError("row %d sums to %.15f, not 1" % (bad, row_sums[bad]))
        counts = (W > 0).sum(axis=1)
        if np.any(counts != k):
            bad = int(np.argmax(counts != k))
            raise ValueError(
                "row %d has %d neighbours, expected k=%d" % (bad, counts[bad], k)
            )
        W.setflags(write=False)
        self.W = W
        self.k = int(k)
        self.n = n


def validate_coordinates(coords):
    """Check a point set for use in nearest-neighbour construction:
    at least two points, all finite, no exact duplicates."""
    pts = np.asarray(coords, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("coordinates must be an (N, 2) array of x, y pairs")
    if pts.shape[0] < 2:
        raise ValueError("need at least 2 points")
    if not np.all(np.isfinite(pts)):
        bad = int(np.argwhere(~np.isfinite(pts))[0][0])
        raise ValueError("non-finite coordinate at point %d" % bad)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    srt = pts[order]
    dup = np.all(srt[1:] == srt[:-1], axis=1)
    if np.any(dup):
        i = int(np.argmax(dup))
        raise ValueError(
            "duplicate coordinates at points %d and %d"
            % (order[i], order[i + 1])
        )
    return pts


def build_knn_weights(coords, k):
    """Row-stochastic k-nearest-neighbour weights from planar points.

    Neighbour sets use Euclidean distance; exact distance ties are
    broken by ascending point index, so identical inputs always produce
    bit-identical output.

    Parameters
    ----------
    coords : (N, 2) array-like
        Planar x, y coordinates, no duplicates.
    k : int
        Neighbours per region, 1 <= k < N.
    """
    pts = validate_coordinates(coords)
    n = pts.shape[0]
    k = int(k)
    if not 1 <= k < n:
        raise ValueError("need 1 <= k < N, got k=%d with N=%d" % (k, n))
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(d2, np.inf)
    W = np.zeros((n, n))
    # argsort of (distance, index) pairs: stable sort on index-ordered
    # rows breaks ties toward the lower index
    for i in range(n):
        nearest = np.argsort(d2[i], kind="stable")[:k]
        W[i, nearest] = 1.0 / k
    return SpatialWeights(W, k)


class LogDetGrid:
    """Tabulated log|I - rho W| over a strictly increasing rho grid,
    with linear interpolation between nodes. Contains rho = 0 as an
    exact node with value 0."""

    def __init__(self, rho_values, logdet_values):
        rho_values = np.asarray(rho_values, dtype=float)
        logdet_values = np.asarray(logdet_values, dtype=float)
        if rho_values.shape != logdet_values.shape or rho_values.ndim != 1:
            raise ValueError("rho and log-determinant grids must be matching vectors")
        if np.any(np.diff(rho_values) <= 0):
            raise ValueError("rho grid must be strictly increasing")
        if rho_values[0] <= -1.0 or rho_values[-1] >= 1.0:
            raise ValueError("rho grid must lie inside (-1, 1)")
        zero = np.flatnonzero(rho_values == 0.0)
        if zero.size == 0 or logdet_values[zero[0]] != 0.0:
            raise ValueError("grid must contain rho = 0 with log-determinant 0")
        self.rho_values = rho_values
        self.logdet_values = logdet_values

    def __call__(self, rho):
        """Interpolated log|I - rho W| at one or more rho values."""
        rho = np.asarray(rho, dtype=float)
        if np.any(rho < self.rho_values[0]) or np.any(rho > self.rho_values[-1]):
            raise ValueError("rho outside the tabulated grid")
        return np.interp(rho, self.rho_values, self.logdet_values)


def build_logdet_grid(W, n_points=2000, bound=0.999):
    """Tabulate log|I - rho W| on a uniform grid over [-bound, bound].

    Each node is evaluated by dense LU factorization. A node at exactly
    rho = 0 is guaranteed (inserted when the uniform grid misses it) so
    queries at 0 return 0 exactly.

    Raises a numerical error naming the offending rho if I - rho W is
    singular at a node.
    """
    if n_points < 3:
        raise ValueError("need at least 3 grid points")
    W = W.W if hasattr(W, "W") else np.asarray(W, dtype=float)
    n = W.shape[0]
    rhos = np.linspace(-bound, bound, n_points)
    near_zero = np.argmin(np.abs(rhos))
    if abs(rhos[near_zero]) < 1e-12:
        rhos[near_zero] = 0.0
    else:
        rhos = np.sort(np.append(rhos, 0.0))
    eye = np.eye(n)
    values = np.empty(rhos.size)
    for i, rho in enumerate(rhos):
        if rho == 0.0:
            values[i] = 0.0
            continue
        sign, logdet = np.linalg.slogdet(eye - rho * W)
        if sign <= 0 or not np.isfinite(logdet):
            raise np.linalg.LinAlgError(
                "I - rho W is singular or non-positive at rho=%.6f" % rho
            )
        values[i] = logdet
    return LogDetGrid(rhos, values)


def load_coordinates_csv(path):
    """Read planar coordinates from a CSV with header ``id,x,y``."""
    import pandas as pd

    df = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in ("id", "x", "y") if c not in df.columns]
    if missing:
        raise ValueError(
            "%s: coordinate CSV must have header id,x,y (missing %s)"
            % (path, ",".join(missing))
        )
    return validate_coordinates(df[["x", "y"]].to_numpy(dtype=float))


def save_weights_csv(weights, path):
    """Write the dense weight matrix as CSV, one header row of column
    labels then N rows of N entries."""
    import pandas as pd

    W = weights.W if hasattr(weights, "W") else np.asarray(weights, dtype=float)
    cols = ["w%d" % i for i in range(W.shape[1])]
    pd.DataFrame(W, columns=cols).to_csv(path, index=False, float_format="%.17g")


def load_weights_csv(path, k=None):
    """Read a dense weight matrix written by :func:`save_weights_csv`.

    When ``k`` is omitted it is inferred from the first row's nonzero
    count; the full :class:`SpatialWeights` validation then applies.
    """
    import pandas as pd

    W = pd.read_csv(path, float_precision="round_trip").to_numpy(dtype=float)
    if k is None:
        k = int((W[0] > 0).sum())
    return SpatialWeights(W, k)
