"""Convergence and fit diagnostics plus the benchmark error metric.

Geweke's stationarity z-score compares the mean of the first 10% of a
chain against the mean of its last 50%, with each window's variance
estimated spectrally (Bartlett lag window, lag = floor(sqrt(window
length))) so autocorrelation does not understate the standard error.

McFadden's pseudo R-squared is 1 - loglik(model) / loglik(null), the
null being the intercept-only multinomial whose class probabilities are
the column means of the observed shares.

The root-mean-squared error helper aggregates Monte Carlo point
estimates against data-generating truths: per element across runs, then
averaged over elements (classes, covariates) to a single number.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ShareMatrix


@dataclass(frozen=True)
class GewekeResult:
    z: float
    frac_first: float
    frac_last: float


@dataclass(frozen=True)
class FitStats:
    mcfadden_r2: float
    mean_loglik: float


def _spectral_variance(window):
    """Spectral density at frequency zero via a Bartlett lag window."""
    n = window.size
    lag = min(int(np.floor(np.sqrt(n))), n - 1)
    centered = window - window.mean()
    var = centered @ centered / n
    for l in range(1, lag + 1):
        gamma = (centered[:-l] @ centered[l:]) / n
        var += 2.0 * (1.0 - l / (lag + 1.0)) * gamma
    return var


def geweke_z(chain_column, frac_first=0.1, frac_last=0.5):
    """Geweke stationarity z-score of one chain column.

    Raises for chains shorter than 100 draws or with no variance in
    either window (the diagnostic is undefined there).
    """
    x = np.asarray(chain_column, dtype=float).ravel()
    n = x.size
    if n < 100:
        raise ValueError("need a chain of length >= 100, got %d" % n)
    n_a = int(np.floor(frac_first * n))
    n_b = int(np.floor(frac_last * n))
    a = x[:n_a]
    b = x[n - n_b:]
    var_a = _spectral_variance(a)
    var_b = _spectral_variance(b)
    denom = var_a / n_a + var_b / n_b
    if denom <= 0.0 or not np.isfinite(denom):
        raise ValueError("zero-variance chain window: Geweke diagnostic undefined")
    return float((a.mean() - b.mean()) / np.sqrt(denom))


def geweke_result(chain_column, frac_first=0.1, frac_last=0.5):
    return GewekeResult(
        z=geweke_z(chain_column, frac_first, frac_last),
        frac_first=frac_first,
        frac_last=frac_last,
    )


def null_loglik(y):
    """Log-likelihood of the intercept-only multinomial: every region
    gets the column-mean share vector as its class probabilities."""
    y = y.y if isinstance(y, ShareMatrix) else np.asarray(y, dtype=float)
    p_bar = y.mean(axis=0)
    out = 0.0
    for j in range(y.shape[1]):
        col = y[:, j]
        mass = col.sum()
        if mass > 0.0:
            # p_bar[j] >= mass / N > 0 whenever any share is positive
            out += mass * np.log(p_bar[j])
    return float(out)


def mcfadden_r2(loglik_model, y):
    """1 - loglik(model) / loglik(intercept-only)."""
    l0 = null_loglik(y)
    if l0 == 0.0:
        raise ValueError(
            "null log-likelihood is zero (single-class point-mass shares); "
            "pseudo R-squared undefined"
        )
    return 1.0 - float(loglik_model) / l0


def rmse(estimates, truths):
    """Root-mean-squared error of point estimates across Monte Carlo
    runs.

    1-d inputs give sqrt(mean of squared errors). Multi-dimensional
    inputs are treated as (runs, ...) stacks: the RMSE is taken per
    element across runs, then averaged over the remaining axes.
    """
    est = np.asarray(estimates, dtype=float)
    tru = np.asarray(truths, dtype=float)
    if est.shape != tru.shape:
        raise ValueError("shape mismatch: %s vs %s" % (est.shape, tru.shape))
    if est.size == 0:
        raise ValueError("need at least one run")
    sq = (est - tru) ** 2
    if est.ndim == 1:
        return float(np.sqrt(sq.mean()))
    return float(np.sqrt(sq.mean(axis=0)).mean())
