"""Marginal effects: own-region, spillover, and total responses.

A unit change in covariate k moves every region's class probabilities,
both directly and through the spatial multiplier, so the effect of k on
class j is an N x N matrix

    Lambda_kj = p_kj * [zeta_kj - sum_j' p_kj' * zeta_kj']   (rowwise)

where zeta_kj = (I - rho_j W)^(-1) (I beta_kj + W theta_kj) is the
Jacobian of the class-j log-odds with respect to the covariate vector,
and the evaluation-point probabilities p_kj come from the softmax of
mu_kj = (I - rho_j W)^(-1) (x_mean_k beta_kj + W xw_mean_k theta_kj) 1,
the log-odds with every region held at the sample mean of covariate k
(and of its spatial lag). The reference class enters with beta = theta
= 0 and rho = 0; its probabilities still respond through the softmax.

Summaries follow the usual spatial-econometrics convention:

    direct   = mean of diag(Lambda)      (own-region response)
    total    = grand sum of Lambda / N
    indirect = total - direct            (spillovers)

Evaluating the summaries per posterior draw costs one dense inverse per
non-reference class per draw with nonzero rho; the per-draw machinery
only assembles the diagonal and row-sum profiles it actually needs, and
a thinning knob trades draws against runtime for large chains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelSpec, class_probabilities


def effect_matrix(spec: ModelSpec, beta, theta, rho, k, x_mean, xw_mean=0.0,
                  W=None, n_regions=None, lag_pos=None):
    """Per-class N x N effect matrices of covariate k for one parameter
    draw.

    Parameters
    ----------
    beta, theta, rho : arrays for the J - 1 non-reference classes,
        shapes (J-1, K), (J-1, K_lag), (J-1,).
    k : covariate column index (must not be an intercept column).
    x_mean, xw_mean : evaluation point, the sample means of covariate k
        and of its spatial lag.
    lag_pos : position of k among the lag-eligible columns, or None
        when k carries no Durbin term.

    Returns
    -------
    (J, N, N) array stacking Lambda_kj for every class, reference last.
    """
    beta = np.atleast_2d(beta)
    theta = np.atleast_2d(theta) if np.size(theta) else np.zeros((beta.shape[0], 0))
    rho = np.atleast_1d(rho)
    if W is not None:
        W = W.W if hasattr(W, "W") else np.asarray(W, dtype=float)
        n = W.shape[0]
    else:
        if n_regions is None:
            raise ValueError("need n_regions when no weight matrix is given")
        n = int(n_regions)
    m = beta.shape[0]
    n_classes = m + 1

    zeta = np.zeros((n_classes, n, n))
    mu = np.zeros((n, n_classes))
    eye = np.eye(n)
    ones = np.ones(n)
    for j in range(m):
        b = beta[j, k]
        t = theta[j, lag_pos] if lag_pos is not None and theta.shape[1] else 0.0
        if W is None:
            zeta[j] = b * eye
            mu[:, j] = x_mean * b
        else:
            multiplier = np.linalg.inv(eye - rho[j] * W)
            zeta[j] = b * multiplier + t * (multiplier @ W)
            mu[:, j] = multiplier @ (x_mean * b * ones) + multiplier @ (
                W @ (xw_mean * t * ones)
            )
    probs = class_probabilities(mu)
    weighted = np.einsum("ij,jin->in", probs, zeta)
    lam = probs.T[:, :, None] * (zeta - weighted[None, :, :])
    return lam


def summarize_effects(lam):
    """(direct, indirect, total) summary of one square effect matrix:
    direct is the diagonal mean, total the grand sum over N, and
    indirect their difference (exactly, by construction)."""
    lam = np.asarray(lam, dtype=float)
    if lam.ndim != 2 or lam.shape[0] != lam.shape[1]:
        raise ValueError("effect matrix must be square")
    n = lam.shape[0]
    direct = float(np.trace(lam)) / n
    total = float(lam.sum()) / n
    return direct, total - direct, total


@dataclass
class ImpactSummary:
    """Posterior direct/indirect/total effects per covariate and class.

    All arrays have shape (n_covariates, n_classes). Intervals are 90%
    equal-tailed; an effect is flagged significant when its interval
    excludes zero.
    """

    covariate_names: list
    class_labels: list
    direct_mean: np.ndarray
    direct_lo: np.ndarray
    direct_hi: np.ndarray
    indirect_mean: np.ndarray
    indirect_lo: np.ndarray
    indirect_hi: np.ndarray
    total_mean: np.ndarray
    total_lo: np.ndarray
    total_hi: np.ndarray

    @property
    def direct_significant(self):
        return (self.direct_lo > 0) | (self.direct_hi < 0)

    @property
    def indirect_significant(self):
        return (self.indirect_lo > 0) | (self.indirect_hi < 0)

    @property
    def total_significant(self):
        return (self.total_lo > 0) | (self.total_hi < 0)

    def to_frame(self):
        """Long-format table, one row per covariate x class x effect."""
        import pandas as pd

        rows = []
        kinds = (
            ("direct", self.direct_mean, self.direct_lo, self.direct_hi),
            ("indirect", self.indirect_mean, self.indirect_lo, self.indirect_hi),
            ("total", self.total_mean, self.total_lo, self.total_hi),
        )
        for kind, mean, lo, hi in kinds:
            for ki, name in enumerate(self.covariate_names):
                for j, label in enumerate(self.class_labels):
                    rows.append(
                        {
                            "covariate": name,
                            "class": label,
                            "effect": kind,
                            "mean": mean[ki, j],
                            "q05": lo[ki, j],
                            "q95": hi[ki, j],
                            "significant": bool(lo[ki, j] > 0 or hi[ki, j] < 0),
                        }
                    )
        return pd.DataFrame(rows)


def summary_effect_draws(spec, design, W, beta, theta, rho, covariates=None,
                         thin=1, x_means=None, xw_means=None):
    """Direct/indirect/total summaries for every (thinned) draw.

    Parameters
    ----------
    beta, theta, rho : stacked posterior draws, shapes (R, J-1, K),
        (R, J-1, K_lag), (R, J-1).
    covariates : column indices to evaluate; defaults to every
        non-intercept column.
    x_means, xw_means : evaluation point per covariate; defaults to the
        sample means of the columns and of their spatial lags.

    Returns
    -------
    dict with (n_used, n_cov, J) arrays under "direct", "indirect",
    "total" plus the evaluated covariate indices.
    """
    if covariates is None:
        covariates = [
            i for i in range(design.n_covariates)
            if not np.all(design.X[:, i] == 1.0)
        ]
    covariates = list(covariates)
    if thin < 1:
        raise ValueError("thinning factor must be >= 1")
    keep = np.arange(0, beta.shape[0], thin)
    beta, theta, rho = beta[keep], theta[keep], rho[keep]

    W_arr = None
    if W is not None:
        W_arr = W.W if hasattr(W, "W") else np.asarray(W, dtype=float)
    n = design.n
    if x_means is None:
        x_means = design.X.mean(axis=0)
    else:
        x_means = np.asarray(x_means, dtype=float)
    if xw_means is None:
        xw_means = (W_arr @ design.X).mean(axis=0) if W_arr is not None else np.zeros_like(x_means)
    else:
        xw_means = np.asarray(xw_means, dtype=float)
    lag_cols = list(design.lagged_columns()) if spec.has_durbin_terms else []
    lag_pos = {c: lag_cols.index(c) for c in lag_cols}
    need_lagged = any(lag_pos.get(k) is not None for k in covariates) and theta.shape[2] > 0

    n_used = beta.shape[0]
    n_cov = len(covariates)
    n_classes = spec.n_classes
    profiles = None
    if W_arr is not None and n >= 100 and n_used * (n_classes - 1) >= 60:
        profiles = _PowerSeriesProfiles(W_arr)
    direct = np.empty((n_used, n_cov, n_classes))
    total = np.empty((n_used, n_cov, n_classes))
    for r in range(n_used):
        parts = _exact_parts(W_arr, rho[r], n, n_classes, need_lagged, profiles)
        for ki, k in enumerate(covariates):
            d, t = _summaries_from_parts(
                spec, beta[r], theta[r], k,
                x_means[k], xw_means[k], lag_pos.get(k), parts,
            )
            direct[r, ki] = d
            total[r, ki] = t
    return {
        "direct": direct,
        "indirect": total - direct,
        "total": total,
        "covariates": covariates,
    }


def posterior_impacts(chain, spec, design, W=None, thin=1, covariates=None,
                      class_labels=None):
    """Posterior means, 90% equal-tailed intervals, and significance
    flags of the summary effects, evaluated over the retained draws."""
    if chain.n_retained == 0:
        raise ValueError("empty chain")
    draws = summary_effect_draws(
        spec, design, W, chain.beta, chain.theta, chain.rho,
        covariates=covariates, thin=thin,
    )
    if class_labels is None:
        class_labels = ["class_%d" % (j + 1) for j in range(spec.n_classes)]
    names = [design.names[k] for k in draws["covariates"]]

    def _stats(arr):
        return (
            arr.mean(axis=0),
            np.quantile(arr, 0.05, axis=0),
            np.quantile(arr, 0.95, axis=0),
        )

    d_mean, d_lo, d_hi = _stats(draws["direct"])
    i_mean, i_lo, i_hi = _stats(draws["indirect"])
    t_mean, t_lo, t_hi = _stats(draws["total"])
    return ImpactSummary(
        covariate_names=names,
        class_labels=list(class_labels),
        direct_mean=d_mean, direct_lo=d_lo, direct_hi=d_hi,
        indirect_mean=i_mean, indirect_lo=i_lo, indirect_hi=i_hi,
        total_mean=t_mean, total_lo=t_lo, total_hi=t_hi,
    )


# ---------------------------------------------------------------------------
# per-draw machinery
# ---------------------------------------------------------------------------


class _PowerSeriesProfiles:
    """diag / row-sum profiles of the spatial multiplier as functions of
    rho, via the geometric expansion (I - rho W)^(-1) = sum_r rho^r W^r.

    One pass over the powers of W (sparse-dense products, so about
    nnz * N flops each) tabulates diag(W^r) and W^r 1; afterwards any
    |rho| within the series radius costs a length-R dot product per
    profile instead of a dense inversion. For row-stochastic W every
    entry of W^r lies in [0, 1], so truncation after R terms is off by
    at most rho^(R+1) / (1 - rho) elementwise.
    """

    def __init__(self, W, rho_max=0.9, tol=1e-11):
        import scipy.sparse as sp

        n = W.shape[0]
        self.rho_max = rho_max
        n_terms = int(np.ceil(np.log(tol * (1.0 - rho_max)) / np.log(rho_max))) + 2
        Ws = sp.csr_matrix(W)
        diag_table = np.empty((n_terms + 1, n))
        rowsum_table = np.empty((n_terms + 1, n))
        power = np.eye(n)
        ones_sum = np.ones(n)
        for r in range(n_terms + 1):
            diag_table[r] = power.diagonal()
            rowsum_table[r] = ones_sum
            if r < n_terms:
                power = Ws @ power
                ones_sum = Ws @ ones_sum
        self.diag_table = diag_table
        self.rowsum_table = rowsum_table
        self.n_terms = n_terms

    def covers(self, rho):
        return abs(rho) <= self.rho_max

    def parts_for(self, rho, need_lagged):
        """(diag M, diag MW, M 1, M W 1) at one rho inside the radius."""
        gains = np.power(rho, np.arange(self.n_terms + 1))
        diag_plain = gains @ self.diag_table
        rowsum_plain = gains @ self.rowsum_table
        if need_lagged:
            # M W = sum_r rho^r W^(r+1): same tables shifted one power
            diag_lagged = gains[:-1] @ self.diag_table[1:]
            rowsum_lagged = gains[:-1] @ self.rowsum_table[1:]
        else:
            diag_lagged = rowsum_lagged = None
        return diag_plain, diag_lagged, rowsum_plain, rowsum_lagged


def _exact_parts(W, rho, n, n_classes, need_lagged=True, profiles=None):
    """diag(M_j), diag(M_j W), M_j 1 and M_j W 1 per class, M_j the
    spatial multiplier, by dense inversion; also handles W = None.

    The lagged quantities are only assembled on demand: the Hadamard
    trick diag(M W) = rowwise sum of M * W' avoids a full matrix
    product, and they vanish identically when no Durbin coefficient is
    in play.
    """
    diag_plain = np.empty((n_classes, n))
    diag_lagged = np.zeros((n_classes, n))
    rowsum_plain = np.empty((n_classes, n))
    rowsum_lagged = np.zeros((n_classes, n))
    eye = np.eye(n)
    for j in range(n_classes):
        r = rho[j] if j < n_classes - 1 else 0.0
        if W is None:
            diag_plain[j] = 1.0
            rowsum_plain[j] = 1.0
            continue
        if profiles is not None and profiles.covers(r):
            dp, dl, rp, rl = profiles.parts_for(r, need_lagged)
            diag_plain[j] = dp
            rowsum_plain[j] = rp
            if need_lagged:
                diag_lagged[j] = dl
                rowsum_lagged[j] = rl
            continue
        multiplier = eye if r == 0.0 else np.linalg.inv(eye - r * W)
        diag_plain[j] = np.diag(multiplier)
        rowsum_plain[j] = multiplier.sum(axis=1)
        if need_lagged:
            diag_lagged[j] = (multiplier * W.T).sum(axis=1)
            rowsum_lagged[j] = multiplier @ W.sum(axis=1)
    return diag_plain, diag_lagged, rowsum_plain, rowsum_lagged


def _summaries_from_parts(spec, beta, theta, k, x_mean, xw_mean, lag_pos, parts):
    """Direct and total effects of covariate k for all classes, from the
    per-class diagonal / row-sum building blocks of the multiplier."""
    diag_plain, diag_lagged, rowsum_plain, rowsum_lagged = parts
    n_classes = diag_plain.shape[0]
    n = diag_plain.shape[1]
    b = np.zeros(n_classes)
    t = np.zeros(n_classes)
    b[:-1] = beta[:, k]
    if lag_pos is not None and theta.shape[1]:
        t[:-1] = theta[:, lag_pos]
    mu = (x_mean * b)[None, :] * rowsum_plain.T + (xw_mean * t)[None, :] * rowsum_lagged.T
    probs = class_probabilities(mu)
    diag_zeta = b[:, None] * diag_plain + t[:, None] * diag_lagged
    row_zeta = b[:, None] * rowsum_plain + t[:, None] * rowsum_lagged
    mean_diag = np.einsum("ij,ji->i", probs, diag_zeta)
    mean_row = np.einsum("ij,ji->i", probs, row_zeta)
    direct = (probs * (diag_zeta.T - mean_diag[:, None])).sum(axis=0) / n
    total = (probs * (row_zeta.T - mean_row[:, None])).sum(axis=0) / n
    return direct, total
