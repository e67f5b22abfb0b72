"""Core data model for spatial multinomial logit estimation.

Houses the observed-share and design-matrix containers, the model
specification (family, priors, identification restrictions), the
per-class parameter state, and the deterministic maps from parameters
to log-odds, class probabilities, and the multinomial log-likelihood.

Model families
--------------
``mnl``        non-spatial multinomial logit
``sar``        spatial autoregressive multinomial logit: per class j the
               log-odds solve (I - rho_j W) mu_j = X beta_j
``sdm``        spatial Durbin multinomial logit: adds spatially lagged
               covariates, (I - rho_j W) mu_j = X beta_j + W X_lag theta_j
``bivariate``  a single SAR logit (two-class special case), used as the
               benchmark competitor fitted once per non-reference class

Identification: the last class J is the reference with beta_J = 0,
theta_J = 0, rho_J = 0, so column J of the log-odds is identically zero.
Innovation variances are fixed at one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MNL = "mnl"
SAR_MNL = "sar"
SDM_MNL = "sdm"
BIVARIATE_SAR_LOGIT = "bivariate"

FAMILIES = (MNL, SAR_MNL, SDM_MNL, BIVARIATE_SAR_LOGIT)

#: families whose log-odds involve the spatial lag of the dependent index
SPATIAL_FAMILIES = (SAR_MNL, SDM_MNL, BIVARIATE_SAR_LOGIT)

DEFAULT_PRIOR_VARIANCE = 1e8


class ShareMatrix:
    """Observed choice shares, one row per region, one column per class.

    Rows must lie in [0, 1] and sum to one. Share-valued outcomes
    (including exact zeros) are supported directly; no censoring or
    added constants.
    """

    def __init__(self, y):
        y = np.array(y, dtype=float)
        if y.ndim != 2:
            raise ValueError("share matrix must be 2-dimensional")
        n, j = y.shape
        if j < 2:
            raise ValueError("need at least 2 classes, got %d" % j)
        if not np.all(np.isfinite(y)):
            i, k = _first_nonfinite(y)
            raise ValueError("non-finite share at row %d, column %d" % (i, k))
        if y.min() < 0.0 or y.max() > 1.0:
            raise ValueError("shares must lie in [0, 1]")
        row_sums = y.sum(axis=1)
        if np.max(np.abs(row_sums - 1.0)) > 1e-9:
            bad = int(np.argmax(np.abs(row_sums - 1.0)))
            raise ValueError(
                "share rows must sum to 1 within 1e-9 (row %d sums to %.12f)"
                % (bad, row_sums[bad])
            )
        y.setflags(write=False)
        self.y = y
        self.n = n
        self.n_classes = j

    @classmethod
    def from_raw(cls, y, tol=1e-6):
        """Build from raw shares, renormalizing rows whose sum is off by
        at most ``tol``. Larger discrepancies raise."""
        y = np.array(y, dtype=float)
        if y.ndim != 2:
            raise ValueError("share matrix must be 2-dimensional")
        if not np.all(np.isfinite(y)):
            i, k = _first_nonfinite(y)
            raise ValueError("non-finite share at row %d, column %d" % (i, k))
        row_sums = y.sum(axis=1)
        err = np.abs(row_sums - 1.0)
        if err.max() > tol:
            bad = int(np.argmax(err))
            raise ValueError(
                "share row %d sums to %.8f, beyond the %.1e ingestion tolerance"
                % (bad, row_sums[bad], tol)
            )
        return cls(y / row_sums[:, None])


class DesignMatrix:
    """Covariate matrix with column names and per-column lag eligibility.

    ``lag_eligible`` marks columns that receive a spatial lag under the
    Durbin family: everything except the intercept and dummy columns.
    When not given, the intercept (constant-one) and dummy (0/1-valued)
    columns are detected automatically.
    """

    def __init__(self, X, names=None, lag_eligible=None):
        X = np.array(X, dtype=float)
        if X.ndim != 2:
            raise ValueError("design matrix must be 2-dimensional")
        if not np.all(np.isfinite(X)):
            i, k = _first_nonfinite(X)
            raise ValueError("non-finite covariate at row %d, column %d" % (i, k))
        n, k = X.shape
        if names is None:
            names = ["x%d" % (i + 1) for i in range(k)]
        names = list(names)
        if len(names) != k:
            raise ValueError("got %d names for %d columns" % (len(names), k))
        if lag_eligible is None:
            lag_eligible = np.array(
                [not (_is_intercept(X[:, i]) or _is_dummy(X[:, i])) for i in range(k)]
            )
        else:
            lag_eligible = np.asarray(lag_eligible, dtype=bool)
            if lag_eligible.shape != (k,):
                raise ValueError("lag_eligible must have one flag per column")
        intercepts = [i for i in range(k) if _is_intercept(X[:, i])]
        if any(lag_eligible[i] for i in intercepts):
            raise ValueError("intercept column cannot be lag-eligible")
        X.setflags(write=False)
        lag_eligible.setflags(write=False)
        self.X = X
        self.names = names
        self.lag_eligible = lag_eligible
        self.n = n
        self.n_covariates = k

    @classmethod
    def with_intercept(cls, X, names=None):
        """Prepend a constant-one column named ``const``."""
        X = np.asarray(X, dtype=float)
        if names is None:
            names = ["x%d" % (i + 1) for i in range(X.shape[1])]
        return cls(
            np.column_stack([np.ones(X.shape[0]), X]), names=["const"] + list(names)
        )

    def zscored(self):
        """Return a copy with lag-eligible (non-dummy, non-intercept)
        columns standardized to zero mean and unit variance."""
        X = self.X.copy()
        for i in range(self.n_covariates):
            if self.lag_eligible[i]:
                col = X[:, i]
                sd = col.std()
                if sd == 0.0:
                    raise ValueError("cannot z-score constant column %r" % self.names[i])
                X[:, i] = (col - col.mean()) / sd
        return DesignMatrix(X, names=self.names, lag_eligible=self.lag_eligible)

    def lagged_columns(self):
        """Index array of the lag-eligible columns."""
        return np.flatnonzero(self.lag_eligible)


@dataclass(frozen=True)
class ModelSpec:
    """Model family, class count, priors, and identification restrictions.

    The reference class is always the last one (index ``n_classes - 1``)
    and carries beta = 0, theta = 0, rho = 0. The slope prior is Gaussian
    with mean ``prior_beta_mean`` (zeros when None) and covariance
    ``prior_beta_variance`` (scalar -> that value on the diagonal;
    default 1e8, rather uninformative). ``rho_prior_shape`` is the
    symmetric beta-type prior shape d with density proportional to
    [(1 + rho)(1 - rho)]^(d-1).
    """

    family: str
    n_classes: int
    prior_beta_mean: np.ndarray | None = None
    prior_beta_variance: np.ndarray | float = DEFAULT_PRIOR_VARIANCE
    rho_prior_shape: float = 1.01

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError("unknown family %r; expected one of %s" % (self.family, (FAMILIES,)))
        if self.n_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.family == BIVARIATE_SAR_LOGIT and self.n_classes != 2:
            raise ValueError("bivariate family requires exactly 2 classes")
        if self.rho_prior_shape < 1.0:
            raise ValueError("rho prior shape must be >= 1")

    @property
    def is_spatial(self):
        return self.family in SPATIAL_FAMILIES

    @property
    def has_durbin_terms(self):
        return self.family == SDM_MNL

    @property
    def reference_class(self):
        return self.n_classes - 1

    def coefficient_length(self, design: DesignMatrix):
        """Length of the stacked per-class coefficient vector: K slopes
        plus, under the Durbin family, one lag coefficient per
        lag-eligible column."""
        k = design.n_covariates
        if self.has_durbin_terms:
            k += len(design.lagged_columns())
        return k

    def prior_moments(self, n_coef):
        """Prior mean vector and covariance matrix at the stacked
        coefficient length, broadcasting scalar variances."""
        mean = self.prior_beta_mean
        if mean is None:
            mean = np.zeros(n_coef)
        else:
            mean = np.asarray(mean, dtype=float)
            if mean.shape != (n_coef,):
                raise ValueError(
                    "prior mean has length %d, expected %d" % (mean.size, n_coef)
                )
        var = self.prior_beta_variance
        if np.isscalar(var):
            cov = np.eye(n_coef) * float(var)
        else:
            cov = np.asarray(var, dtype=float)
            if cov.shape != (n_coef, n_coef):
                raise ValueError(
                    "prior variance has shape %s, expected (%d, %d)"
                    % (cov.shape, n_coef, n_coef)
                )
        return mean, cov


@dataclass
class ParameterState:
    """Per-class parameter values for the J - 1 non-reference classes.

    ``beta`` is (J-1, K), ``theta`` is (J-1, K_lag) (zero columns when
    the family has no Durbin terms), ``rho`` is (J-1,) with every entry
    inside (-1, 1), and ``omega`` is (J-1, N) with strictly positive
    entries. The reference class is implicit (all zeros).
    """

    beta: np.ndarray
    theta: np.ndarray
    rho: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        self.beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.ndim == 1:
            self.theta = self.theta.reshape(self.beta.shape[0], -1)
        self.rho = np.asarray(self.rho, dtype=float)
        self.omega = np.atleast_2d(np.asarray(self.omega, dtype=float))
        if np.any(np.abs(self.rho) >= 1.0):
            raise ValueError("every rho must lie strictly inside (-1, 1)")
        if np.any(self.omega <= 0.0):
            raise ValueError("every omega must be strictly positive")

    @classmethod
    def zeros(cls, spec: ModelSpec, design: DesignMatrix, n_regions=None):
        """Symmetric starting point: beta = 0, theta = 0, rho = 0 and
        omega at the zero-tilt mean 1/4."""
        m = spec.n_classes - 1
        n = design.n if n_regions is None else n_regions
        n_lag = len(design.lagged_columns()) if spec.has_durbin_terms else 0
        return cls(
            beta=np.zeros((m, design.n_covariates)),
            theta=np.zeros((m, n_lag)),
            rho=np.zeros(m),
            omega=np.full((m, n), 0.25),
        )


def log_odds(spec: ModelSpec, state: ParameterState, design: DesignMatrix, W=None):
    """Latent log-odds matrix, one column per class; column J is zero.

    Per non-reference class j the column is

    * ``mnl``:        X beta_j
    * ``sar``:        (I - rho_j W)^(-1) X beta_j
    * ``sdm``:        (I - rho_j W)^(-1) (X beta_j + W X_lag theta_j)

    computed by dense linear solve rather than explicit inversion.

    Parameters
    ----------
    W : ndarray or None
        Row-stochastic spatial weight matrix; required for the spatial
        families, must be omitted for the non-spatial one.
    """
    W = _weight_array(spec, W, design.n)
    n = design.n
    mu = np.zeros((n, spec.n_classes))
    for j in range(spec.n_classes - 1):
        rhs = design.X @ state.beta[j]
        if spec.has_durbin_terms and state.theta.shape[1]:
            rhs = rhs + W @ (design.X[:, design.lagged_columns()] @ state.theta[j])
        if spec.is_spatial and state.rho[j] != 0.0:
            mu[:, j] = solve_spatial_filter(W, state.rho[j], rhs)
        else:
            mu[:, j] = rhs
    return mu


def solve_spatial_filter(W, rho, rhs):
    """Solve (I - rho W) x = rhs for one or more right-hand sides."""
    n = W.shape[0]
    a = np.eye(n) - rho * W
    try:
        return np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "singular spatial filter at rho=%.6f: %s" % (rho, exc)
        ) from exc


def class_probabilities(mu):
    """Row-wise softmax of the log-odds, with per-row max subtraction so
    arbitrarily large magnitudes cannot overflow. Rows sum to one."""
    mu = np.asarray(mu, dtype=float)
    shifted = mu - mu.max(axis=1, keepdims=True)
    p = np.exp(shifted)
    p /= p.sum(axis=1, keepdims=True)
    return p


def row_logsumexp(mu):
    """log(sum_j exp(mu_ij)) per row, stabilized by max subtraction."""
    m = mu.max(axis=1)
    return m + np.log(np.exp(mu - m[:, None]).sum(axis=1))


def multinomial_loglik(y, mu):
    """Share-weighted multinomial log-likelihood
    sum_i sum_j y_ij (mu_ij - log sum_j' exp(mu_ij'))."""
    if isinstance(y, ShareMatrix):
        y = y.y
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if y.shape != mu.shape:
        raise ValueError("shape mismatch: shares %s vs log-odds %s" % (y.shape, mu.shape))
    lse = row_logsumexp(mu)
    return float((y * (mu - lse[:, None])).sum())


def competing_logodds_offset(mu, j):
    """Per-region log-sum-exp of the log-odds over all classes except j.

    This is the offset that turns the class-j conditional into a binary
    logit in eta_ij = mu_ij - offset_ij.
    """
    mu = np.asarray(mu, dtype=float)
    if mu.shape[1] < 2:
        raise ValueError("need at least 2 classes")
    others = np.delete(mu, j, axis=1)
    return row_logsumexp(others)


def _weight_array(spec, W, n):
    if spec.is_spatial:
        if W is None:
            raise ValueError("family %r requires a spatial weight matrix" % spec.family)
        W = W.W if hasattr(W, "W") else np.asarray(W, dtype=float)
        if W.shape != (n, n):
            raise ValueError("weight matrix shape %s does not match N=%d" % (W.shape, n))
        return W
    if W is not None:
        raise ValueError("non-spatial family does not take a weight matrix")
    return None


def _is_intercept(col):
    return bool(np.all(col == 1.0))


def _is_dummy(col):
    return bool(np.all((col == 0.0) | (col == 1.0)))


def _first_nonfinite(arr):
    idx = np.argwhere(~np.isfinite(arr))
    return int(idx[0][0]), int(idx[0][1])
