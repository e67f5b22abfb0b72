"""Gibbs / Metropolis-Hastings engine for the spatial multinomial logit.

One sweep cycles, for each non-reference class j:

I.   draw the Polya-Gamma mixing variables omega_ij ~ PG(1, eta_ij)
     with eta_ij = mu_ij - C_ij, where C_ij is the log-sum-exp of the
     competing classes' log-odds;
II.  draw the slope block (beta_j, and theta_j under the Durbin family)
     from its Gaussian conditional, built on the filtered design
     Z_j = (I - rho_j W)^(-1) [X | W X_lag] with precision
     Z_j' diag(omega_j) Z_j + prior precision and mean
     solve(precision, Z_j'(kappa_j + omega_j * C_j) + prior term),
     kappa_ij = y_ij - 1/2;
III. update rho_j by an adaptive random-walk Metropolis step whose
     target is the full multinomial log-likelihood (all classes enter
     through the shared denominator) plus the symmetric beta-type
     prior. Proposals outside (-1, 1) are rejected outright. The
     proposal scale adapts toward a target acceptance rate during
     burn-in only and is frozen afterwards.

Chains start from beta = 0, rho = 0. All randomness flows from a single
numpy Generator, so a fixed seed reproduces the chain bit for bit.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.special import betaln

from .model import (
    BIVARIATE_SAR_LOGIT,
    ModelSpec,
    ParameterState,
    ShareMatrix,
    competing_logodds_offset,
    log_odds,
    multinomial_loglik,
    solve_spatial_filter,
)
from .polya_gamma import PolyaGammaSampler


@dataclass(frozen=True)
class SamplerConfig:
    """Chain length, seed, and rho-proposal tuning knobs."""

    n_draws: int = 1000
    n_burnin: int = 700
    seed: int = 0
    rho_proposal_sd: float = 0.2
    adapt_interval: int = 25
    target_acceptance: float = 0.234
    use_logdet_term: bool = False

    def __post_init__(self):
        if not 0 <= self.n_burnin < self.n_draws:
            raise ValueError(
                "need 0 <= burn-in < draws, got %d / %d" % (self.n_burnin, self.n_draws)
            )
        if not 0.0 < self.target_acceptance < 1.0:
            raise ValueError("target acceptance must lie in (0, 1)")
        if self.rho_proposal_sd <= 0.0 or self.adapt_interval < 1:
            raise ValueError("proposal sd must be positive, adapt interval >= 1")


@dataclass
class ChainOutput:
    """Post-burn-in draws plus per-class rho acceptance bookkeeping.

    ``beta`` is (R, J-1, K), ``theta`` (R, J-1, K_lag), ``rho``
    (R, J-1) and ``loglik`` (R,) with R = n_draws - n_burnin retained
    sweeps.
    """

    family: str
    beta: np.ndarray
    theta: np.ndarray
    rho: np.ndarray
    loglik: np.ndarray
    acceptance_rates: np.ndarray
    proposal_sd: np.ndarray
    coef_names: list = field(default_factory=list)
    lag_names: list = field(default_factory=list)
    config: SamplerConfig | None = None

    @property
    def n_retained(self):
        return self.beta.shape[0]

    @property
    def n_classes(self):
        return self.beta.shape[1] + 1

    def posterior_means(self):
        return {
            "beta": self.beta.mean(axis=0),
            "theta": self.theta.mean(axis=0),
            "rho": self.rho.mean(axis=0),
        }

    def save(self, out_dir):
        """Persist one CSV per parameter block plus a run manifest."""
        import pandas as pd

        os.makedirs(out_dir, exist_ok=True)
        m = self.beta.shape[1]
        for j in range(m):
            pd.DataFrame(self.beta[:, j, :], columns=self.coef_names).to_csv(
                os.path.join(out_dir, "chain_beta_%d.csv" % (j + 1)),
                index=False,
                float_format="%.17g",
            )
            if self.theta.shape[2]:
                pd.DataFrame(self.theta[:, j, :], columns=self.lag_names).to_csv(
                    os.path.join(out_dir, "chain_theta_%d.csv" % (j + 1)),
                    index=False,
                    float_format="%.17g",
                )
        pd.DataFrame(
            self.rho, columns=["rho_%d" % (j + 1) for j in range(m)]
        ).to_csv(os.path.join(out_dir, "chain_rho.csv"), index=False, float_format="%.17g")
        pd.DataFrame({"loglik": self.loglik}).to_csv(
            os.path.join(out_dir, "chain_loglik.csv"), index=False, float_format="%.17g"
        )
        meta = {
            "family": self.family,
            "n_classes": self.n_classes,
            "coef_names": list(self.coef_names),
            "lag_names": list(self.lag_names),
            "acceptance_rates": [float(a) for a in self.acceptance_rates],
            "proposal_sd": [float(s) for s in self.proposal_sd],
        }
        if self.config is not None:
            meta["config"] = {
                "n_draws": self.config.n_draws,
                "n_burnin": self.config.n_burnin,
                "seed": self.config.seed,
                "rho_proposal_sd": self.config.rho_proposal_sd,
                "adapt_interval": self.config.adapt_interval,
                "target_acceptance": self.config.target_acceptance,
                "use_logdet_term": self.config.use_logdet_term,
            }
        with open(os.path.join(out_dir, "run_meta.json"), "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, out_dir):
        import pandas as pd

        with open(os.path.join(out_dir, "run_meta.json")) as fh:
            meta = json.load(fh)
        m = meta["n_classes"] - 1
        beta = np.stack(
            [
                pd.read_csv(
                    os.path.join(out_dir, "chain_beta_%d.csv" % (j + 1)),
                    float_precision="round_trip",
                ).to_numpy()
                for j in range(m)
            ],
            axis=1,
        )
        theta_path = os.path.join(out_dir, "chain_theta_1.csv")
        if os.path.exists(theta_path):
            theta = np.stack(
                [
                    pd.read_csv(
                        os.path.join(out_dir, "chain_theta_%d.csv" % (j + 1)),
                        float_precision="round_trip",
                    ).to_numpy()
                    for j in range(m)
                ],
                axis=1,
            )
        else:
            theta = np.zeros((beta.shape[0], m, 0))
        rho = pd.read_csv(
            os.path.join(out_dir, "chain_rho.csv"), float_precision="round_trip"
        ).to_numpy()
        loglik = pd.read_csv(
            os.path.join(out_dir, "chain_loglik.csv"), float_precision="round_trip"
        )["loglik"].to_numpy()
        cfg = None
        if "config" in meta:
            cfg = SamplerConfig(**meta["config"])
        return cls(
            family=meta["family"],
            beta=beta,
            theta=theta,
            rho=rho,
            loglik=loglik,
            acceptance_rates=np.asarray(meta["acceptance_rates"], dtype=float),
            proposal_sd=np.asarray(meta["proposal_sd"], dtype=float),
            coef_names=meta["coef_names"],
            lag_names=meta["lag_names"],
            config=cfg,
        )


def stacked_design(spec: ModelSpec, design, W):
    """[X | W X_lag] under the Durbin family, plain X otherwise."""
    if spec.has_durbin_terms:
        lag_cols = design.lagged_columns()
        if lag_cols.size:
            return np.column_stack([design.X, W @ design.X[:, lag_cols]])
    return np.asarray(design.X)


def filtered_design(spec: ModelSpec, design, W, rho_j):
    """Z_j = (I - rho_j W)^(-1) [X | W X_lag] for one class."""
    base = stacked_design(spec, design, W)
    if spec.is_spatial and rho_j != 0.0:
        return solve_spatial_filter(W, rho_j, base)
    return base


def rho_logprior(rho, shape):
    """Log density of the symmetric beta-type prior on (-1, 1),
    proportional to [(1 + rho)(1 - rho)]^(shape - 1)."""
    if abs(rho) >= 1.0:
        return -np.inf
    return (
        (shape - 1.0) * (math.log1p(rho) + math.log1p(-rho))
        - (2.0 * shape - 1.0) * math.log(2.0)
        - betaln(shape, shape)
    )


def update_omega(spec: ModelSpec, state: ParameterState, mu, pg: PolyaGammaSampler):
    """Step I: fresh PG(1, eta_ij) draws for every non-reference class.

    Returns the new (J-1, N) omega array; the reference class stays
    implicit at zero.
    """
    m = spec.n_classes - 1
    omega = np.empty((m, mu.shape[0]))
    for j in range(m):
        eta = mu[:, j] - competing_logodds_offset(mu, j)
        if not np.all(np.isfinite(eta)):
            i = int(np.flatnonzero(~np.isfinite(eta))[0])
            raise ValueError(
                "non-finite Polya-Gamma tilt at region %d, class %d" % (i, j + 1)
            )
        omega[j] = pg.draw_pg1_vector(eta)
    return omega


def update_beta(
    spec: ModelSpec,
    state: ParameterState,
    j,
    y,
    design,
    W,
    rng,
    mu=None,
    design_j=None,
    prior=None,
):
    """Step II: draw the class-j slope block from its Gaussian
    conditional.

    Returns ``(coef, mu_j)`` where ``coef`` stacks beta_j (and theta_j
    under the Durbin family) and ``mu_j`` is the refreshed log-odds
    column implied by the draw.
    """
    y = y.y if isinstance(y, ShareMatrix) else np.asarray(y, dtype=float)
    if mu is None:
        mu = log_odds(spec, state, design, W if spec.is_spatial else None)
    if design_j is None:
        design_j = filtered_design(spec, design, W, state.rho[j])
    n_coef = design_j.shape[1]
    if prior is None:
        prior = _prior_terms(spec, n_coef)
    prior_prec, prior_prec_mean = prior

    omega_j = state.omega[j]
    offset = competing_logodds_offset(mu, j)
    kappa = y[:, j] - 0.5
    post_prec = design_j.T @ (omega_j[:, None] * design_j) + prior_prec
    # the competing-class offset enters eta_ij = mu_ij - C_ij with a
    # minus sign, so it flips to a plus in the Gaussian linear term
    rhs = design_j.T @ (kappa + omega_j * offset) + prior_prec_mean
    try:
        chol = cho_factor(post_prec, lower=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "slope posterior precision not positive definite for class %d: %s"
            % (j + 1, exc)
        ) from exc
    mean = cho_solve(chol, rhs)
    coef = mean + solve_triangular(
        chol[0], rng.standard_normal(n_coef), lower=True, trans="T"
    )
    return coef, design_j @ coef


@dataclass
class RhoUpdate:
    rho: float
    accepted: bool
    mu_j: np.ndarray
    log_accept_ratio: float


def rho_log_target(spec: ModelSpec, y, rho_j, mu, logdet=None):
    """Log of the rho_j conditional target at a state whose log-odds
    matrix ``mu`` is consistent with rho_j: multinomial log-likelihood
    plus the beta-type log prior, plus the optional log-determinant
    term when that experimental variant is switched on."""
    val = multinomial_loglik(y, mu) + rho_logprior(rho_j, spec.rho_prior_shape)
    if logdet is not None:
        val += logdet
    return val


def update_rho(
    spec: ModelSpec,
    state: ParameterState,
    j,
    y,
    design,
    W,
    rng,
    proposal_sd,
    mu=None,
    logdet_grid=None,
    use_logdet=False,
):
    """Step III: one random-walk Metropolis-Hastings move on rho_j.

    The acceptance ratio recomputes the class-j log-odds at the
    proposal (every class's probabilities shift through the shared
    softmax denominator) and compares full multinomial log-likelihoods
    plus prior. Non-spatial families are a no-op with rho pinned at 0.
    """
    if not spec.is_spatial:
        return RhoUpdate(0.0, False, None, -np.inf)
    y = y.y if isinstance(y, ShareMatrix) else np.asarray(y, dtype=float)
    if mu is None:
        mu = log_odds(spec, state, design, W)
    rho_cur = float(state.rho[j])
    rho_star = rho_cur + proposal_sd * rng.standard_normal()
    if abs(rho_star) >= 1.0:
        return RhoUpdate(rho_cur, False, mu[:, j].copy(), -np.inf)

    base = stacked_design(spec, design, W)
    coef = _stacked_coef(spec, state, j)
    mu_star_j = solve_spatial_filter(W, rho_star, base @ coef)
    mu_star = mu.copy()
    mu_star[:, j] = mu_star_j

    ld_cur = ld_star = None
    if use_logdet:
        ld_cur = _logdet_value(W, rho_cur, logdet_grid)
        ld_star = _logdet_value(W, rho_star, logdet_grid)
    log_ratio = rho_log_target(spec, y, rho_star, mu_star, ld_star) - rho_log_target(
        spec, y, rho_cur, mu, ld_cur
    )
    if math.log(rng.random()) < log_ratio:
        return RhoUpdate(float(rho_star), True, mu_star_j, log_ratio)
    return RhoUpdate(rho_cur, False, mu[:, j].copy(), log_ratio)


def run_chain(spec: ModelSpec, y, design, W, config: SamplerConfig, logdet_grid=None):
    """Run the full sampler and keep the post-burn-in draws.

    Parameters
    ----------
    y : ShareMatrix or (N, J) array
    design : DesignMatrix
    W : SpatialWeights, (N, N) array, or None for the non-spatial family
    logdet_grid : LogDetGrid, optional
        Only consulted when ``config.use_logdet_term`` is set.
    """
    y_arr = y.y if isinstance(y, ShareMatrix) else ShareMatrix(y).y
    if y_arr.shape[1] != spec.n_classes:
        raise ValueError(
            "share matrix has %d classes, spec says %d" % (y_arr.shape[1], spec.n_classes)
        )
    if y_arr.shape[0] != design.n:
        raise ValueError(
            "share matrix has %d rows, design has %d" % (y_arr.shape[0], design.n)
        )
    W_arr = None
    if spec.is_spatial:
        W_arr = W.W if hasattr(W, "W") else np.asarray(W, dtype=float)
        if W_arr.shape != (design.n, design.n):
            raise ValueError("weight matrix does not match N=%d" % design.n)
    elif W is not None:
        raise ValueError("non-spatial family does not take a weight matrix")

    rng = np.random.default_rng(config.seed)
    pg = PolyaGammaSampler(rng)
    state = ParameterState.zeros(spec, design)
    m = spec.n_classes - 1
    n_lag = state.theta.shape[1]

    mu = log_odds(spec, state, design, W_arr)
    base = stacked_design(spec, design, W_arr)
    n_coef = base.shape[1]
    prior = _prior_terms(spec, n_coef)
    design_cache = {j: base for j in range(m)}

    n_keep = config.n_draws - config.n_burnin
    out_beta = np.empty((n_keep, m, design.n_covariates))
    out_theta = np.empty((n_keep, m, n_lag))
    out_rho = np.empty((n_keep, m))
    out_loglik = np.empty(n_keep)
    sd = np.full(m, config.rho_proposal_sd)
    accept_window = np.zeros(m, dtype=int)
    accept_post = np.zeros(m, dtype=int)

    for it in range(config.n_draws):
        try:
            state.omega = update_omega(spec, state, mu, pg)
            for j in range(m):
                if j not in design_cache:
                    design_cache[j] = filtered_design(spec, design, W_arr, state.rho[j])
                coef, mu_j = update_beta(
                    spec, state, j, y_arr, design, W_arr, rng,
                    mu=mu, design_j=design_cache[j], prior=prior,
                )
                state.beta[j] = coef[: design.n_covariates]
                if n_lag:
                    state.theta[j] = coef[design.n_covariates :]
                mu[:, j] = mu_j
            if spec.is_spatial:
                for j in range(m):
                    res = update_rho(
                        spec, state, j, y_arr, design, W_arr, rng, sd[j],
                        mu=mu, logdet_grid=logdet_grid,
                        use_logdet=config.use_logdet_term,
                    )
                    if res.accepted:
                        state.rho[j] = res.rho
                        mu[:, j] = res.mu_j
                        design_cache.pop(j, None)
                        accept_window[j] += 1
                        if it >= config.n_burnin:
                            accept_post[j] += 1
                if it < config.n_burnin and (it + 1) % config.adapt_interval == 0:
                    rates = accept_window / config.adapt_interval
                    sd *= np.where(rates > config.target_acceptance, 1.1, 1.0 / 1.1)
                    accept_window[:] = 0
        except Exception as exc:
            raise RuntimeError("sampler failed at iteration %d: %s" % (it, exc)) from exc

        if it >= config.n_burnin:
            k = it - config.n_burnin
            out_beta[k] = state.beta
            out_theta[k] = state.theta
            out_rho[k] = state.rho
            out_loglik[k] = multinomial_loglik(y_arr, mu)

    lag_names = []
    if spec.has_durbin_terms:
        lag_names = ["W_%s" % design.names[i] for i in design.lagged_columns()]
    return ChainOutput(
        family=spec.family,
        beta=out_beta,
        theta=out_theta,
        rho=out_rho,
        loglik=out_loglik,
        acceptance_rates=accept_post / max(n_keep, 1),
        proposal_sd=sd,
        coef_names=list(design.names),
        lag_names=lag_names,
        config=config,
    )


def run_bivariate_sar_logit(y_binary, design, W, config: SamplerConfig, **spec_kwargs):
    """Benchmark competitor: a two-class SAR logit on one share vector.

    ``y_binary`` holds per-region shares in [0, 1]; the complement
    1 - y fills the reference column. Identical to ``run_chain`` on the
    corresponding two-column share matrix.
    """
    y_binary = np.asarray(y_binary, dtype=float).ravel()
    if y_binary.min() < 0.0 or y_binary.max() > 1.0:
        raise ValueError("binary shares must lie in [0, 1]")
    spec = ModelSpec(family=BIVARIATE_SAR_LOGIT, n_classes=2, **spec_kwargs)
    shares = ShareMatrix(np.column_stack([y_binary, 1.0 - y_binary]))
    return run_chain(spec, shares, design, W, config)


def _stacked_coef(spec, state, j):
    if spec.has_durbin_terms and state.theta.shape[1]:
        return np.concatenate([state.beta[j], state.theta[j]])
    return state.beta[j]


def _prior_terms(spec, n_coef):
    mean, cov = spec.prior_moments(n_coef)
    prec = np.linalg.inv(cov)
    return prec, prec @ mean


def _logdet_value(W, rho, grid):
    if grid is not None:
        return float(grid(rho))
    sign, val = np.linalg.slogdet(np.eye(W.shape[0]) - rho * W)
    if sign <= 0:
        raise np.linalg.LinAlgError("I - rho W not positive at rho=%.6f" % rho)
    return float(val)
