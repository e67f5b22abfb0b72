"""Monte Carlo benchmark harness: DGP, scenario grid, RMSE tables.

The data-generating process draws, anew for every run: standard-normal
planar coordinates feeding a 7-nearest-neighbour row-stochastic weight
matrix, a standard-normal N x 2 covariate matrix, and per-class slope
pairs centred at (1, 0.5) / (0.5, 1) with additive bivariate normal
noise (unit variances, -0.25 covariance between the two covariates).
Class shares are the row-wise softmax of the spatially filtered
log-odds (I - rho W)^(-1) X beta_j with the reference class pinned at
zero, so the dependent variable is a share vector, not sampled
categories.

Each run fits a chosen set of competitors (the spatial multinomial
logit, its non-spatial counterpart with every rho fixed at zero, and a
stack of per-class two-class SAR logits) and scores posterior-mean
point estimates of rho and of the average direct / indirect effects
against the run's own DGP values, where the "true" effects plug the
known parameters into the same summary formulas. Cell values are RMSEs
per element across runs, averaged over the J - 1 non-reference classes
(and both covariates for the effects).

Runs are independent with counter-derived seeds, execute in a process
pool, and reduce in run order, so results are reproducible from the
master seed alone regardless of scheduling.
"""

from __future__ import annotations

import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .diagnostics import rmse
from .effects import summary_effect_draws
from .model import (
    MNL,
    SAR_MNL,
    DesignMatrix,
    ModelSpec,
    ShareMatrix,
    class_probabilities,
    solve_spatial_filter,
)
from .sampler import SamplerConfig, run_chain, run_bivariate_sar_logit
from .weights import build_knn_weights

MODEL_SAR = "sar_mnl"
MODEL_MNL = "mnl"
MODEL_BIVARIATE = "bivariate"
ALL_MODELS = (MODEL_SAR, MODEL_MNL, MODEL_BIVARIATE)

#: slope centres, one column per non-reference class
_BETA_BASE = np.array([[1.0, 0.5], [0.5, 1.0]])
#: covariance of the per-class slope noise across the two covariates
_BETA_NOISE_COV = np.array([[1.0, -0.25], [-0.25, 1.0]])


@dataclass(frozen=True)
class DgpConfig:
    """One benchmark scenario: sample size and spatial-dependence
    strength. Class and covariate counts are fixed by the design."""

    n_regions: int = 400
    rho: float = 0.0
    k_neighbors: int = 7
    seed: int = 0
    n_classes: int = 3
    n_covariates: int = 2

    def __post_init__(self):
        if abs(self.rho) >= 1.0:
            raise ValueError("need |rho| < 1")
        if self.n_classes != 3:
            raise ValueError("the benchmark DGP is defined for exactly 3 classes")
        if self.n_covariates != 2:
            raise ValueError("the benchmark DGP is defined for exactly 2 covariates")
        if self.n_regions <= self.k_neighbors:
            raise ValueError("need more regions than neighbours")


def generate_dataset(config: DgpConfig):
    """Draw one benchmark dataset.

    Returns (shares, design, weights, truth) where truth maps
    "beta" -> (J-1, K) slopes, "rho" -> (J-1,) spatial coefficients,
    and "coords" -> the (N, 2) point pattern behind the weights.
    """
    rng = np.random.default_rng(config.seed)
    n = config.n_regions
    coords = rng.normal(size=(n, 2))
    weights = build_knn_weights(coords, config.k_neighbors)
    X = rng.normal(size=(n, config.n_covariates))
    m = config.n_classes - 1
    beta = np.empty((m, config.n_covariates))
    for j in range(m):
        beta[j] = _BETA_BASE[:, j] + rng.multivariate_normal(
            np.zeros(config.n_covariates), _BETA_NOISE_COV
        )
    mu = np.zeros((n, config.n_classes))
    for j in range(m):
        rhs = X @ beta[j]
        mu[:, j] = solve_spatial_filter(weights.W, config.rho, rhs) if config.rho else rhs
    shares = ShareMatrix(class_probabilities(mu))
    truth = {
        "beta": beta,
        "rho": np.full(m, float(config.rho)),
        "coords": coords,
    }
    return shares, DesignMatrix(X), weights, truth


def true_summary_effects(config: DgpConfig, design, weights, truth):
    """Direct/indirect effects implied by the DGP parameters, via the
    same summary formulas the estimators are scored with, evaluated at
    the generating process's population covariate means (zero for the
    standard-normal design, own and lagged). Estimators plug in
    realized sample means, so their evaluation-point noise counts as
    estimation error. Shapes (K, J-1): covariate by non-reference
    class."""
    spec = ModelSpec(family=SAR_MNL, n_classes=config.n_classes)
    zeros = np.zeros(design.n_covariates)
    draws = summary_effect_draws(
        spec,
        design,
        weights,
        truth["beta"][None, :, :],
        np.zeros((1, config.n_classes - 1, 0)),
        truth["rho"][None, :],
        x_means=zeros,
        xw_means=zeros,
    )
    m = config.n_classes - 1
    return draws["direct"][0][:, :m], draws["indirect"][0][:, :m]


@dataclass
class McResult:
    """RMSE cells per (scenario, model) plus run bookkeeping."""

    scenarios: list
    models: list
    cells: dict            # (scenario_idx, model) -> {"direct", "indirect", "rho"}
    n_runs: int
    failures: dict         # (scenario_idx, model) -> count
    wall_time: float
    records: list = field(default_factory=list)  # long-format per-run rows

    def cell(self, scenario_idx, model):
        return self.cells[(scenario_idx, model)]


def _fit_one_model(model, shares, design, weights, cfg: SamplerConfig, n_classes):
    """Posterior-mean rho and summary-effect estimates for one
    competitor on one dataset. Shapes: rho (J-1,), effects (K, J-1)."""
    m = n_classes - 1
    if model == MODEL_SAR:
        spec = ModelSpec(family=SAR_MNL, n_classes=n_classes)
        chain = run_chain(spec, shares, design, weights, cfg)
        eff = summary_effect_draws(spec, design, weights, chain.beta, chain.theta, chain.rho)
        rho_est = chain.rho.mean(axis=0)
        direct = eff["direct"].mean(axis=0)[:, :m]
        indirect = eff["indirect"].mean(axis=0)[:, :m]
    elif model == MODEL_MNL:
        spec = ModelSpec(family=MNL, n_classes=n_classes)
        chain = run_chain(spec, shares, design, None, cfg)
        eff = summary_effect_draws(spec, design, None, chain.beta, chain.theta, chain.rho)
        rho_est = np.zeros(m)
        direct = eff["direct"].mean(axis=0)[:, :m]
        indirect = eff["indirect"].mean(axis=0)[:, :m]
    elif model == MODEL_BIVARIATE:
        rho_est = np.empty(m)
        direct = np.empty((design.n_covariates, m))
        indirect = np.empty((design.n_covariates, m))
        y = shares.y if isinstance(shares, ShareMatrix) else shares
        for j in range(m):
            sub_cfg = replace(cfg, seed=cfg.seed + j + 1)
            chain = run_bivariate_sar_logit(y[:, j], design, weights, sub_cfg)
            spec2 = ModelSpec(family=SAR_MNL, n_classes=2)
            eff = summary_effect_draws(
                spec2, design, weights, chain.beta, chain.theta, chain.rho
            )
            rho_est[j] = chain.rho.mean()
            direct[:, j] = eff["direct"].mean(axis=0)[:, 0]
            indirect[:, j] = eff["indirect"].mean(axis=0)[:, 0]
    else:
        raise ValueError("unknown model %r" % model)
    return rho_est, direct, indirect


def _run_single(args):
    """One (scenario, run): generate a dataset, fit every model, return
    estimates and truths. Top-level so the process pool can pickle it."""
    s_idx, run_idx, dgp, models, cfg, master_seed = args
    data_seed = _derived_seed(master_seed, s_idx, run_idx, 0)
    dgp_run = replace(dgp, seed=data_seed)
    shares, design, weights, truth = generate_dataset(dgp_run)
    true_direct, true_indirect = true_summary_effects(dgp_run, design, weights, truth)
    out = {
        "scenario": s_idx,
        "run": run_idx,
        "true_rho": truth["rho"],
        "true_direct": true_direct,
        "true_indirect": true_indirect,
        "models": {},
        "errors": {},
    }
    for m_idx, model in enumerate(models):
        cfg_run = replace(cfg, seed=_derived_seed(master_seed, s_idx, run_idx, m_idx + 1))
        try:
            out["models"][model] = _fit_one_model(
                model, shares, design, weights, cfg_run, dgp.n_classes
            )
        except Exception as exc:  # recorded, run excluded for this model
            out["errors"][model] = "%s: %s" % (type(exc).__name__, exc)
    return out


def run_study(scenarios, models, n_runs, sampler_config=None, master_seed=0,
              n_jobs=None, progress=True):
    """Run the full scenario x model x run grid and aggregate RMSEs.

    Deterministic given ``master_seed``: every dataset and chain seed is
    derived from (master Seed, scenario, run, model) by counter, and
    reduction happens in run order whatever the pool scheduling did.
    """
    if n_runs < 1:
        raise ValueError("need at least one run")
    models = list(models)
    for model in models:
        if model not in ALL_MODELS:
            raise ValueError("unknown model %r; expected subset of %s" % (model, ALL_MODELS))
    scenarios = [s if isinstance(s, DgpConfig) else DgpConfig(**s) for s in scenarios]
    cfg = sampler_config or SamplerConfig()

    t0 = time.time()
    jobs = [
        (s_idx, run_idx, dgp, models, cfg, master_seed)
        for s_idx, dgp in enumerate(scenarios)
        for run_idx in range(n_runs)
    ]
    results = _map_jobs(jobs, n_jobs, progress)
    results.sort(key=lambda r: (r["scenario"], r["run"]))

    cells = {}
    failures = {}
    records = []
    for s_idx, dgp in enumerate(scenarios):
        runs = [r for r in results if r["scenario"] == s_idx]
        for model in models:
            ok = [r for r in runs if model in r["models"]]
            failures[(s_idx, model)] = len(runs) - len(ok)
            if not ok:
                cells[(s_idx, model)] = {
                    "direct": np.nan, "indirect": np.nan, "rho": np.nan,
                }
                continue
            rho_est = np.stack([r["models"][model][0] for r in ok])
            rho_tru = np.stack([r["true_rho"] for r in ok])
            dir_est = np.stack([r["models"][model][1] for r in ok])
            dir_tru = np.stack([r["true_direct"] for r in ok])
            ind_est = np.stack([r["models"][model][2] for r in ok])
            ind_tru = np.stack([r["true_indirect"] for r in ok])
            cells[(s_idx, model)] = {
                "direct": rmse(dir_est, dir_tru),
                "indirect": rmse(ind_est, ind_tru),
                "rho": rmse(rho_est, rho_tru),
            }
            for r in ok:
                records.extend(_run_records(s_idx, dgp, model, r))
    return McResult(
        scenarios=scenarios,
        models=models,
        cells=cells,
        n_runs=n_runs,
        failures=failures,
        wall_time=time.time() - t0,
        records=records,
    )


def format_table(result: McResult):
    """RMSE grid shaped like the benchmark table: one row per
    (N, model), three value columns per scenario, and a companion flag
    column marking each scenario-metric column's minimum (ties all
    flagged)."""
    import pandas as pd

    if not result.cells:
        raise ValueError("empty result")
    rows = []
    sizes = sorted({s.n_regions for s in result.scenarios})
    for n_regions in sizes:
        s_here = [
            (i, s) for i, s in enumerate(result.scenarios) if s.n_regions == n_regions
        ]
        for model in result.models:
            row = {"n_regions": n_regions, "model": model}
            for s_idx, dgp in s_here:
                cell = result.cells[(s_idx, model)]
                tag = "rho_%g" % dgp.rho
                for metric in ("direct", "indirect", "rho"):
                    row["%s_%s" % (metric, tag)] = cell[metric]
            rows.append(row)
    frame = pd.DataFrame(rows)
    value_cols = [c for c in frame.columns if c not in ("n_regions", "model")]
    for col in value_cols:
        best = frame.groupby("n_regions")[col].transform("min")
        frame[col + "_best"] = np.isclose(frame[col], best) & frame[col].notna()
    return frame


def runs_frame(result: McResult):
    """Long-format per-run records for the runs.csv artifact."""
    import pandas as pd

    return pd.DataFrame(result.records)


def run_calibration(dgp: DgpConfig, n_runs, sampler_config=None, master_seed=0,
                    n_jobs=None, interval=0.90, progress=True):
    """Credible-interval coverage of the slope coefficients under
    repeated sampling from the DGP: fraction of equal-tailed intervals
    (at ``interval`` mass) containing the generating value, pooled over
    runs, classes, and covariates."""
    cfg = sampler_config or SamplerConfig()
    lo_q, hi_q = (1.0 - interval) / 2.0, 1.0 - (1.0 - interval) / 2.0
    results = _map_jobs(
        [
            (0, run_idx, dgp, None, cfg, master_seed)
            for run_idx in range(n_runs)
        ],
        n_jobs,
        progress,
        worker=_calibration_single,
    )
    results.sort(key=lambda r: r["run"])
    hits = []
    for r in results:
        lo = np.quantile(r["beta_draws"], lo_q, axis=0)
        hi = np.quantile(r["beta_draws"], hi_q, axis=0)
        hits.append(((lo <= r["true_beta"]) & (r["true_beta"] <= hi)).ravel())
    hits = np.concatenate(hits)
    return {"coverage": float(hits.mean()), "n_intervals": int(hits.size)}


def _calibration_single(args):
    s_idx, run_idx, dgp, _models, cfg, master_seed = args
    data_seed = _derived_seed(master_seed, s_idx, run_idx, 0)
    dgp_run = replace(dgp, seed=data_seed)
    shares, design, weights, truth = generate_dataset(dgp_run)
    cfg_run = replace(cfg, seed=_derived_seed(master_seed, s_idx, run_idx, 1))
    spec = ModelSpec(family=SAR_MNL, n_classes=dgp.n_classes)
    chain = run_chain(spec, shares, design, weights, cfg_run)
    return {"run": run_idx, "beta_draws": chain.beta, "true_beta": truth["beta"]}


def _run_records(s_idx, dgp, model, r):
    rho_est, direct, indirect = r["models"][model]
    rows = []
    base = {
        "scenario": s_idx,
        "rho_true": dgp.rho,
        "n_regions": dgp.n_regions,
        "run": r["run"],
        "model": model,
    }
    m = rho_est.size
    for j in range(m):
        rows.append(
            dict(base, metric="rho", klass=j + 1, covariate="",
                 estimate=rho_est[j], truth=r["true_rho"][j])
        )
        for k in range(direct.shape[0]):
            rows.append(
                dict(base, metric="direct", klass=j + 1, covariate="x%d" % (k + 1),
                     estimate=direct[k, j], truth=r["true_direct"][k, j])
            )
            rows.append(
                dict(base, metric="indirect", klass=j + 1, covariate="x%d" % (k + 1),
                     estimate=indirect[k, j], truth=r["true_indirect"][k, j])
            )
    return rows


def _derived_seed(master_seed, *key):
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] % (2**63))


def _map_jobs(jobs, n_jobs, progress, worker=_run_single):
    import os

    if n_jobs is None:
        n_jobs = min(os.cpu_count() or 1, len(jobs))
    results = []
    if n_jobs <= 1 or len(jobs) == 1:
        for i, job in enumerate(jobs):
            results.append(worker(job))
            _tick(progress, i + 1, len(jobs))
        return results
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        for i, res in enumerate(pool.map(worker, jobs)):
            results.append(res)
            _tick(progress, i + 1, len(jobs))
    return results


def _tick(progress, done, total):
    if progress:
        print("\r[montecarlo] %d/%d runs" % (done, total), end="", file=sys.stderr)
        if done == total:
            print(file=sys.stderr)
