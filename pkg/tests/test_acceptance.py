"""Acceptance suite: one test (or parametrized group) per criterion,
each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s``. Criteria 3 and 6
run the desk-scale benchmark (100 runs x 2 scenarios x 3 models at
N = 400, plus 50 calibration replications) and take tens of minutes;
everything else finishes in about a minute.
"""

import time
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner
from scipy.stats import ks_2samp

from conftest import make_sar_dataset
from oracles import finite_difference_effects, gamma_sum_pg_draws
from spmnl.cli import main as cli_main
from spmnl.effects import effect_matrix, summarize_effects, summary_effect_draws
from spmnl.model import MNL, SAR_MNL, SDM_MNL, DesignMatrix, ModelSpec, class_probabilities
from spmnl.montecarlo import DgpConfig, run_calibration, run_study
from spmnl.polya_gamma import PolyaGammaSampler, pg_mean
from spmnl.sampler import SamplerConfig
from spmnl.weights import build_knn_weights

PAPER_SETTINGS = SamplerConfig(n_draws=1000, n_burnin=700, seed=0)
DESK_RUNS = 100
DESK_N = 400


def report(criterion, ok, detail):
    print("[acceptance %s] %s  %s" % (criterion, "PASS" if ok else "FAIL", detail))
    assert ok, "criterion %s: %s" % (criterion, detail)


# -------------------------------------------------------------------------
# 1. Polya-Gamma sampler moments and distribution
# -------------------------------------------------------------------------


def test_criterion_1_pg_moments_and_ks():
    t0 = time.time()
    problems = []
    sampler = PolyaGammaSampler(20240501)
    for c in (0.0, 0.1, 1.0, 2.0, 4.0, 10.0):
        draws = sampler.draw_pg1_vector(np.full(1_000_000, c))
        se = draws.std() / 1000.0
        err = abs(draws.mean() - pg_mean(c))
        if err >= 3 * se:
            problems.append("mean at c=%g off by %.2e (3se=%.2e)" % (c, err, 3 * se))
    for i, c in enumerate((0.0, 1.0, 4.0)):
        draws = PolyaGammaSampler(777 + i).draw_pg1_vector(np.full(100_000, c))
        oracle = gamma_sum_pg_draws(c, 600_000, seed=9090 + i)
        stat = ks_2samp(draws, oracle).statistic
        if stat >= 0.005:
            problems.append("KS at c=%g is %.4f" % (c, stat))
    elapsed = time.time() - t0
    if elapsed >= 60.0:
        problems.append("runtime %.1fs exceeds the 1-minute budget" % elapsed)
    report(1, not problems, "; ".join(problems) or "moments + KS ok in %.1fs" % elapsed)


# -------------------------------------------------------------------------
# 2. analytically forced benchmark cells for the non-spatial estimator
# -------------------------------------------------------------------------


@pytest.mark.parametrize("rho_true,expected", [(0.0, 0.0), (0.5, 0.4), (0.8, 0.8)])
def test_criterion_2_forced_nonspatial_cells(rho_true, expected):
    # exactness is independent of run count and scale: the non-spatial
    # estimator pins every rho at zero, so its rho-RMSE equals the
    # generating magnitude
    res = run_study(
        [DgpConfig(n_regions=60, rho=rho_true, k_neighbors=5)],
        ["mnl"],
        n_runs=2,
        sampler_config=SamplerConfig(n_draws=40, n_burnin=20, seed=0),
        master_seed=7,
        n_jobs=1,
        progress=False,
    )
    got = res.cell(0, "mnl")["rho"]
    if rho_true == 0.0:
        indirect = res.cell(0, "mnl")["indirect"]
        report("2 (rho=0, indirect)", indirect == 0.0, "indirect RMSE %.17g" % indirect)
    detail = "rho-RMSE %.17g, spec expects %.3f (generating magnitude %.1f)" % (
        got, expected, rho_true,
    )
    report("2 (rho=%g)" % rho_true, got == pytest.approx(expected, abs=1e-12), detail)


# -------------------------------------------------------------------------
# 3. desk-scale benchmark reproduction
# -------------------------------------------------------------------------


@pytest.fixture(scope="module")
def desk_study():
    return run_study(
        [
            DgpConfig(n_regions=DESK_N, rho=0.5),
            DgpConfig(n_regions=DESK_N, rho=0.8),
        ],
        ["sar_mnl", "mnl", "bivariate"],
        n_runs=DESK_RUNS,
        sampler_config=PAPER_SETTINGS,
        master_seed=20240401,
        n_jobs=2,
    )


def test_criterion_3a_sar_rho_rmse_at_high_dependence(desk_study):
    val = desk_study.cell(1, "sar_mnl")["rho"]
    report("3a", 0.02 <= val <= 0.12, "SAR rho-RMSE at rho=0.8: %.4f (window [0.02, 0.12], paper 0.054)" % val)


def test_criterion_3b_sar_direct_rmse_at_moderate_dependence(desk_study):
    val = desk_study.cell(0, "sar_mnl")["direct"]
    report("3b", 0.010 <= val <= 0.030, "SAR direct-RMSE at rho=0.5: %.4f (window [0.010, 0.030], paper 0.018)" % val)


def test_criterion_3c_ranking_invariants(desk_study):
    problems = []
    for s_idx, rho in ((0, 0.5), (1, 0.8)):
        sar = desk_study.cell(s_idx, "sar_mnl")
        mnl = desk_study.cell(s_idx, "mnl")
        biv = desk_study.cell(s_idx, "bivariate")
        if not (sar["indirect"] < mnl["indirect"] and sar["indirect"] < biv["indirect"]):
            problems.append(
                "indirect ranking at rho=%g: sar %.3f vs mnl %.3f, biv %.3f"
                % (rho, sar["indirect"], mnl["indirect"], biv["indirect"])
            )
        if not (sar["rho"] < mnl["rho"] and sar["rho"] < biv["rho"]):
            problems.append(
                "rho ranking at rho=%g: sar %.3f vs mnl %.3f, biv %.3f"
                % (rho, sar["rho"], mnl["rho"], biv["rho"])
            )
    biv8 = desk_study.cell(1, "bivariate")["rho"]
    mnl8 = desk_study.cell(1, "mnl")["rho"]
    if not biv8 < mnl8:
        problems.append("bivariate rho-RMSE %.3f not below mnl %.3f at rho=0.8" % (biv8, mnl8))
    failures = {k: v for k, v in desk_study.failures.items() if v}
    if failures:
        problems.append("run failures: %s" % failures)
    report("3c", not problems, "; ".join(problems) or "all rankings hold")


# -------------------------------------------------------------------------
# 4. marginal-effects gradient check
# -------------------------------------------------------------------------


def test_criterion_4_gradient_check():
    worst = 0.0
    gen = np.random.default_rng(1234)
    for trial in range(50):
        spatial = trial % 2 == 0
        n = int(gen.integers(4, 11))
        k = int(gen.integers(1, 4))
        durbin = spatial and trial % 4 == 0
        W = build_knn_weights(gen.normal(size=(n, 2)), min(3, n - 1)).W if spatial else None
        beta = gen.normal(size=(2, k))
        theta = gen.normal(size=(2, k)) if durbin else np.zeros((2, 0))
        rho = gen.uniform(-0.7, 0.7, size=2) if spatial else np.zeros(2)
        X = gen.normal(size=(n, k))
        kk = int(gen.integers(0, k))
        x_mean = X[:, kk].mean()
        xw_mean = (W @ X[:, kk]).mean() if spatial else 0.0
        lag_pos = kk if durbin else None
        family = SDM_MNL if durbin else (SAR_MNL if spatial else MNL)
        spec = ModelSpec(family=family, n_classes=3)
        lam = effect_matrix(
            spec, beta, theta, rho, kk, x_mean, xw_mean,
            W=W, n_regions=n, lag_pos=lag_pos,
        )
        fd = finite_difference_effects(
            spec, beta, theta, rho, kk, x_mean, xw_mean, W, n, lag_pos=lag_pos
        )
        rel = np.abs(lam - fd).max() / max(np.abs(fd).max(), 1e-12)
        worst = max(worst, rel)
    report(4, worst < 1e-5, "worst relative error %.2e over 50 instances" % worst)


# -------------------------------------------------------------------------
# 5. normalization invariants
# -------------------------------------------------------------------------


def test_criterion_5_normalization_invariants():
    problems = []
    gen = np.random.default_rng(55)
    mus = [
        gen.normal(scale=3.0, size=(40, 4)),
        gen.uniform(-700.0, 700.0, size=(40, 4)),
        np.zeros((5, 3)),
    ]
    for mu in mus:
        gap = np.abs(class_probabilities(mu).sum(axis=1) - 1.0).max()
        if gap > 1e-12:
            problems.append("probability row sums off by %.2e" % gap)
    for seed in range(10):
        g = np.random.default_rng(seed)
        n = int(g.integers(5, 12))
        W = build_knn_weights(g.normal(size=(n, 2)), 3).W
        spec = ModelSpec(family=SAR_MNL, n_classes=3)
        design = DesignMatrix(g.normal(size=(n, 2)))
        draws = summary_effect_draws(
            spec, design, W,
            g.normal(size=(3, 2, 2)), np.zeros((3, 2, 0)),
            g.uniform(-0.8, 0.8, size=(3, 2)),
        )
        cancel = np.abs(draws["total"].sum(axis=2)).max()
        if cancel > 1e-9:
            problems.append("class totals cancel only to %.2e" % cancel)
        exact = np.array_equal(draws["indirect"], draws["total"] - draws["direct"])
        if not exact:
            problems.append("indirect != total - direct bitwise")
    report(5, not problems, "; ".join(problems) or "all normalization invariants hold")


# -------------------------------------------------------------------------
# 6. posterior calibration under the data-generating process
# -------------------------------------------------------------------------


def test_criterion_6_coverage():
    out = run_calibration(
        DgpConfig(n_regions=DESK_N, rho=0.5),
        n_runs=50,
        sampler_config=PAPER_SETTINGS,
        master_seed=20240601,
        n_jobs=2,
    )
    report(
        6,
        out["coverage"] >= 0.80,
        "90%% interval coverage %.3f over %d intervals (need >= 0.80)"
        % (out["coverage"], out["n_intervals"]),
    )


# -------------------------------------------------------------------------
# 7. command-level determinism
# -------------------------------------------------------------------------


def _run_cli(*args):
    res = CliRunner().invoke(cli_main, [str(a) for a in args], catch_exceptions=False)
    assert res.exit_code == 0, res.output
    return res


def _tree_bytes(root):
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(Path(root).rglob("*"))
        if p.is_file()
    }


def test_criterion_7_byte_identical_commands(tmp_path):
    problems = []
    data = tmp_path / "data"
    _run_cli("simulate", "--n", 50, "--rho", 0.5, "--seed", 2, "--knn", 5, "--out", data)
    data2 = tmp_path / "data2"
    _run_cli("simulate", "--n", 50, "--rho", 0.5, "--seed", 2, "--knn", 5, "--out", data2)
    if _tree_bytes(data) != _tree_bytes(data2):
        problems.append("simulate differs across reruns")

    fits = []
    for name in ("f1", "f2"):
        out = tmp_path / name
        _run_cli(
            "fit", "--shares", data / "shares.csv",
            "--covariates", data / "covariates.csv",
            "--coords", data / "coords.csv",
            "--family", "sar", "--draws", 120, "--burnin", 80,
            "--seed", 4, "--knn", 5, "--out", out,
        )
        fits.append(out)
    if _tree_bytes(fits[0]) != _tree_bytes(fits[1]):
        problems.append("fit differs across reruns")

    imps = []
    for name in ("i1", "i2"):
        out = tmp_path / name
        _run_cli(
            "impacts", "--chain-dir", fits[0],
            "--covariates", data / "covariates.csv", "--out", out,
        )
        imps.append(out)
    if _tree_bytes(imps[0]) != _tree_bytes(imps[1]):
        problems.append("impacts differs across reruns")

    benches = []
    for name in ("b1", "b2"):
        out = tmp_path / name
        _run_cli(
            "benchmark", "--runs", 1, "--n", 40, "--scenarios", "0.5",
            "--models", "sar_mnl,mnl", "--draws", 60, "--burnin", 30,
            "--knn", 5, "--seed", 3, "--jobs", 2, "--out", out,
        )
        benches.append(out)
    if _tree_bytes(benches[0]) != _tree_bytes(benches[1]):
        problems.append("benchmark differs across reruns")

    report(7, not problems, "; ".join(problems) or "simulate/fit/impacts/benchmark byte-identical")


# -------------------------------------------------------------------------
# 8. declared out-of-scope reproduction
# -------------------------------------------------------------------------


def test_criterion_8_declared_not_reproducible():
    # the empirical coefficient table and its pseudo R-squared (0.119)
    # depend on a land-cover dataset that is not redistributable here;
    # the fit/impacts pipeline is validated end-to-end on simulated
    # data by criteria 3, 4, and 6 instead
    y, design, weights, _ = make_sar_dataset(40, 0.4, seed=77, k_neighbors=5)
    from spmnl.diagnostics import mcfadden_r2
    from spmnl.sampler import run_chain

    spec = ModelSpec(family=SAR_MNL, n_classes=3)
    chain = run_chain(spec, y, design, weights, SamplerConfig(n_draws=150, n_burnin=100, seed=1))
    r2 = mcfadden_r2(float(chain.loglik.mean()), y)
    report(
        8,
        np.isfinite(r2) and r2 <= 1.0,
        "empirical table declared not reproducible at desk scale; "
        "pipeline sanity fit gives finite pseudo R^2 = %.3f" % r2,
    )
