import numpy as np
import pytest

from conftest import make_sar_dataset
from oracles import finite_difference_effects
from spmnl.effects import (
    ImpactSummary,
    _PowerSeriesProfiles,
    _exact_parts,
    effect_matrix,
    posterior_impacts,
    summarize_effects,
    summary_effect_draws,
)
from spmnl.model import MNL, SAR_MNL, SDM_MNL, DesignMatrix, ModelSpec
from spmnl.sampler import SamplerConfig, run_chain
from spmnl.weights import build_knn_weights


def random_instance(seed, spatial=True, durbin=False, n_max=10):
    gen = np.random.default_rng(seed)
    n = int(gen.integers(4, n_max + 1))
    k = int(gen.integers(1, 4))
    W = build_knn_weights(gen.normal(size=(n, 2)), min(3, n - 1)).W if spatial else None
    beta = gen.normal(size=(2, k))
    theta = gen.normal(size=(2, k)) if durbin else np.zeros((2, 0))
    rho = gen.uniform(-0.7, 0.7, size=2) if spatial else np.zeros(2)
    X = gen.normal(size=(n, k))
    return n, k, W, beta, theta, rho, X


class TestEffectMatrix:
    def test_zero_coefficients_zero_matrix(self):
        n, k, W, beta, theta, rho, X = random_instance(1)
        lam = effect_matrix(
            ModelSpec(family=SAR_MNL, n_classes=3),
            np.zeros_like(beta), theta, rho, 0, X[:, 0].mean(), 0.0, W=W,
        )
        assert np.allclose(lam, 0.0, atol=0)

    def test_binary_nonspatial_textbook_margin(self):
        # two classes, no spatial terms: the own-derivative collapses
        # to p (1 - p) beta at the evaluation point
        beta_val = 0.8
        x_mean = 0.3
        lam = effect_matrix(
            ModelSpec(family=MNL, n_classes=2),
            np.array([[beta_val]]), np.zeros((1, 0)), np.zeros(1),
            0, x_mean, 0.0, W=None, n_regions=4,
        )
        p = 1.0 / (1.0 + np.exp(-x_mean * beta_val))
        assert np.allclose(np.diag(lam[0]), p * (1 - p) * beta_val, atol=1e-14)
        assert np.allclose(lam[0] - np.diag(np.diag(lam[0])), 0.0)

    @pytest.mark.parametrize("seed", range(25))
    def test_finite_difference_agreement_spatial(self, seed):
        n, k, W, beta, theta, rho, X = random_instance(seed, spatial=True, durbin=seed % 2)
        spec = ModelSpec(family=SDM_MNL if seed % 2 else SAR_MNL, n_classes=3)
        kk = seed % k
        x_mean = X[:, kk].mean()
        xw_mean = (W @ X[:, kk]).mean()
        lag_pos = kk if seed % 2 else None
        lam = effect_matrix(spec, beta, theta, rho, kk, x_mean, xw_mean, W=W, lag_pos=lag_pos)
        fd = finite_difference_effects(
            spec, beta, theta, rho, kk, x_mean, xw_mean, W, n, lag_pos=lag_pos
        )
        scale = max(np.abs(fd).max(), 1e-12)
        assert np.abs(lam - fd).max() / scale < 1e-5

    @pytest.mark.parametrize("seed", range(25, 35))
    def test_finite_difference_agreement_nonspatial(self, seed):
        n, k, W, beta, theta, rho, X = random_instance(seed, spatial=False)
        spec = ModelSpec(family=MNL, n_classes=3)
        kk = seed % k
        x_mean = X[:, kk].mean()
        lam = effect_matrix(spec, beta, theta, rho, kk, x_mean, 0.0, W=None, n_regions=n)
        fd = finite_difference_effects(
            spec, beta, theta, rho, kk, x_mean, 0.0, None, n
        )
        scale = max(np.abs(fd).max(), 1e-12)
        assert np.abs(lam - fd).max() / scale < 1e-5

    def test_diagonal_when_no_spatial_structure(self):
        n, k, W, beta, theta, rho, X = random_instance(3, spatial=True)
        lam = effect_matrix(
            ModelSpec(family=SAR_MNL, n_classes=3),
            beta, np.zeros((2, 0)), np.zeros(2), 0, 0.1, 0.0, W=W,
        )
        for j in range(3):
            off = lam[j] - np.diag(np.diag(lam[j]))
            assert np.allclose(off, 0.0, atol=0)

    def test_scale_equivariance_power_of_two(self):
        # rescaling covariate k by c and its coefficients by 1/c divides
        # the derivative by c exactly (c = 2 keeps floats exact)
        n, k, W, beta, theta, rho, X = random_instance(9, spatial=True, durbin=True)
        spec = ModelSpec(family=SDM_MNL, n_classes=3)
        c = 2.0
        x_mean = X[:, 0].mean()
        xw_mean = (W @ X[:, 0]).mean()
        lam = effect_matrix(spec, beta, theta, rho, 0, x_mean, xw_mean, W=W, lag_pos=0)
        beta2 = beta.copy(); beta2[:, 0] /= c
        theta2 = theta.copy(); theta2[:, 0] /= c
        lam2 = effect_matrix(
            spec, beta2, theta2, rho, 0, x_mean * c, xw_mean * c, W=W, lag_pos=0
        )
        assert np.array_equal(lam, lam2 * c)


class TestSummarize:
    def test_identity(self):
        d, i, t = summarize_effects(np.eye(4))
        assert (d, i, t) == (1.0, 0.0, 1.0)

    def test_all_ones(self):
        d, i, t = summarize_effects(np.ones((4, 4)))
        assert (d, i, t) == (1.0, 3.0, 4.0)

    def test_indirect_is_total_minus_direct_exactly(self, rng):
        lam = rng.normal(size=(7, 7))
        d, i, t = summarize_effects(lam)
        assert i == t - d

    def test_requires_square(self):
        with pytest.raises(ValueError, match="square"):
            summarize_effects(np.ones((2, 3)))


class TestSummaryDraws:
    def test_matches_full_matrices(self, rng):
        n, k, W, beta, theta, rho, X = random_instance(11, spatial=True, durbin=True)
        spec = ModelSpec(family=SDM_MNL, n_classes=3)
        design = DesignMatrix(X)
        draws = summary_effect_draws(
            spec, design, W, beta[None], theta[None], rho[None]
        )
        for ki, kk in enumerate(draws["covariates"]):
            lam = effect_matrix(
                spec, beta, theta, rho, kk,
                X[:, kk].mean(), (W @ X[:, kk]).mean(), W=W,
                lag_pos=list(design.lagged_columns()).index(kk),
            )
            for j in range(3):
                d, i, t = summarize_effects(lam[j])
                assert draws["direct"][0, ki, j] == pytest.approx(d, abs=1e-12)
                assert draws["total"][0, ki, j] == pytest.approx(t, abs=1e-12)

    def test_class_totals_cancel(self, rng):
        n, k, W, beta, theta, rho, X = random_instance(13, spatial=True)
        spec = ModelSpec(family=SAR_MNL, n_classes=3)
        draws = summary_effect_draws(
            spec, DesignMatrix(X), W, beta[None], np.zeros((1, 2, 0)), rho[None]
        )
        sums = draws["total"].sum(axis=2)
        assert np.abs(sums).max() < 1e-9
        sums_di = (draws["direct"] + draws["indirect"]).sum(axis=2)
        assert np.abs(sums_di).max() < 1e-9

    def test_intercept_excluded_by_default(self):
        X = np.column_stack([np.ones(8), np.arange(8.0)])
        design = DesignMatrix(X, names=["const", "x"])
        spec = ModelSpec(family=MNL, n_classes=3)
        draws = summary_effect_draws(
            spec, design, None, np.zeros((1, 2, 2)), np.zeros((1, 2, 0)), np.zeros((1, 2))
        )
        assert draws["covariates"] == [1]

    def test_thinning(self):
        n, k, W, beta, theta, rho, X = random_instance(17, spatial=False)
        spec = ModelSpec(family=MNL, n_classes=3)
        beta_draws = np.stack([beta, 2 * beta, 3 * beta, 4 * beta])
        out = summary_effect_draws(
            spec, DesignMatrix(X), None, beta_draws,
            np.zeros((4, 2, 0)), np.zeros((4, 2)), thin=2,
        )
        assert out["direct"].shape[0] == 2

    def test_power_series_profiles_match_dense(self):
        gen = np.random.default_rng(23)
        W = build_knn_weights(gen.normal(size=(150, 2)), 6).W
        prof = _PowerSeriesProfiles(W)
        for r in (-0.88, -0.3, 0.0, 0.45, 0.9):
            fast = prof.parts_for(r, True)
            ref = _exact_parts(W, np.array([r, r]), 150, 3, True)
            for a, b in zip(fast, ref):
                assert np.abs(np.asarray(a) - b[0]).max() < 1e-10

    def test_profiles_cover_only_inside_radius(self):
        gen = np.random.default_rng(24)
        W = build_knn_weights(gen.normal(size=(120, 2)), 5).W
        prof = _PowerSeriesProfiles(W)
        assert prof.covers(0.9) and not prof.covers(0.95)


class TestPosteriorImpacts:
    def test_constant_chain_zero_width_intervals(self):
        y, design, weights, beta = make_sar_dataset(25, 0.3, seed=40)
        spec = ModelSpec(family=SAR_MNL, n_classes=3)
        chain = run_chain(
            spec, y, design, weights, SamplerConfig(n_draws=31, n_burnin=30, seed=1)
        )
        imp = posterior_impacts(chain, spec, design, weights)
        assert np.array_equal(imp.direct_lo, imp.direct_hi)
        assert np.array_equal(imp.direct_lo, imp.direct_mean)

    def test_nonspatial_chain_zero_indirect(self):
        y, design, _, _ = make_sar_dataset(30, 0.0, seed=41)
        spec = ModelSpec(family=MNL, n_classes=3)
        chain = run_chain(
            spec, y, design, None, SamplerConfig(n_draws=80, n_burnin=40, seed=2)
        )
        imp = posterior_impacts(chain, spec, design)
        assert np.all(imp.indirect_mean == 0.0)
        assert np.all(~imp.indirect_significant)

    def test_signs_recovered_on_separated_data(self):
        y, design, weights, beta = make_sar_dataset(120, 0.4, seed=42, k_neighbors=6)
        spec = ModelSpec(family=SAR_MNL, n_classes=3)
        chain = run_chain(
            spec, y, design, weights, SamplerConfig(n_draws=400, n_burnin=200, seed=3)
        )
        imp = posterior_impacts(chain, spec, design, weights)
        truth = summary_effect_draws(
            spec, design, weights, beta[None], np.zeros((1, 2, 0)),
            np.full((1, 2), 0.4),
        )
        big = np.abs(truth["direct"][0]) > 0.05
        agree = np.sign(imp.direct_mean[big]) == np.sign(truth["direct"][0][big])
        assert agree.mean() >= 0.9

    def test_long_frame_layout(self):
        y, design, _, _ = make_sar_dataset(20, 0.0, seed=43)
        spec = ModelSpec(family=MNL, n_classes=3)
        chain = run_chain(
            spec, y, design, None, SamplerConfig(n_draws=40, n_burnin=20, seed=4)
        )
        frame = posterior_impacts(chain, spec, design).to_frame()
        assert set(frame["effect"]) == {"direct", "indirect", "total"}
        assert len(frame) == 3 * 2 * 3  # effects x covariates x classes
        assert {"covariate", "class", "mean", "q05", "q95", "significant"} <= set(frame.columns)

    def test_empty_chain_rejected(self):
        y, design, _, _ = make_sar_dataset(15, 0.0, seed=44)
        spec = ModelSpec(family=MNL, n_classes=3)
        chain = run_chain(
            spec, y, design, None, SamplerConfig(n_draws=31, n_burnin=30, seed=5)
        )
        chain.beta = chain.beta[:0]
        with pytest.raises(ValueError, match="empty"):
            posterior_impacts(chain, spec, design)
