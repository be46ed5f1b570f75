"""
Test cases for coefficient covariance, coefficient tables and goodness of fit
"""

from dataclasses import replace

import numpy as np
import pytest

from conftest import build_sample
from sharevalue.exceptions import ClusterCountError, CovarianceError, UndefinedFitError
from sharevalue.schemas.estimation import CovarianceMethod, CovMatrix
from sharevalue.services.distributions import two_sided_t
from sharevalue.services.estimator_service import fit_fixed_effects, fit_pooled_ols
from sharevalue.schemas.panel import PanelDataset
from sharevalue.services.inference_service import covariance, goodness_of_fit, inference_table, sandwich_covariance
from sharevalue.services.panel_service import index_sample, prepare_sample


class TestCovariance:

    def setup_method(self):
        self.sample, _ = build_sample(n_entities=80, n_periods=6, missing_rate=0.1, seed=31)
        self.fit = fit_pooled_ols(self.sample)

    def test_classical_matches_textbook(self):
        X = self.fit.design
        s2 = self.fit.ssr / (self.sample.n_obs - X.shape[1])
        expected = s2 * np.linalg.inv(X.T @ X)
        cov = covariance(self.fit, self.sample, CovarianceMethod.classical)
        np.testing.assert_allclose(cov.matrix, expected, rtol=1e-8)
        assert cov.cluster_count is None
        np.testing.assert_array_equal(cov.matrix, cov.matrix.T)

    def test_clustered_matches_loop(self):
        X, e = self.fit.design, self.fit.residuals
        n, p = X.shape
        bread = np.linalg.inv(X.T @ X)
        meat = np.zeros((p, p))
        for g in range(self.sample.n_entities):
            rows = self.sample.entity_index == g
            score = X[rows].T @ e[rows]
            meat += np.outer(score, score)
        G = self.sample.n_entities
        expected = G / (G - 1) * (n - 1) / (n - p) * bread @ meat @ bread

        cov = covariance(self.fit, self.sample, CovarianceMethod.white_period)
        np.testing.assert_allclose(cov.matrix, expected, rtol=1e-8)
        assert cov.cluster_count == G
        assert cov.small_sample_factor == pytest.approx(G / (G - 1) * (n - 1) / (n - p))
        assert np.all(np.diag(cov.matrix) >= 0)
        assert np.max(np.abs(cov.matrix - cov.matrix.T)) <= 1e-12 * np.max(np.abs(cov.matrix))

    def test_single_cluster(self):
        rng = np.random.default_rng(1)
        sample = index_sample(np.array(["A"] * 12, dtype=object), np.arange(2000, 2012),
                              rng.normal(size=12), rng.normal(size=(12, 3)))
        with pytest.raises(ClusterCountError):
            covariance(fit_pooled_ols(sample), sample, "white_period")

    def test_fixed_effects_use_demeaned_design(self, market_panel, market_twoway):
        sample, _ = market_panel
        cov = covariance(market_twoway, sample, "classical")
        X = market_twoway.design
        e = market_twoway.design_residuals
        expected = float(e @ e) / market_twoway.df_resid * np.linalg.inv(X.T @ X)
        np.testing.assert_allclose(cov.matrix, expected, rtol=1e-7)

    def test_row_order_does_not_change_covariance(self, synthetic_sample):
        _, panel = synthetic_sample(n_entities=80, n_periods=6, missing_rate=0.1, seed=33)
        data = panel.dataset
        order = np.random.default_rng(5).permutation(data.n_obs)
        shuffled = PanelDataset(data.frame.iloc[order].reset_index(drop=True), data.currency_code, data.period_range)

        original, permuted = prepare_sample(data), prepare_sample(shuffled)
        for fit_with in (fit_pooled_ols, fit_fixed_effects):
            first, second = fit_with(original), fit_with(permuted)
            for method in ("classical", "white_period"):
                difference = covariance(first, original, method).matrix - covariance(second, permuted, method).matrix
                assert np.max(np.abs(difference)) <= 1e-10

    def test_one_observation_per_cluster_is_hc0(self):
        rng = np.random.default_rng(9)
        n = 40
        ln_x = rng.normal(size=(n, 3))
        ln_y = 0.2 + ln_x @ np.array([0.5, -0.3, 0.1]) + rng.normal(scale=np.exp(ln_x[:, 0]) / 4)
        sample = index_sample(np.array([f"F{i:02d}" for i in range(n)], dtype=object), np.full(n, 2008), ln_y, ln_x)
        fit = fit_pooled_ols(sample)

        X, e = fit.design, fit.residuals
        p = X.shape[1]
        bread = np.linalg.inv(X.T @ X)
        hc0 = bread @ (X.T * e ** 2) @ X @ bread
        expected = n / (n - 1) * (n - 1) / (n - p) * hc0

        cov = covariance(fit, sample, "white_period")
        assert cov.cluster_count == n
        np.testing.assert_allclose(cov.matrix, expected, rtol=1e-9, atol=1e-12)

    def test_sandwich_with_classical_meat_is_classical(self):
        X = self.fit.design
        classical = covariance(self.fit, self.sample, "classical")
        s2 = self.fit.ssr / self.fit.df_resid
        bread = np.linalg.inv(X.T @ X)
        np.testing.assert_allclose(sandwich_covariance(bread, s2 * (X.T @ X)), classical.matrix, rtol=1e-8, atol=1e-10)


class TestRobustVersusClassical:
    """Entity-clustered errors against the classical formula on simulated panels"""

    def test_serially_correlated_errors_widen_clustered_errors(self, synthetic_sample):
        classical_se, clustered_se = [], []
        for seed in range(50):
            sample, _ = synthetic_sample(
                n_entities=100, n_periods=10, sigma_mu=0.0, sigma_gamma=0.0, regressor_between_sd=0.0,
                regressor_ar=0.8, eps_ar=0.8, seed=seed,
            )
            fit = fit_pooled_ols(sample)
            classical_se.append(np.sqrt(np.diag(covariance(fit, sample, "classical").matrix))[1:])
            clustered_se.append(np.sqrt(np.diag(covariance(fit, sample, "white_period").matrix))[1:])
        assert np.mean(clustered_se) > np.mean(classical_se)
        assert np.mean(np.array(clustered_se) / np.array(classical_se)) > 1.3

    def test_iid_errors_agree_on_average(self, synthetic_sample):
        ratios = []
        for seed in range(50):
            sample, _ = synthetic_sample(n_entities=200, n_periods=10, sigma_mu=0.0, sigma_gamma=0.0, seed=seed)
            fit = fit_pooled_ols(sample)
            classical = np.sqrt(np.diag(covariance(fit, sample, "classical").matrix))
            clustered = np.sqrt(np.diag(covariance(fit, sample, "white_period").matrix))
            ratios.append(clustered / classical)
        assert abs(float(np.mean(ratios)) - 1.0) < 0.1


class TestInferenceTable:

    def setup_method(self):
        self.sample, self.panel = build_sample(n_entities=60, n_periods=5, seed=12)
        self.fit = fit_pooled_ols(self.sample)

    def test_rows(self):
        cov = covariance(self.fit, self.sample, "white_period")
        table = inference_table(self.fit, cov)
        assert [row.name for row in table.rows] == ["const", "ln_dps", "ln_cfps", "ln_bvps"]
        assert table.df_resid == self.sample.n_obs - 4
        assert table.cluster_count == self.sample.n_entities

        row = table.row("ln_bvps")
        se = float(np.sqrt(cov.matrix[3, 3]))
        assert row.std_error == pytest.approx(se)
        assert row.t_stat == pytest.approx(row.estimate / se)
        assert row.p_value == pytest.approx(two_sided_t(row.t_stat, table.df_resid))

    def test_names_mismatch(self):
        cov = covariance(self.fit, self.sample, "classical")
        with pytest.raises(CovarianceError):
            inference_table(self.fit, replace(cov, names=("a", "b", "c", "d")))

    def test_nonpositive_variance(self):
        matrix = np.eye(4)
        matrix[2, 2] = 0.0
        cov = CovMatrix(matrix=matrix, method=CovarianceMethod.classical, names=self.fit.design_names,
                        df_resid=self.fit.df_resid)
        with pytest.raises(CovarianceError, match="ln_cfps"):
            inference_table(self.fit, cov)


class TestGoodnessOfFit:

    def test_pooled_matches_textbook(self):
        sample, _ = build_sample(n_entities=60, n_periods=5, seed=14)
        fit = fit_pooled_ols(sample)
        gof = goodness_of_fit(fit, sample)
        sst = float(np.sum((sample.ln_y - sample.ln_y.mean()) ** 2))
        n, k = sample.n_obs, 3
        assert gof.r_squared == pytest.approx(1 - fit.ssr / sst)
        assert gof.r_squared == pytest.approx(np.corrcoef(fit.fitted, sample.ln_y)[0, 1] ** 2)
        assert gof.adj_r_squared == pytest.approx(1 - (1 - gof.r_squared) * (n - 1) / (n - k - 1))
        assert gof.f_stat == pytest.approx(((sst - fit.ssr) / k) / (fit.ssr / (n - k - 1)), rel=1e-8)
        assert gof.f_df == (3, n - 4)
        assert gof.f_pvalue < 1e-10

    def test_fixed_effects_f_tests_slopes_given_effects(self, market_panel, market_twoway):
        sample, _ = market_panel
        gof = goodness_of_fit(market_twoway, sample)
        assert gof.f_df == (3, market_twoway.df_resid)
        assert 0.0 < gof.r_squared <= 1.0
        assert gof.adj_r_squared < gof.r_squared

    def test_null_slopes_rarely_significant(self, synthetic_sample):
        above = 0
        for seed in range(100):
            sample, _ = synthetic_sample(n_entities=100, n_periods=5, b=(0.0, 0.0, 0.0), sigma_mu=0.0,
                                         sigma_gamma=0.0, seed=seed)
            if goodness_of_fit(fit_pooled_ols(sample), sample).f_pvalue > 0.01:
                above += 1
        assert above >= 95

    def test_constant_dependent_variable(self):
        rng = np.random.default_rng(4)
        sample = index_sample(np.repeat(["A", "B", "C"], 4).astype(object), np.tile(np.arange(2001, 2005), 3),
                              np.ones(12), rng.normal(size=(12, 3)))
        with pytest.raises(UndefinedFitError):
            goodness_of_fit(fit_pooled_ols(sample), sample)
