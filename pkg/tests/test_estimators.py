"""
Test cases for pooled OLS, fixed effects, LSDV and effect recovery
"""

from dataclasses import replace

import numpy as np
import pytest

from sharevalue.exceptions import (
    ConvergenceError,
    InsufficientDataError,
    RankDeficientError,
    SizeLimitError,
    UnsupportedModelError,
)
from sharevalue.schemas.estimation import EffectsMode, ModelTag
from sharevalue.services.demeaning import absorbed_parameters, demean_within, effect_components
from sharevalue.services.estimator_service import (
    effects_summary,
    fit_fixed_effects,
    fit_lsdv,
    fit_model,
    fit_pooled_ols,
    fit_random_effects,
    lsdv_design,
    recover_effects,
)
from sharevalue.services.panel_service import index_sample


def hand_sample(entities, periods, seed=0, k=3):
    rng = np.random.default_rng(seed)
    n = len(entities)
    ln_x = rng.normal(size=(n, k))
    ln_y = 0.5 + ln_x @ np.array([0.3, -0.2, 0.8])[:k] + rng.normal(scale=0.1, size=n)
    sample = index_sample(np.array(entities, dtype=object), np.array(periods), ln_y, ln_x)
    return replace(sample, regressor_names=("ln_dps", "ln_cfps", "ln_bvps")[:k])


class TestPooledOLS:

    def test_recovers_slopes_without_effects(self, synthetic_sample):
        sample, panel = synthetic_sample(n_entities=200, n_periods=5, sigma_mu=0.0, sigma_gamma=0.0, seed=1)
        fit = fit_pooled_ols(sample)
        np.testing.assert_allclose(fit.slopes, panel.truth.b, atol=0.05)
        assert fit.intercept == pytest.approx(panel.truth.a0, abs=0.15)
        assert fit.df_resid == sample.n_obs - 4
        np.testing.assert_allclose(fit.fitted + fit.residuals, sample.ln_y, atol=1e-12)

    def test_too_few_observations(self):
        sample = hand_sample(["a", "b", "c"], [2001, 2001, 2001])
        with pytest.raises(InsufficientDataError):
            fit_pooled_ols(sample)


class TestFixedEffects:

    def test_noiseless_recovery(self, synthetic_sample):
        sample, panel = synthetic_sample(
            n_entities=100, n_periods=6, sigma_eps=0.0, missing_rate=0.1, center_entity_effects=True, seed=3,
        )
        fit = fit_fixed_effects(sample, EffectsMode.twoway)
        truth = panel.truth
        np.testing.assert_allclose(fit.slopes, truth.b, atol=1e-7)

        effects = recover_effects(sample, fit)
        assert effects.a0 == pytest.approx(truth.a0, abs=1e-7)
        np.testing.assert_allclose(effects.mu, truth.mu, atol=1e-7)
        np.testing.assert_allclose(effects.gamma, truth.gamma, atol=1e-7)

    def test_balanced_noiseless_exact(self, synthetic_sample):
        sample, panel = synthetic_sample(n_entities=40, n_periods=5, sigma_eps=0.0, seed=4)
        fit = fit_fixed_effects(sample, "twoway")
        np.testing.assert_allclose(fit.slopes, panel.truth.b, atol=1e-9)
        assert fit.iterations <= 2

    def test_fitted_value_identity(self, market_panel, market_twoway):
        sample, _ = market_panel
        fit = market_twoway
        effects = fit.effects
        rebuilt = (
            effects.a0
            + effects.mu[sample.entity_index]
            + effects.gamma[sample.period_index]
            + sample.ln_x @ fit.slopes
            + fit.residuals
        )
        np.testing.assert_allclose(rebuilt, sample.ln_y, atol=1e-9)
        assert abs(fit.residuals.sum()) < 1e-8 * sample.n_obs

    def test_weighted_sum_to_zero(self, market_panel, market_twoway):
        sample, _ = market_panel
        effects = recover_effects(sample, market_twoway)
        assert float(effects.entity_counts @ effects.mu) == pytest.approx(0.0, abs=1e-8)
        assert float(effects.period_counts @ effects.gamma) == pytest.approx(0.0, abs=1e-8)
        assert effects.n_obs == sample.n_obs

    def test_constant_shift_moves_only_intercept(self, market_panel, market_twoway):
        sample, _ = market_panel
        shifted = sample.with_values(sample.ln_y + 0.75)
        moved = recover_effects(shifted, fit_fixed_effects(shifted, "twoway"))
        original = market_twoway.effects
        np.testing.assert_allclose(moved.mu, original.mu, atol=1e-8)
        np.testing.assert_allclose(moved.gamma, original.gamma, atol=1e-8)
        assert moved.a0 == pytest.approx(original.a0 + 0.75, abs=1e-8)

    def test_single_period_time_effects_vanish(self, synthetic_sample):
        sample, _ = synthetic_sample(n_entities=30, n_periods=1, sigma_mu=0.0, seed=9)
        fit = fit_fixed_effects(sample, EffectsMode.time)
        np.testing.assert_allclose(fit.effects.gamma, 0.0, atol=1e-12)
        assert fit.effects.a0 == pytest.approx(float(np.mean(sample.ln_y - sample.ln_x @ fit.slopes)))

    def test_individual_matches_pooled_on_demeaned_data(self, market_panel):
        sample, _ = market_panel
        fit = fit_fixed_effects(sample, EffectsMode.individual)
        demeaned = demean_within(np.column_stack([sample.ln_y, sample.ln_x]), sample, "individual").values
        slopes, *_ = np.linalg.lstsq(demeaned[:, 1:], demeaned[:, 0], rcond=None)
        np.testing.assert_allclose(fit.slopes, slopes, atol=1e-10)

    def test_demeaning_is_idempotent(self, market_panel):
        sample, _ = market_panel
        once = demean_within(sample.ln_x, sample, "twoway")
        twice = demean_within(once.values, sample, "twoway")
        assert np.max(np.abs(twice.values - once.values)) < 1e-9

    def test_degrees_of_freedom(self, market_panel, market_twoway):
        sample, _ = market_panel
        assert effect_components(sample) == 1
        assert market_twoway.df_resid == sample.n_obs - 3 - (sample.n_entities + sample.n_periods - 1)
        assert market_twoway.absorbed_counts.n_entity_effects == sample.n_entities
        assert fit_fixed_effects(sample, "individual").df_resid == sample.n_obs - 3 - sample.n_entities
        assert fit_fixed_effects(sample, "time").df_resid == sample.n_obs - 3 - sample.n_periods

    def test_disconnected_panel_degrees_of_freedom(self):
        entities = ["A", "A", "A", "B", "B", "B", "C", "C", "C", "D", "D", "D", "E", "E", "E", "F", "F", "F"]
        periods = [2001, 2002, 2003] * 3 + [2004, 2005, 2006] * 3
        sample = hand_sample(entities, periods, seed=2)
        assert effect_components(sample) == 2
        assert absorbed_parameters(sample, "twoway") == (6, 6, 10)
        fit = fit_fixed_effects(sample, "twoway")
        assert fit.df_resid == 18 - 3 - 10

    def test_no_residual_degrees_of_freedom(self):
        sample = hand_sample(["A", "A", "B", "B"], [2001, 2002, 2001, 2002])
        with pytest.raises(InsufficientDataError):
            fit_fixed_effects(sample, "twoway")

    def test_sweep_cap(self, market_panel):
        sample, _ = market_panel
        with pytest.raises(ConvergenceError) as excinfo:
            fit_fixed_effects(sample, "twoway", max_iterations=1)
        assert excinfo.value.iterations == 1

    def test_time_invariant_regressor_rejected(self):
        entities = [e for e in "ABCDEF" for _ in range(4)]
        periods = [2001, 2002, 2003, 2004] * 6
        sample = hand_sample(entities, periods, seed=5)
        ln_x = np.array(sample.ln_x)
        ln_x[:, 2] = sample.entity_index.astype(float)
        with pytest.raises(RankDeficientError):
            fit_fixed_effects(sample.with_values(sample.ln_y, ln_x), "individual")

    def test_recover_effects_needs_twoway(self, market_panel):
        sample, _ = market_panel
        with pytest.raises(UnsupportedModelError):
            recover_effects(sample, fit_fixed_effects(sample, "individual"))

    def test_effects_summary(self, market_twoway):
        individual, time = effects_summary(market_twoway.effects)
        assert individual.dimension == "individual"
        assert time.dimension == "time"
        assert individual.count == market_twoway.effects.mu.size
        assert time.count == market_twoway.effects.gamma.size
        assert individual.minimum <= individual.mean <= individual.maximum
        assert individual.std_error == pytest.approx(individual.std_dev / np.sqrt(individual.count))


class TestLSDV:

    def test_design_columns(self, market_panel):
        sample, _ = market_panel
        design, names = lsdv_design(sample, "twoway")
        assert design.shape[1] == 1 + 3 + (sample.n_entities - 1) + (sample.n_periods - 1)
        assert names[:4] == ("const", "ln_dps", "ln_cfps", "ln_bvps")
        assert names[4] == f"entity[{sample.entity_ids[1]}]"
        assert names[-1] == f"period[{sample.period_ids[-1]}]"

    def test_hand_sized_panel(self):
        sample = hand_sample(["A", "A", "B", "B", "C", "C"], [2001, 2002, 2001, 2002, 2001, 2002], seed=8, k=1)
        within = fit_fixed_effects(sample, "individual")
        oracle = fit_lsdv(sample, "individual")
        x = sample.ln_x[:, 0] - np.repeat([sample.ln_x[0:2, 0].mean(), sample.ln_x[2:4, 0].mean(),
                                            sample.ln_x[4:6, 0].mean()], 2)
        y = sample.ln_y - np.repeat([sample.ln_y[0:2].mean(), sample.ln_y[2:4].mean(), sample.ln_y[4:6].mean()], 2)
        hand = float(x @ y / (x @ x))
        assert within.slopes[0] == pytest.approx(hand, abs=1e-10)
        assert oracle.slopes[0] == pytest.approx(hand, abs=1e-10)

    @pytest.mark.parametrize("mode", ["individual", "time", "twoway"])
    def test_within_matches_lsdv_on_random_panels(self, synthetic_sample, mode):
        rng = np.random.default_rng(2024)
        for seed in range(100):
            n_entities = int(rng.integers(8, 51))
            n_periods = int(rng.integers(4, 11))
            sample, _ = synthetic_sample(
                n_entities=n_entities, n_periods=n_periods, missing_rate=0.2, seed=seed,
                sigma_mu=0.5, sigma_gamma=0.2,
            )
            within = fit_fixed_effects(sample, mode)
            oracle = fit_lsdv(sample, mode)
            np.testing.assert_allclose(within.slopes, oracle.slopes, rtol=0, atol=1e-8)
            assert within.ssr == pytest.approx(oracle.ssr, rel=1e-6, abs=1e-10)
            assert within.df_resid == oracle.df_resid

    def test_disconnected_panel_matches_within(self):
        entities = [e for e in "ABCDEF" for _ in range(3)]
        periods = [2001, 2002, 2003] * 3 + [2004, 2005, 2006] * 3
        sample = hand_sample(entities, periods, seed=2)
        design, names = lsdv_design(sample, "twoway")
        assert design.shape[1] == 1 + 3 + 5 + 4
        assert "period[2001]" not in names and "period[2004]" not in names

        within = fit_fixed_effects(sample, "twoway")
        oracle = fit_lsdv(sample, "twoway")
        np.testing.assert_allclose(within.slopes, oracle.slopes, rtol=0, atol=1e-10)
        assert within.ssr == pytest.approx(oracle.ssr, rel=1e-8)
        assert within.df_resid == oracle.df_resid == 5

    def test_size_guard(self, market_panel):
        sample, _ = market_panel
        with pytest.raises(SizeLimitError, match="fit_fixed_effects"):
            fit_lsdv(sample, "twoway", max_dummies=50)


class TestFitModel:

    @pytest.mark.parametrize("tag", list(ModelTag))
    def test_dispatch(self, market_panel, tag):
        sample, _ = market_panel
        fit = fit_model(sample, tag)
        assert fit.model_tag == tag
        assert fit.n_obs == sample.n_obs
        assert fit.slopes.shape == (3,)

    def test_random_effects_twoway_unsupported(self, market_panel):
        sample, _ = market_panel
        with pytest.raises(UnsupportedModelError):
            fit_random_effects(sample, "twoway")
