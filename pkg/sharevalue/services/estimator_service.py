"""
Estimator Service

Panel estimators for ln Y_it = a + b'ln X_it + mu_i + gamma_t + e_it:
pooled OLS, one-way and two-way fixed effects (within transformation), the
dummy-variable (LSDV) oracle, one-way Swamy-Arora random effects, and
recovery of the fixed effects themselves.
"""

from typing import List, Tuple

import numpy as np
from loguru import logger

from sharevalue.config import DEMEAN_MAX_ITERATIONS, DEMEAN_TOLERANCE, LSDV_MAX_DUMMIES
from sharevalue.exceptions import (
    ConvergenceError,
    InsufficientDataError,
    SizeLimitError,
    UnsupportedModelError,
)
from sharevalue.schemas.estimation import (
    FE_TAGS,
    RE_TAGS,
    AbsorbedCounts,
    EffectsDecomposition,
    EffectsMode,
    EffectsSummary,
    FitResult,
    ModelTag,
    VarianceComponents,
)
from sharevalue.schemas.panel import EstimationSample
from sharevalue.services.demeaning import absorbed_parameters, component_labels, demean_within, group_means
from sharevalue.services.least_squares import solve_least_squares

CONSTANT = "const"
FLOORED_FLAG = "variance_component_floored"


def _with_constant(matrix: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(matrix.shape[0]), matrix])


# ----------------------------------------------------------------------
# Pooled OLS
# ----------------------------------------------------------------------
def fit_pooled_ols(sample: EstimationSample) -> FitResult:
    """Pooled OLS with a common intercept (no individual or time effects)."""
    n, k = sample.n_obs, sample.k
    if n < k + 1:
        raise InsufficientDataError(f"pooled OLS needs at least {k + 1} observations, got {n}")

    names = (CONSTANT,) + tuple(sample.regressor_names)
    design = _with_constant(sample.ln_x)
    solution = solve_least_squares(design, sample.ln_y, names)

    residuals = solution.residuals
    return FitResult(
        model_tag=ModelTag.pooled,
        method="ols",
        params=solution.coefficients,
        slopes=solution.coefficients[1:],
        intercept=float(solution.coefficients[0]),
        residuals=residuals,
        fitted=sample.ln_y - residuals,
        ssr=float(residuals @ residuals),
        df_resid=n - k - 1,
        n_obs=n,
        absorbed_counts=AbsorbedCounts(),
        design=design,
        design_target=np.asarray(sample.ln_y, dtype=float),
        design_residuals=residuals,
        design_names=names,
        regressor_names=tuple(sample.regressor_names),
    )


# ----------------------------------------------------------------------
# Fixed effects
# ----------------------------------------------------------------------
def _decompose(
    sample: EstimationSample,
    remainder: np.ndarray,
    mode: EffectsMode,
    tolerance: float = DEMEAN_TOLERANCE,
    max_iterations: int = DEMEAN_MAX_ITERATIONS,
) -> EffectsDecomposition:
    """Split ``remainder`` = ln_y - ln_x b into a0 + mu_i + gamma_t + e."""
    entity, period = sample.entity_index, sample.period_index
    n_entities, n_periods = sample.n_entities, sample.n_periods
    entity_counts = sample.entity_counts.astype(float)
    period_counts = sample.period_counts.astype(float)

    a0 = float(remainder.mean())
    centered = remainder - a0
    mu = np.zeros(n_entities)
    gamma = np.zeros(n_periods)
    sweeps = 1

    if mode == EffectsMode.individual:
        mu = group_means(centered[:, None], entity, n_entities)[:, 0]
    elif mode == EffectsMode.time:
        gamma = group_means(centered[:, None], period, n_periods)[:, 0]
    else:
        change = np.inf
        for sweeps in range(1, max_iterations + 1):
            mu_next = group_means((centered - gamma[period])[:, None], entity, n_entities)[:, 0]
            gamma_next = group_means((centered - mu_next[entity])[:, None], period, n_periods)[:, 0]
            change = max(float(np.max(np.abs(mu_next - mu))), float(np.max(np.abs(gamma_next - gamma))))
            mu, gamma = mu_next, gamma_next
            if change < tolerance:
                break
        else:
            raise ConvergenceError("fixed-effect recovery", max_iterations, change)

        # mu + c, gamma - c fit equally well; pick the observation-weighted zero-sum pair
        shift = float(entity_counts @ mu) / sample.n_obs
        mu = mu - shift
        gamma = gamma + shift

    return EffectsDecomposition(
        a0=a0,
        mu=mu,
        gamma=gamma,
        entity_ids=sample.entity_ids,
        period_ids=sample.period_ids,
        entity_counts=entity_counts.astype(np.int64),
        period_counts=period_counts.astype(np.int64),
        iterations=sweeps,
    )


def fit_fixed_effects(
    sample: EstimationSample,
    mode: EffectsMode = EffectsMode.twoway,
    tolerance: float = DEMEAN_TOLERANCE,
    max_iterations: int = DEMEAN_MAX_ITERATIONS,
) -> FitResult:
    """
    Within estimator for individual, time or two-way fixed effects.

    Variables are demeaned (alternating projections for twoway), the grand
    means are restored so the regression carries an intercept equal to a0,
    and residuals are re-expressed against the original ln_y through the
    recovered effects.
    """
    mode = EffectsMode(mode)
    n, k = sample.n_obs, sample.k
    n_entity_effects, n_period_effects, n_parameters = absorbed_parameters(sample, mode)
    df_resid = n - k - n_parameters
    if df_resid <= 0:
        raise InsufficientDataError(
            f"{FE_TAGS[mode].value}: no residual degrees of freedom ({n} obs, {n_parameters} effects, {k} slopes)"
        )

    stacked = np.column_stack([sample.ln_y, sample.ln_x])
    demeaned = demean_within(stacked, sample, mode, tolerance, max_iterations)
    grand = stacked.mean(axis=0)
    target = demeaned.values[:, 0] + grand[0]
    design = _with_constant(demeaned.values[:, 1:] + grand[1:])

    names = (CONSTANT,) + tuple(sample.regressor_names)
    solution = solve_least_squares(design, target, names)
    slopes = solution.coefficients[1:]

    effects = _decompose(sample, sample.ln_y - sample.ln_x @ slopes, mode, tolerance, max_iterations)
    fitted = (
        effects.a0
        + effects.mu[sample.entity_index]
        + effects.gamma[sample.period_index]
        + sample.ln_x @ slopes
    )
    residuals = sample.ln_y - fitted

    logger.debug("{} fitted in {} demeaning sweeps", FE_TAGS[mode].value, demeaned.iterations)
    return FitResult(
        model_tag=FE_TAGS[mode],
        method="within",
        params=solution.coefficients,
        slopes=slopes,
        intercept=float(solution.coefficients[0]),
        residuals=residuals,
        fitted=fitted,
        ssr=float(residuals @ residuals),
        df_resid=df_resid,
        n_obs=n,
        absorbed_counts=AbsorbedCounts(n_entity_effects, n_period_effects),
        design=design,
        design_target=target,
        design_residuals=solution.residuals,
        design_names=names,
        regressor_names=tuple(sample.regressor_names),
        effects=effects,
        iterations=demeaned.iterations,
    )


def recover_effects(
    sample: EstimationSample,
    fit: FitResult,
    tolerance: float = DEMEAN_TOLERANCE,
    max_iterations: int = DEMEAN_MAX_ITERATIONS,
) -> EffectsDecomposition:
    """
    Recover a0, mu_i and gamma_t from a two-way fit.

    With r = ln_y - ln_x b, minimizes sum (r - a0 - mu_i - gamma_t)^2 under
    observation-weighted sum-to-zero constraints; a0 is the grand mean of r.
    """
    if fit.model_tag != ModelTag.fe_twoway:
        raise UnsupportedModelError(f"effect recovery needs a fe_twoway fit, got {fit.model_tag.value}")
    if fit.n_obs != sample.n_obs:
        raise InsufficientDataError("fit and sample are not aligned")
    return _decompose(sample, sample.ln_y - sample.ln_x @ fit.slopes, EffectsMode.twoway, tolerance, max_iterations)


def effects_summary(effects: EffectsDecomposition) -> List[EffectsSummary]:
    """Count, mean, dispersion and range of the individual and time effects."""
    summaries = []
    for dimension, values in (("individual", effects.mu), ("time", effects.gamma)):
        count = int(values.size)
        std_dev = float(values.std(ddof=1)) if count > 1 else 0.0
        summaries.append(EffectsSummary(
            dimension=dimension,
            count=count,
            mean=float(values.mean()) if count else 0.0,
            std_dev=std_dev,
            std_error=std_dev / np.sqrt(count) if count else 0.0,
            minimum=float(values.min()) if count else 0.0,
            maximum=float(values.max()) if count else 0.0,
        ))
    return summaries


# ----------------------------------------------------------------------
# Least squares dummy variables (oracle)
# ----------------------------------------------------------------------
def lsdv_design(sample: EstimationSample, mode: EffectsMode) -> Tuple[np.ndarray, Tuple[str, ...]]:
    """
    Dense dummy-variable design: intercept, regressors, then entity and/or
    period dummies. The first entity is dropped, and time-only designs drop
    the first period. Two-way designs drop the first period of every
    connected entity-period component, leaving N + T - C effect columns.
    """
    mode = EffectsMode(mode)
    blocks = [np.ones((sample.n_obs, 1)), sample.ln_x]
    names: List[str] = [CONSTANT, *sample.regressor_names]

    if mode in (EffectsMode.individual, EffectsMode.twoway):
        dummies = np.zeros((sample.n_obs, sample.n_entities))
        dummies[np.arange(sample.n_obs), sample.entity_index] = 1.0
        blocks.append(dummies[:, 1:])
        names.extend(f"entity[{entity}]" for entity in sample.entity_ids[1:])
    if mode in (EffectsMode.time, EffectsMode.twoway):
        dummies = np.zeros((sample.n_obs, sample.n_periods))
        dummies[np.arange(sample.n_obs), sample.period_index] = 1.0
        keep = np.ones(sample.n_periods, dtype=bool)
        if mode == EffectsMode.twoway:
            _, labels = component_labels(sample)
            period_labels = labels[sample.n_entities:]
            _, first = np.unique(period_labels, return_index=True)
            keep[first] = False
        else:
            keep[0] = False
        blocks.append(dummies[:, keep])
        names.extend(f"period[{period}]" for period, kept in zip(sample.period_ids, keep) if kept)

    return np.column_stack(blocks), tuple(names)


def fit_lsdv(
    sample: EstimationSample,
    mode: EffectsMode = EffectsMode.twoway,
    max_dummies: int = LSDV_MAX_DUMMIES,
) -> FitResult:
    """Fixed effects by explicit dummies; exact but memory-heavy."""
    mode = EffectsMode(mode)
    n_entity_effects, n_period_effects, _ = absorbed_parameters(sample, mode)
    if n_entity_effects + n_period_effects > max_dummies:
        raise SizeLimitError(
            f"LSDV would need {n_entity_effects + n_period_effects} dummies (limit {max_dummies}); "
            "use fit_fixed_effects instead"
        )

    design, names = lsdv_design(sample, mode)
    n, p, k = sample.n_obs, design.shape[1], sample.k
    if n - p <= 0:
        raise InsufficientDataError(f"LSDV design has {p} columns for {n} observations")
    solution = solve_least_squares(design, sample.ln_y, names)

    residuals = solution.residuals
    return FitResult(
        model_tag=FE_TAGS[mode],
        method="lsdv",
        params=solution.coefficients,
        slopes=solution.coefficients[1:1 + k],
        intercept=float(solution.coefficients[0]),
        residuals=residuals,
        fitted=sample.ln_y - residuals,
        ssr=float(residuals @ residuals),
        df_resid=n - p,
        n_obs=n,
        absorbed_counts=AbsorbedCounts(n_entity_effects, n_period_effects),
        design=design,
        design_target=np.asarray(sample.ln_y, dtype=float),
        design_residuals=residuals,
        design_names=names,
        regressor_names=tuple(sample.regressor_names),
    )


# ----------------------------------------------------------------------
# Random effects
# ----------------------------------------------------------------------
def fit_random_effects(sample: EstimationSample, mode: EffectsMode = EffectsMode.individual) -> FitResult:
    """
    One-way random effects GLS with Swamy-Arora variance components.

    sigma_eps^2 comes from the within regression, sigma_mu^2 from the between
    regression on group means (floored at zero, flagged), and the model is
    re-estimated on quasi-demeaned data with
    theta_g = 1 - sqrt(sigma_eps^2 / (sigma_eps^2 + T_g sigma_mu^2)).
    """
    mode = EffectsMode(mode)
    if mode == EffectsMode.twoway:
        raise UnsupportedModelError("two-way random effects is unavailable for unbalanced panels")

    if mode == EffectsMode.individual:
        codes, n_groups = sample.entity_index, sample.n_entities
    else:
        codes, n_groups = sample.period_index, sample.n_periods
    group_sizes = np.bincount(codes, minlength=n_groups).astype(float)
    n, k = sample.n_obs, sample.k

    if group_sizes.max() < 2:
        raise InsufficientDataError(f"{RE_TAGS[mode].value}: every group has a single observation")
    if n_groups - k - 1 <= 0:
        raise InsufficientDataError(f"{RE_TAGS[mode].value}: {n_groups} groups cannot identify the between regression")

    within = fit_fixed_effects(sample, mode)
    sigma_eps2 = within.ssr / within.df_resid

    stacked = np.column_stack([sample.ln_y, sample.ln_x])
    means = group_means(stacked, codes, n_groups)
    between = solve_least_squares(_with_constant(means[:, 1:]), means[:, 0])
    sigma_between2 = between.ssr / (n_groups - k - 1)
    sigma_mu2 = sigma_between2 - sigma_eps2 * float(np.mean(1.0 / group_sizes))
    floored = sigma_mu2 < 0
    if floored:
        logger.warning("{}: between variance below within share, sigma_mu^2 floored at 0", RE_TAGS[mode].value)
        sigma_mu2 = 0.0

    denominator = sigma_eps2 + group_sizes * sigma_mu2
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = np.where(denominator > 0, 1.0 - np.sqrt(sigma_eps2 / denominator), 0.0)
    theta_rows = theta[codes]

    quasi = stacked - theta_rows[:, None] * means[codes]
    design = np.column_stack([1.0 - theta_rows, quasi[:, 1:]])
    target = quasi[:, 0]
    names = (CONSTANT,) + tuple(sample.regressor_names)
    solution = solve_least_squares(design, target, names)

    intercept = float(solution.coefficients[0])
    slopes = solution.coefficients[1:]
    fitted = intercept + sample.ln_x @ slopes
    residuals = sample.ln_y - fitted

    return FitResult(
        model_tag=RE_TAGS[mode],
        method="gls",
        params=solution.coefficients,
        slopes=slopes,
        intercept=intercept,
        residuals=residuals,
        fitted=fitted,
        ssr=float(residuals @ residuals),
        df_resid=n - k - 1,
        n_obs=n,
        absorbed_counts=AbsorbedCounts(),
        design=design,
        design_target=target,
        design_residuals=solution.residuals,
        design_names=names,
        regressor_names=tuple(sample.regressor_names),
        variance_components=VarianceComponents(
            sigma_eps2=float(sigma_eps2),
            sigma_mu2=float(sigma_mu2),
            sigma_between2=float(sigma_between2),
            theta_min=float(theta.min()),
            theta_max=float(theta.max()),
            theta_mean=float(theta_rows.mean()),
            floored=bool(floored),
        ),
        flags=(FLOORED_FLAG,) if floored else (),
    )


def fit_model(sample: EstimationSample, model_tag: ModelTag) -> FitResult:
    """Dispatch on a model tag."""
    model_tag = ModelTag(model_tag)
    if model_tag == ModelTag.pooled:
        return fit_pooled_ols(sample)
    for mode, tag in FE_TAGS.items():
        if tag == model_tag:
            return fit_fixed_effects(sample, mode)
    for mode, tag in RE_TAGS.items():
        if tag == model_tag:
            return fit_random_effects(sample, mode)
    raise UnsupportedModelError(f"unknown model {model_tag}")
