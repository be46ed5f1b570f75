"""
Inference Service

Coefficient covariance (classical and entity-clustered "White period"),
coefficient tables with two-sided t p-values, and goodness of fit.
"""

from typing import List

import numpy as np
from loguru import logger

from sharevalue.exceptions import ClusterCountError, CovarianceError, UndefinedFitError
from sharevalue.schemas.estimation import (
    CoefficientRow,
    CoefficientTable,
    CovarianceMethod,
    CovMatrix,
    FitResult,
    GoodnessOfFit,
)
from sharevalue.schemas.panel import EstimationSample
from sharevalue.services.distributions import Distribution, dist_sf, two_sided_t
from sharevalue.services.least_squares import solve_least_squares


def _symmetrize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)


def sandwich_covariance(bread: np.ndarray, meat: np.ndarray) -> np.ndarray:
    """B M B, symmetrized."""
    return _symmetrize(bread @ meat @ bread)


def _bread(fit: FitResult) -> np.ndarray:
    return solve_least_squares(fit.design, fit.design_target, fit.design_names).xtx_inverse


def covariance(
    fit: FitResult,
    sample: EstimationSample,
    method: CovarianceMethod = CovarianceMethod.white_period,
) -> CovMatrix:
    """
    Coefficient covariance for the regression the fit actually solved.

    Args:
        fit: Estimated model
        sample: Estimation sample (cluster ids for white_period)
        method: classical (s^2 (X'X)^-1) or white_period (clustered by entity)

    Returns:
        CovMatrix over ``fit.design_names``

    Raises:
        ClusterCountError: fewer than two entities for white_period
    """
    method = CovarianceMethod(method)
    bread = _bread(fit)
    n, p = fit.design.shape

    if method == CovarianceMethod.classical:
        scale = float(fit.design_residuals @ fit.design_residuals) / fit.df_resid
        return CovMatrix(
            matrix=_symmetrize(scale * bread),
            method=method,
            names=fit.design_names,
            df_resid=fit.df_resid,
        )

    clusters = sample.n_entities
    if clusters < 2:
        raise ClusterCountError(f"clustered covariance needs at least 2 entities, got {clusters}")
    if n != sample.n_obs:
        raise CovarianceError("fit and sample row counts differ")

    scores = fit.design * fit.design_residuals[:, None]
    cluster_scores = np.zeros((clusters, p))
    np.add.at(cluster_scores, sample.entity_index, scores)
    meat = cluster_scores.T @ cluster_scores
    factor = clusters / (clusters - 1) * (n - 1) / (n - p)

    logger.debug("Clustered covariance: {} clusters, small-sample factor {:.4f}", clusters, factor)
    return CovMatrix(
        matrix=factor * sandwich_covariance(bread, meat),
        method=method,
        names=fit.design_names,
        df_resid=fit.df_resid,
        cluster_count=clusters,
        small_sample_factor=factor,
    )


def coefficient_row(name: str, estimate: float, std_error: float, df: int) -> CoefficientRow:
    t_stat = estimate / std_error
    return CoefficientRow(
        name=name,
        estimate=float(estimate),
        std_error=float(std_error),
        t_stat=float(t_stat),
        p_value=two_sided_t(t_stat, df),
    )


def inference_table(fit: FitResult, cov: CovMatrix) -> CoefficientTable:
    """
    Estimate, standard error, t statistic and two-sided p-value per coefficient.

    Raises:
        CovarianceError: a non-positive variance on the diagonal
    """
    if tuple(cov.names) != tuple(fit.design_names):
        raise CovarianceError("covariance does not match the fit's coefficients")

    variances = np.diag(cov.matrix)
    rows: List[CoefficientRow] = []
    for name, estimate, variance in zip(fit.design_names, fit.params, variances):
        if not np.isfinite(variance) or variance <= 0:
            raise CovarianceError(f"non-positive variance {variance:.3g} for coefficient '{name}'")
        rows.append(coefficient_row(name, float(estimate), float(np.sqrt(variance)), fit.df_resid))

    return CoefficientTable(
        model_tag=fit.model_tag,
        covariance_method=cov.method,
        df_resid=fit.df_resid,
        cluster_count=cov.cluster_count,
        small_sample_factor=cov.small_sample_factor,
        rows=rows,
    )


def goodness_of_fit(fit: FitResult, sample: EstimationSample) -> GoodnessOfFit:
    """
    R^2 against the original ln_y and the F test that all slopes are zero.

    The restricted regression keeps the non-slope design columns (the
    intercept) of the model actually solved, so for FE the F statistic tests
    the slopes given the effects.

    Raises:
        UndefinedFitError: ln_y has no variation
    """
    ln_y = sample.ln_y
    sst = float(np.sum((ln_y - ln_y.mean()) ** 2))
    if sst <= 0:
        raise UndefinedFitError("total sum of squares is zero; R^2 undefined")

    n = fit.n_obs
    r_squared = 1.0 - fit.ssr / sst
    adj_r_squared = 1.0 - (1.0 - r_squared) * (n - 1) / fit.df_resid

    slope_names = set(fit.regressor_names)
    keep = [j for j, name in enumerate(fit.design_names) if name not in slope_names]
    ssr_design = float(fit.design_residuals @ fit.design_residuals)
    if keep:
        restricted = solve_least_squares(fit.design[:, keep], fit.design_target).ssr
    else:
        restricted = float(fit.design_target @ fit.design_target)

    k = fit.k
    if ssr_design <= 0:
        f_stat = float("inf")
    else:
        f_stat = max(0.0, (restricted - ssr_design) / k) / (ssr_design / fit.df_resid)
    f_pvalue = dist_sf(f_stat, Distribution.f, k, fit.df_resid)

    return GoodnessOfFit(
        r_squared=float(r_squared),
        adj_r_squared=float(adj_r_squared),
        f_stat=float(f_stat),
        f_df=(k, fit.df_resid),
        f_pvalue=float(f_pvalue),
        n_obs=n,
    )
