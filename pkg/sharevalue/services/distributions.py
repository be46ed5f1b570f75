"""
Reference distributions for test p-values.

CDFs and survival functions of the normal, Student t, chi-square and F
distributions, expressed through the regularized incomplete gamma and beta
functions. Survival functions are evaluated directly in the upper tail so
small p-values keep their relative accuracy.
"""

from enum import Enum
from typing import Optional, Union

import numpy as np
from scipy import special

from sharevalue.exceptions import DistributionDomainError

ArrayLike = Union[float, np.ndarray]


class Distribution(str, Enum):
    normal = "normal"
    student_t = "student_t"
    chi_square = "chi_square"
    f = "f"


def _check_df(value: Optional[float], label: str) -> float:
    if value is None:
        raise DistributionDomainError(f"{label} is required")
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise DistributionDomainError(f"{label} must be positive and finite, got {value}")
    return value


def _prepare(x: ArrayLike):
    values = np.asarray(x, dtype=float)
    if np.isnan(values).any():
        raise DistributionDomainError("distribution argument is NaN")
    return values


def _finish(result: np.ndarray, scalar: bool) -> ArrayLike:
    result = np.clip(result, 0.0, 1.0)
    return float(result) if scalar else result


def _normal_lower(z: np.ndarray) -> np.ndarray:
    # P(Z <= -|z|) = Q(1/2, z^2/2) / 2
    tail = 0.5 * special.gammaincc(0.5, 0.5 * z * z)
    return np.where(z < 0, tail, 1.0 - tail)


def _t_tail(x: np.ndarray, df: float) -> np.ndarray:
    """P(T > |x|)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(np.isinf(x), 0.0, df / (df + x * x))
    return 0.5 * special.betainc(0.5 * df, 0.5, ratio)


def dist_cdf(
    x: ArrayLike,
    distribution: Distribution,
    df1: Optional[float] = None,
    df2: Optional[float] = None,
) -> ArrayLike:
    """
    Cumulative distribution function.

    Args:
        x: Point(s) of evaluation
        distribution: normal, student_t, chi_square or f
        df1: Degrees of freedom (numerator df for F)
        df2: Denominator degrees of freedom for F

    Raises:
        DistributionDomainError: non-positive or missing degrees of freedom, NaN argument
    """
    distribution = Distribution(distribution)
    values = _prepare(x)
    scalar = values.ndim == 0

    if distribution == Distribution.normal:
        return _finish(_normal_lower(values), scalar)

    if distribution == Distribution.student_t:
        nu = _check_df(df1, "df")
        tail = _t_tail(values, nu)
        return _finish(np.where(values < 0, tail, 1.0 - tail), scalar)

    if distribution == Distribution.chi_square:
        nu = _check_df(df1, "df")
        positive = np.maximum(values, 0.0)
        return _finish(np.where(values <= 0, 0.0, special.gammainc(0.5 * nu, 0.5 * positive)), scalar)

    d1 = _check_df(df1, "df1")
    d2 = _check_df(df2, "df2")
    positive = np.maximum(values, 0.0)
    with np.errstate(invalid="ignore"):
        ratio = np.where(np.isinf(positive), 1.0, d1 * positive / (d1 * positive + d2))
    return _finish(np.where(values <= 0, 0.0, special.betainc(0.5 * d1, 0.5 * d2, ratio)), scalar)


def dist_sf(
    x: ArrayLike,
    distribution: Distribution,
    df1: Optional[float] = None,
    df2: Optional[float] = None,
) -> ArrayLike:
    """Survival function 1 - cdf, computed in the upper tail."""
    distribution = Distribution(distribution)
    values = _prepare(x)
    scalar = values.ndim == 0

    if distribution == Distribution.normal:
        return _finish(_normal_lower(-values), scalar)

    if distribution == Distribution.student_t:
        nu = _check_df(df1, "df")
        tail = _t_tail(values, nu)
        return _finish(np.where(values > 0, tail, 1.0 - tail), scalar)

    if distribution == Distribution.chi_square:
        nu = _check_df(df1, "df")
        positive = np.maximum(values, 0.0)
        return _finish(np.where(values <= 0, 1.0, special.gammaincc(0.5 * nu, 0.5 * positive)), scalar)

    d1 = _check_df(df1, "df1")
    d2 = _check_df(df2, "df2")
    positive = np.maximum(values, 0.0)
    with np.errstate(invalid="ignore"):
        ratio = np.where(np.isinf(positive), 0.0, d2 / (d2 + d1 * positive))
    return _finish(np.where(values <= 0, 1.0, special.betainc(0.5 * d2, 0.5 * d1, ratio)), scalar)


def two_sided_t(t_stat: ArrayLike, df: float) -> ArrayLike:
    """Two-sided p-value 2 * P(T > |t|)."""
    p_value = 2.0 * np.asarray(dist_sf(np.abs(_prepare(t_stat)), Distribution.student_t, df))
    p_value = np.minimum(p_value, 1.0)
    return float(p_value) if p_value.ndim == 0 else p_value
