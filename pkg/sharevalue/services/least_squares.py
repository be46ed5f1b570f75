"""
Least-squares kernel.

Solves min ||y - Xc||^2 through a QR factorization of the column-equilibrated
design instead of forming X'X, and refuses numerically rank-deficient designs.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from sharevalue.config import RANK_CONDITION_LIMIT
from sharevalue.exceptions import InsufficientDataError, RankDeficientError


@dataclass(frozen=True)
class LeastSquaresSolution:
    coefficients: np.ndarray
    ssr: float
    residuals: np.ndarray
    xtx_inverse: np.ndarray
    condition_number: float


def _offending_column(r_diag: np.ndarray, limit: float) -> int:
    # with unit-norm columns |r_jj| is the distance of column j from the span of columns < j
    running_max = np.maximum.accumulate(r_diag)
    small = np.flatnonzero(r_diag * limit < running_max)
    if small.size:
        return int(small[0])
    return int(np.argmin(r_diag))


def solve_least_squares(
    design: np.ndarray,
    target: np.ndarray,
    column_names: Optional[Sequence[str]] = None,
    condition_limit: float = RANK_CONDITION_LIMIT,
) -> LeastSquaresSolution:
    """
    Least-squares coefficients via QR.

    Args:
        design: n x p design matrix
        target: length-n response
        column_names: Optional names used in rank errors
        condition_limit: Condition number above which the design is rejected

    Returns:
        LeastSquaresSolution with coefficients, ssr, residuals and (X'X)^-1

    Raises:
        RankDeficientError: naming the first column that is (numerically) a
            combination of earlier ones
    """
    X = np.asarray(design, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(target, dtype=float).ravel()
    n, p = X.shape
    if y.shape[0] != n:
        raise ValueError(f"target has {y.shape[0]} rows, design has {n}")
    if n < p:
        raise InsufficientDataError(f"{n} observations cannot identify {p} coefficients")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("design and target must be finite")

    def name(index: int) -> Optional[str]:
        return column_names[index] if column_names is not None else None

    scale = np.sqrt(np.einsum("ij,ij->j", X, X))
    zero = np.flatnonzero(scale == 0)
    if zero.size:
        raise RankDeficientError(int(zero[0]), name(int(zero[0])))

    Xs = X / scale
    q, r = linalg.qr(Xs, mode="economic")
    singular_values = linalg.svdvals(r)
    condition = float(singular_values[0] / singular_values[-1]) if singular_values[-1] > 0 else float("inf")
    if condition > condition_limit:
        culprit = _offending_column(np.abs(np.diag(r)), condition_limit)
        raise RankDeficientError(culprit, name(culprit), condition)

    scaled_coefficients = linalg.solve_triangular(r, q.T @ y, lower=False)
    coefficients = scaled_coefficients / scale
    residuals = y - X @ coefficients
    ssr = float(residuals @ residuals)

    r_inverse = linalg.solve_triangular(r, np.eye(p), lower=False)
    xtx_inverse = (r_inverse @ r_inverse.T) / np.outer(scale, scale)

    return LeastSquaresSolution(
        coefficients=coefficients,
        ssr=ssr,
        residuals=residuals,
        xtx_inverse=xtx_inverse,
        condition_number=condition,
    )
