"""
Exception hierarchy

Every error raised by the library carries a human readable ``detail`` and the
process ``exit_code`` the command line uses when the error reaches it.
"""

from typing import Any, Dict, List, Optional, Sequence

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INPUT = 2
EXIT_ESTIMATION = 3
EXIT_USAGE = 64


class ShareValueError(Exception):
    """Base class for all sharevalue errors."""

    exit_code: int = EXIT_FAILURE

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


# ----------------------------------------------------------------------
# Input errors (exit 2)
# ----------------------------------------------------------------------
class PanelFormatError(ShareValueError):
    """Input file could not be parsed into a panel dataset."""

    exit_code = EXIT_INPUT

    def __init__(self, detail: str, issues: Optional[Sequence[Dict[str, Any]]] = None):
        self.issues: List[Dict[str, Any]] = list(issues or [])
        if self.issues:
            shown = "; ".join(
                f"row {issue['row']}, column '{issue['column']}': {issue['value']!r}"
                for issue in self.issues[:10]
            )
            more = f" (+{len(self.issues) - 10} more)" if len(self.issues) > 10 else ""
            detail = f"{detail}: {shown}{more}"
        super().__init__(detail)


class MissingColumnError(PanelFormatError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"missing required column '{column}'")


class DuplicateKeyError(PanelFormatError):
    def __init__(self, entity_id: str, period: int, rows: Sequence[int]):
        self.entity_id = entity_id
        self.period = period
        self.rows = tuple(rows)
        super().__init__(
            f"duplicate observation ({entity_id}, {period}) on rows {self.rows[0]} and {self.rows[1]}"
        )


class CurrencyMismatchError(PanelFormatError):
    pass


# ----------------------------------------------------------------------
# Estimation errors (exit 3)
# ----------------------------------------------------------------------
class EstimationError(ShareValueError):
    exit_code = EXIT_ESTIMATION


class EmptySampleError(EstimationError):
    pass


class RankDeficientError(EstimationError):
    def __init__(self, column_index: int, column_name: Optional[str] = None, condition: float = float("inf")):
        self.column_index = column_index
        self.column_name = column_name
        self.condition = condition
        label = f"{column_index} ({column_name})" if column_name else str(column_index)
        super().__init__(f"design is numerically rank deficient at column {label}, condition {condition:.3g}")


class ConvergenceError(EstimationError):
    def __init__(self, what: str, iterations: int, max_change: float):
        self.iterations = iterations
        self.max_change = max_change
        super().__init__(f"{what} did not converge after {iterations} iterations (last change {max_change:.3g})")


class SizeLimitError(EstimationError):
    pass


class InsufficientDataError(EstimationError):
    pass


class UnsupportedModelError(EstimationError):
    pass


class CovarianceError(EstimationError):
    pass


class ClusterCountError(CovarianceError):
    pass


class UndefinedFitError(EstimationError):
    pass


class NestingError(EstimationError):
    pass


class DegenerateTestError(EstimationError):
    pass


class AlignmentError(EstimationError):
    pass


class EmptyExportError(EstimationError):
    pass


# ----------------------------------------------------------------------
# Usage errors (exit 64)
# ----------------------------------------------------------------------
class InvalidArgumentsError(ShareValueError):
    exit_code = EXIT_USAGE


class DistributionDomainError(ShareValueError, ValueError):
    """Invalid distribution parameters or argument."""
