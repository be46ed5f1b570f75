"""
Fundamentals and divergence result types.
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field


class ValueKind(str, Enum):
    theoretical = "theoretical"
    fundamentals = "fundamentals"
    divergence = "divergence"


@dataclass(frozen=True)
class ValueSeries:
    """Per-row log values on the estimation sample's row set."""
    kind: ValueKind
    entity_index: np.ndarray
    period_index: np.ndarray
    values: np.ndarray
    entity_ids: Tuple[str, ...]
    period_ids: Tuple[int, ...]

    @property
    def n_obs(self) -> int:
        return int(self.values.shape[0])

    def period_labels(self) -> np.ndarray:
        return np.asarray(self.period_ids, dtype=np.int64)[self.period_index]

    def entity_labels(self) -> np.ndarray:
        return np.asarray(self.entity_ids, dtype=object)[self.entity_index]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "entity_id": self.entity_labels(),
            "year": self.period_labels(),
            self.kind.value: self.values,
        })


class YearlyMoments(BaseModel):
    """One row of the yearly divergence table."""
    year: int
    n_obs: int
    mean: Optional[float] = None
    std_dev: Optional[float] = None
    skewness: Optional[float] = None
    raw_kurtosis: Optional[float] = None
    excess_kurtosis: Optional[float] = None
    share_positive: Optional[float] = None
    flag: Optional[str] = None


class HistogramBin(BaseModel):
    bin_left: float
    bin_right: float
    relative_frequency: float = Field(..., ge=0.0, le=1.0)


class Histogram(BaseModel):
    label: str
    bin_width: float = Field(..., gt=0)
    n_obs: int
    bins: List[HistogramBin] = Field(default_factory=list)

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([b.relative_frequency for b in self.bins])


class MeanDivergencePoint(BaseModel):
    year: int
    mean_divergence: float
    time_effect: float


class DivergenceReport(BaseModel):
    """Yearly moments, histograms and the mean-divergence series."""
    yearly: List[YearlyMoments] = Field(default_factory=list)
    histograms: List[Histogram] = Field(default_factory=list)
    mean_series: List[MeanDivergencePoint] = Field(default_factory=list)
    bin_width: float
    moment_convention: str = "central moments with n denominator; std dev with n-1"
