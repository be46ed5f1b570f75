"""
Panel data containers: the raw firm-year dataset, the log-transformed
estimation sample and the balance summary.
"""

from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

# File header -> internal column name
FILE_COLUMNS: Dict[str, str] = {
    "entity_id": "entity_id",
    "year": "period",
    "price": "price",
    "dps": "dividends_per_share",
    "cfps": "cashflow_per_share",
    "bvps": "bookvalue_per_share",
}
VALUE_COLUMNS: Tuple[str, ...] = (
    "price",
    "dividends_per_share",
    "cashflow_per_share",
    "bookvalue_per_share",
)
REGRESSOR_NAMES: Tuple[str, ...] = ("ln_dps", "ln_cfps", "ln_bvps")
DEPENDENT_NAME = "ln_price"
NONPOSITIVE_REASON = "nonpositive value"


class DropRecord(BaseModel):
    entity_id: str
    period: int
    reason: str


class PanelSummary(BaseModel):
    n_entities: int
    n_periods: int
    n_obs: int
    is_balanced: bool
    per_period_counts: Dict[int, int] = Field(default_factory=dict)


@dataclass(frozen=True)
class PanelDataset:
    """
    Raw firm-year observations in pre-log form.

    ``frame`` holds one row per observation with columns ``entity_id``,
    ``period`` and ``VALUE_COLUMNS``, in source order.
    """
    frame: pd.DataFrame
    currency_code: str
    period_range: Tuple[int, int]

    @property
    def n_obs(self) -> int:
        return len(self.frame)

    @property
    def observations(self) -> List[dict]:
        return self.frame.to_dict(orient="records")

    def equals(self, other: "PanelDataset") -> bool:
        return (
            self.currency_code == other.currency_code
            and tuple(self.period_range) == tuple(other.period_range)
            and self.frame.reset_index(drop=True).equals(other.frame.reset_index(drop=True))
        )


@dataclass(frozen=True)
class EstimationSample:
    """
    Validated log-transformed design data.

    Rows are sorted by (entity, period). ``entity_index`` and ``period_index``
    point into the sorted ``entity_ids`` and ``period_ids``. Arrays are
    read-only so a sample can be shared between threads.
    """
    entity_index: np.ndarray
    period_index: np.ndarray
    ln_y: np.ndarray
    ln_x: np.ndarray
    entity_ids: Tuple[str, ...]
    period_ids: Tuple[int, ...]
    drop_ledger: Tuple[DropRecord, ...] = ()
    source_obs: int = 0
    regressor_names: Tuple[str, ...] = REGRESSOR_NAMES

    def __post_init__(self):
        for name in ("entity_index", "period_index", "ln_y", "ln_x"):
            array = np.array(getattr(self, name), copy=True)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        if self.ln_x.ndim != 2 or self.ln_x.shape[0] != self.ln_y.shape[0]:
            raise ValueError("ln_x must be an n x k matrix aligned with ln_y")
        if not (np.all(np.isfinite(self.ln_y)) and np.all(np.isfinite(self.ln_x))):
            raise ValueError("estimation sample values must be finite")

    @property
    def n_obs(self) -> int:
        return int(self.ln_y.shape[0])

    @property
    def k(self) -> int:
        return int(self.ln_x.shape[1])

    @property
    def n_entities(self) -> int:
        return len(self.entity_ids)

    @property
    def n_periods(self) -> int:
        return len(self.period_ids)

    @property
    def entity_counts(self) -> np.ndarray:
        return np.bincount(self.entity_index, minlength=self.n_entities)

    @property
    def period_counts(self) -> np.ndarray:
        return np.bincount(self.period_index, minlength=self.n_periods)

    def entity_labels(self) -> np.ndarray:
        return np.asarray(self.entity_ids, dtype=object)[self.entity_index]

    def period_labels(self) -> np.ndarray:
        return np.asarray(self.period_ids, dtype=np.int64)[self.period_index]

    def with_values(self, ln_y: np.ndarray, ln_x: Optional[np.ndarray] = None) -> "EstimationSample":
        """Same index structure, different values (used for transformed samples)."""
        return replace(self, ln_y=np.asarray(ln_y, dtype=float),
                       ln_x=self.ln_x if ln_x is None else np.asarray(ln_x, dtype=float))

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"entity_id": self.entity_labels(), "period": self.period_labels(), "ln_y": self.ln_y})
        for j, name in enumerate(self.regressor_names):
            frame[name] = self.ln_x[:, j]
        return frame
