"""
Everything one pipeline run hands to the report writer.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import pandas as pd

from sharevalue.schemas.analysis import DivergenceReport, Histogram, ValueSeries
from sharevalue.schemas.estimation import (
    CoefficientTable,
    EffectsDecomposition,
    EffectsSummary,
    GoodnessOfFit,
    ModelSelectionReport,
)
from sharevalue.schemas.panel import PanelSummary


@dataclass(frozen=True)
class FittedModelReport:
    table: CoefficientTable
    goodness: GoodnessOfFit
    role: str = "selected"


@dataclass
class ReportBundle:
    """Computed results; optional parts are simply not rendered."""
    command: str
    currency_code: str
    panel: Optional[PanelSummary] = None
    selection: Optional[ModelSelectionReport] = None
    models: List[FittedModelReport] = field(default_factory=list)
    effects: Optional[EffectsDecomposition] = None
    effects_summaries: List[EffectsSummary] = field(default_factory=list)
    divergence: Optional[ValueSeries] = None
    divergence_report: Optional[DivergenceReport] = None
    entity_effects_histogram: Optional[Histogram] = None
    drop_ledger: Optional[pd.DataFrame] = None
    notes: List[str] = field(default_factory=list)
