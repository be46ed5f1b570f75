from sharevalue.schemas.panel import (
    DropRecord,
    EstimationSample,
    PanelDataset,
    PanelSummary,
)
from sharevalue.schemas.estimation import (
    CoefficientRow,
    CoefficientTable,
    CovarianceMethod,
    CovMatrix,
    EffectsDecomposition,
    EffectsMode,
    EffectsSummary,
    FitResult,
    GoodnessOfFit,
    ModelSelectionReport,
    ModelTag,
    TestDecision,
    TestResult,
)
from sharevalue.schemas.analysis import (
    DivergenceReport,
    Histogram,
    HistogramBin,
    ValueKind,
    ValueSeries,
    YearlyMoments,
)
from sharevalue.schemas.synthetic import CrashScenario, SyntheticConfig
from sharevalue.schemas.pipeline import PipelineConfig

__all__ = [
    "DropRecord",
    "EstimationSample",
    "PanelDataset",
    "PanelSummary",
    "CoefficientRow",
    "CoefficientTable",
    "CovarianceMethod",
    "CovMatrix",
    "EffectsDecomposition",
    "EffectsMode",
    "EffectsSummary",
    "FitResult",
    "GoodnessOfFit",
    "ModelSelectionReport",
    "ModelTag",
    "TestDecision",
    "TestResult",
    "DivergenceReport",
    "Histogram",
    "HistogramBin",
    "ValueKind",
    "ValueSeries",
    "YearlyMoments",
    "CrashScenario",
    "SyntheticConfig",
    "PipelineConfig",
]
