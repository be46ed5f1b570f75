"""
Estimation, inference and model-selection result types.

Array-carrying results are frozen dataclasses; scalar records that end up in
reports are pydantic models.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class ModelTag(str, Enum):
    pooled = "pooled"
    fe_individual = "fe_individual"
    fe_time = "fe_time"
    fe_twoway = "fe_twoway"
    re_individual = "re_individual"
    re_time = "re_time"


class EffectsMode(str, Enum):
    individual = "individual"
    time = "time"
    twoway = "twoway"


class CovarianceMethod(str, Enum):
    classical = "classical"
    white_period = "white_period"


FE_TAGS: Dict[EffectsMode, ModelTag] = {
    EffectsMode.individual: ModelTag.fe_individual,
    EffectsMode.time: ModelTag.fe_time,
    EffectsMode.twoway: ModelTag.fe_twoway,
}
RE_TAGS: Dict[EffectsMode, ModelTag] = {
    EffectsMode.individual: ModelTag.re_individual,
    EffectsMode.time: ModelTag.re_time,
}

MODEL_TITLES: Dict[ModelTag, str] = {
    ModelTag.pooled: "Pooled OLS model",
    ModelTag.fe_individual: "Individual fixed effects model",
    ModelTag.fe_time: "Time fixed effects model",
    ModelTag.fe_twoway: "Two-way fixed effects model",
    ModelTag.re_individual: "Individual random effects model",
    ModelTag.re_time: "Time random effects model",
}

NORMALIZATION = "observation_weighted_sum_to_zero"


@dataclass(frozen=True)
class AbsorbedCounts:
    n_entity_effects: int = 0
    n_period_effects: int = 0


@dataclass(frozen=True)
class EffectsDecomposition:
    """
    a0 + mu_i + gamma_t with observation-weighted sum-to-zero effects.

    ``mu`` is indexed like ``entity_ids`` and ``gamma`` like ``period_ids``.
    """
    a0: float
    mu: np.ndarray
    gamma: np.ndarray
    entity_ids: Tuple[str, ...]
    period_ids: Tuple[int, ...]
    entity_counts: np.ndarray
    period_counts: np.ndarray
    normalization: str = NORMALIZATION
    iterations: int = 0

    @property
    def gamma_map(self) -> Dict[int, float]:
        return {period: float(value) for period, value in zip(self.period_ids, self.gamma)}

    @property
    def n_obs(self) -> int:
        return int(self.entity_counts.sum())


@dataclass(frozen=True)
class VarianceComponents:
    sigma_eps2: float
    sigma_mu2: float
    sigma_between2: float
    theta_min: float
    theta_max: float
    theta_mean: float
    floored: bool = False


@dataclass(frozen=True)
class FitResult:
    """
    One estimated panel model.

    ``residuals``/``fitted`` are expressed against the original ln_y.
    ``design``/``design_target``/``design_residuals`` describe the regression
    actually solved (demeaned for FE, quasi-demeaned for RE) and feed the
    covariance estimators; ``params`` follows ``design_names``.
    """
    model_tag: ModelTag
    method: str
    params: np.ndarray
    slopes: np.ndarray
    intercept: Optional[float]
    residuals: np.ndarray
    fitted: np.ndarray
    ssr: float
    df_resid: int
    n_obs: int
    absorbed_counts: AbsorbedCounts
    design: np.ndarray
    design_target: np.ndarray
    design_residuals: np.ndarray
    design_names: Tuple[str, ...]
    regressor_names: Tuple[str, ...]
    effects: Optional[EffectsDecomposition] = None
    variance_components: Optional[VarianceComponents] = None
    flags: Tuple[str, ...] = ()
    iterations: int = 0

    @property
    def coefficients(self) -> Dict[str, float]:
        return {name: float(value) for name, value in zip(self.design_names, self.params)}

    @property
    def k(self) -> int:
        return int(self.slopes.shape[0])


@dataclass(frozen=True)
class CovMatrix:
    matrix: np.ndarray
    method: CovarianceMethod
    names: Tuple[str, ...]
    df_resid: int
    cluster_count: Optional[int] = None
    small_sample_factor: Optional[float] = None

    def block(self, names: Tuple[str, ...]) -> np.ndarray:
        index = [self.names.index(name) for name in names]
        return self.matrix[np.ix_(index, index)]


class CoefficientRow(BaseModel):
    name: str
    estimate: float
    std_error: float = Field(..., gt=0)
    t_stat: float
    p_value: float = Field(..., ge=0.0, le=1.0)


class CoefficientTable(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model_tag: ModelTag
    covariance_method: CovarianceMethod
    df_resid: int
    cluster_count: Optional[int] = None
    small_sample_factor: Optional[float] = None
    rows: List[CoefficientRow] = Field(default_factory=list)

    def row(self, name: str) -> CoefficientRow:
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(name)


class GoodnessOfFit(BaseModel):
    r_squared: float
    adj_r_squared: float
    f_stat: float
    f_df: Tuple[int, int]
    f_pvalue: float = Field(..., ge=0.0, le=1.0)
    n_obs: int


class EffectsSummary(BaseModel):
    """Distribution summary of one effect dimension."""
    dimension: str
    count: int
    mean: float
    std_dev: float
    std_error: float
    minimum: float
    maximum: float


class TestDecision(str, Enum):
    __test__ = False

    reject_null = "reject_null"
    fail_to_reject = "fail_to_reject"


class TestResult(BaseModel):
    __test__ = False  # keep pytest from collecting this model

    name: str
    statistic: float
    df: Union[int, Tuple[int, int]]
    p_value: float = Field(..., ge=0.0, le=1.0)
    decision: TestDecision
    alpha: float = Field(..., gt=0.0, lt=1.0)
    null_hypothesis: str = ""
    flags: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def decision_matches_p_value(self):
        expected = TestDecision.reject_null if self.p_value < self.alpha else TestDecision.fail_to_reject
        if self.decision != expected:
            raise ValueError(f"decision {self.decision.value} inconsistent with p={self.p_value} at alpha={self.alpha}")
        return self

    @property
    def rejected(self) -> bool:
        return self.decision == TestDecision.reject_null


class SelectionStep(BaseModel):
    order: int
    text: str
    cites: List[str] = Field(default_factory=list)


class ModelSelectionReport(BaseModel):
    alpha: float
    selected_model: ModelTag
    tests: List[TestResult] = Field(default_factory=list)
    narrative: List[SelectionStep] = Field(default_factory=list)
    skipped: List[str] = Field(default_factory=list)
    override: bool = False

    @model_validator(mode="after")
    def steps_cite_known_tests(self):
        names = {test.name for test in self.tests}
        for step in self.narrative:
            unknown = [cite for cite in step.cites if cite not in names]
            if unknown:
                raise ValueError(f"step {step.order} cites unknown tests {unknown}")
        return self

    def test(self, name: str) -> TestResult:
        for result in self.tests:
            if result.name == name:
                return result
        raise KeyError(name)
