"""
Synthetic data-generating process settings.

Settings can be built in code, from the reference preset, or from a
key=value text file such as::

    n_entities=2000
    n_periods=10
    b=0.137,0.208,0.378
    a0=1.485
    sigma_eps=0.3
    missing_rate=0.1
    crash_year=2008
    crash_shock=-0.4
    crash_share=0.5
    seed=7
"""

from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from dotenv import dotenv_values
from pydantic import BaseModel, Field, field_validator, model_validator

REFERENCE_SLOPES = (0.137, 0.208, 0.378)
REFERENCE_INTERCEPT = 1.485
PRESET_WITHIN_SD = 3.0


class CrashScenario(BaseModel):
    year: int
    shock: float
    # 1.0 shifts the whole year's time effect; below 1.0 only that share of firms is hit
    affected_share: float = Field(1.0, gt=0.0, le=1.0)


class SyntheticConfig(BaseModel):
    n_entities: int = Field(200, ge=1)
    n_periods: int = Field(10, ge=1)
    start_year: int = 2004
    b: Tuple[float, float, float] = REFERENCE_SLOPES
    a0: float = REFERENCE_INTERCEPT
    sigma_mu: float = Field(0.5, ge=0.0)
    sigma_gamma: float = Field(0.2, ge=0.0)
    sigma_eps: float = Field(0.3, ge=0.0)
    effect_regressor_corr: float = Field(0.0, ge=-1.0, le=1.0)
    missing_rate: float = Field(0.0, ge=0.0, lt=1.0)
    crash: Optional[CrashScenario] = None
    seed: int = Field(0, ge=0, lt=2 ** 64)
    regressor_means: Tuple[float, float, float] = (-1.0, 0.5, 1.5)
    regressor_between_sd: float = Field(1.0, ge=0.0)
    regressor_within_sd: float = Field(0.3, ge=0.0)
    regressor_ar: float = Field(0.0, gt=-1.0, lt=1.0)
    eps_ar: float = Field(0.0, gt=-1.0, lt=1.0)
    center_entity_effects: bool = False
    currency_code: str = "SYN"

    @field_validator("b", "regressor_means", mode="before")
    @classmethod
    def parse_vector(cls, value: Any):
        if isinstance(value, str):
            return tuple(float(part) for part in value.split(",") if part.strip())
        return value

    @model_validator(mode="before")
    @classmethod
    def collect_crash_keys(cls, data: Any):
        if isinstance(data, dict) and "crash_year" in data:
            data = dict(data)
            year = data.pop("crash_year")
            shock = data.pop("crash_shock", None)
            share = data.pop("crash_share", None)
            if year not in (None, ""):
                crash = {"year": year, "shock": shock if shock not in (None, "") else -0.4}
                if share not in (None, ""):
                    crash["affected_share"] = share
                data["crash"] = crash
        return data

    @model_validator(mode="after")
    def crash_year_in_range(self):
        if self.crash is not None:
            last = self.start_year + self.n_periods - 1
            if not self.start_year <= self.crash.year <= last:
                raise ValueError(f"crash year {self.crash.year} outside {self.start_year}-{last}")
        return self

    @property
    def periods(self) -> Tuple[int, ...]:
        return tuple(range(self.start_year, self.start_year + self.n_periods))

    @classmethod
    def reference_preset(cls, **overrides: Any) -> "SyntheticConfig":
        """
        2,000 firms over ten years with 10% of firm-years missing.

        Regressors vary strongly within firms so that two-way slope estimates
        land within 2% of the true slopes at this size.
        """
        values: Dict[str, Any] = {
            "n_entities": 2000,
            "n_periods": 10,
            "b": REFERENCE_SLOPES,
            "a0": REFERENCE_INTERCEPT,
            "sigma_eps": 0.3,
            "missing_rate": 0.1,
            "regressor_within_sd": PRESET_WITHIN_SD,
        }
        values.update(overrides)
        return cls(**values)

    @staticmethod
    def read_values(path: Union[str, Path]) -> Dict[str, Any]:
        """Raw key=value pairs from a settings file, keys lower-cased."""
        return {
            key.strip().lower(): value
            for key, value in dotenv_values(path).items()
            if value is not None
        }

    @classmethod
    def from_file(cls, path: Union[str, Path], **overrides: Any) -> "SyntheticConfig":
        values = cls.read_values(path)
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)
