import os
from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, Field, field_validator

from sharevalue.config import DEFAULT_ALPHA, DEFAULT_BIN_WIDTH, MAX_WORKERS
from sharevalue.schemas.estimation import CovarianceMethod, ModelTag
from sharevalue.schemas.synthetic import SyntheticConfig


class PipelineConfig(BaseModel):
    """Options for one command line run."""
    input_path: Optional[Path] = None
    out_dir: Path
    model: Optional[ModelTag] = None
    robust: CovarianceMethod = CovarianceMethod.white_period
    alpha: float = Field(DEFAULT_ALPHA, gt=0.0, lt=1.0)
    bin_width: float = Field(DEFAULT_BIN_WIDTH, gt=0.0)
    years: Optional[List[int]] = None
    currency_code: Optional[str] = None
    max_workers: int = Field(MAX_WORKERS, ge=1)
    synthetic: Optional[SyntheticConfig] = None

    @field_validator("out_dir")
    @classmethod
    def out_dir_writable(cls, value: Path) -> Path:
        # the directory may not exist yet; its nearest existing ancestor must be writable
        ancestor = value
        while not ancestor.exists():
            if ancestor.parent == ancestor:
                break
            ancestor = ancestor.parent
        if ancestor.exists() and not ancestor.is_dir():
            raise ValueError(f"{ancestor} is not a directory")
        if not os.access(ancestor, os.W_OK):
            raise ValueError(f"output directory {value} is not writable")
        return value
