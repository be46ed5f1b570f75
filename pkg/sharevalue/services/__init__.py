from sharevalue.services.panel_service import load_panel, prepare_sample, write_panel
from sharevalue.services.estimator_service import (
    fit_fixed_effects,
    fit_lsdv,
    fit_pooled_ols,
    fit_random_effects,
    recover_effects,
)
from sharevalue.services.inference_service import covariance, goodness_of_fit, inference_table
from sharevalue.services.selection_service import select_model
from sharevalue.services.synthetic_service import generate_panel
from sharevalue.services.pipeline_service import run_pipeline

__all__ = [
    "load_panel",
    "prepare_sample",
    "write_panel",
    "fit_fixed_effects",
    "fit_lsdv",
    "fit_pooled_ols",
    "fit_random_effects",
    "recover_effects",
    "covariance",
    "goodness_of_fit",
    "inference_table",
    "select_model",
    "generate_panel",
    "run_pipeline",
]
