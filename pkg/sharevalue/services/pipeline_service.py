"""
Pipeline Service

End-to-end orchestration: ingest -> fit -> select -> fundamentals -> reports,
and the synthetic-data command. Everything is computed before the first file
is written.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from loguru import logger

from sharevalue.exceptions import InvalidArgumentsError
from sharevalue.schemas.estimation import FitResult, ModelSelectionReport, ModelTag
from sharevalue.schemas.panel import EstimationSample, PanelDataset
from sharevalue.schemas.pipeline import PipelineConfig
from sharevalue.schemas.report import FittedModelReport, ReportBundle
from sharevalue.services.estimator_service import effects_summary, fit_model, recover_effects
from sharevalue.services.fundamentals_service import (
    divergence_rates,
    divergence_report,
    fundamentals_series,
    histogram,
)
from sharevalue.services.inference_service import covariance, goodness_of_fit, inference_table
from sharevalue.services.panel_service import (
    drop_ledger_frame,
    load_panel,
    panel_summary,
    prepare_sample,
    write_panel,
)
from sharevalue.services.report_service import ReportService, csv_bytes
from sharevalue.services.selection_service import override_report, run_selection
from sharevalue.services.synthetic_service import TRUTH_FILES, generate_panel, truth_tables
from sharevalue.utils.performance_monitor import StageTimer

COMMANDS = ("fit", "select", "fundamentals", "report", "simulate")
SIMULATED_PANEL_FILE = "panel.csv"


@dataclass
class PipelineResult:
    bundle: Optional[ReportBundle]
    paths: List[Path] = field(default_factory=list)
    exit_code: int = 0


class PanelPipeline:
    """One command-line run over a validated PipelineConfig."""

    def __init__(self, config: PipelineConfig, timer: Optional[StageTimer] = None):
        self.config = config
        self.timer = timer or StageTimer()
        self._fits: Dict[ModelTag, FitResult] = {}

    # ------------------------------------------------------------------
    # stages
    # ------------------------------------------------------------------
    def load(self) -> Tuple[PanelDataset, EstimationSample]:
        if self.config.input_path is None:
            raise InvalidArgumentsError("--input is required for this command")
        with self.timer.track("load"):
            data = load_panel(self.config.input_path, currency_code=self.config.currency_code)
            sample = prepare_sample(data)
        return data, sample

    def fit(self, sample: EstimationSample, model_tag: ModelTag) -> FitResult:
        if model_tag not in self._fits:
            with self.timer.track("fit", model=model_tag.value):
                self._fits[model_tag] = fit_model(sample, model_tag)
        return self._fits[model_tag]

    def select(self, sample: EstimationSample) -> ModelSelectionReport:
        if self.config.model is not None:
            logger.info("Model {} set by override; selection skipped", self.config.model.value)
            return override_report(self.config.model, self.config.alpha)
        with self.timer.track("select"):
            report, fits = run_selection(sample, self.config.alpha, self.config.max_workers)
        self._fits.update(fits)
        return report

    def model_report(self, sample: EstimationSample, model_tag: ModelTag, role: str) -> FittedModelReport:
        fit = self.fit(sample, model_tag)
        with self.timer.track("inference", model=model_tag.value):
            cov = covariance(fit, sample, self.config.robust)
            return FittedModelReport(
                table=inference_table(fit, cov),
                goodness=goodness_of_fit(fit, sample),
                role=role,
            )

    def fundamentals(self, sample: EstimationSample, bundle: ReportBundle) -> None:
        twoway = self.fit(sample, ModelTag.fe_twoway)
        with self.timer.track("fundamentals"):
            effects = recover_effects(sample, twoway)
            divergence = divergence_rates(sample, fundamentals_series(sample, twoway, effects))
            bundle.effects = effects
            bundle.effects_summaries = effects_summary(effects)
            bundle.divergence = divergence
            bundle.divergence_report = divergence_report(
                divergence, effects, self.config.years, self.config.bin_width
            )
            bundle.entity_effects_histogram = histogram(effects.mu, self.config.bin_width, "entity_effects")

    # ------------------------------------------------------------------
    # commands
    # ------------------------------------------------------------------
    def build(self, command: str) -> ReportBundle:
        """Compute the bundle for ``command`` without touching the output directory."""
        if command not in COMMANDS or command == "simulate":
            raise InvalidArgumentsError(f"unknown report command '{command}'")

        data, sample = self.load()
        bundle = ReportBundle(command=command, currency_code=data.currency_code, panel=panel_summary(sample))
        if sample.drop_ledger:
            bundle.drop_ledger = drop_ledger_frame(data, sample)
            bundle.notes.append(f"{len(sample.drop_ledger)} observations dropped for nonpositive values")

        if command == "fit":
            model_tag = self.config.model or ModelTag.fe_twoway
            bundle.models.append(self.model_report(sample, model_tag, "requested"))
            return bundle

        if command in ("select", "report"):
            bundle.selection = self.select(sample)
            selected = bundle.selection.selected_model
            bundle.models.append(self.model_report(sample, selected, "selected"))
            if command == "report" and selected != ModelTag.fe_twoway:
                bundle.models.append(self.model_report(sample, ModelTag.fe_twoway, "fundamentals"))
                bundle.notes.append(
                    f"Selected model is {selected.value}; fundamentals and divergence use the two-way "
                    "fixed effects decomposition"
                )
            if command == "select":
                return bundle

        if command == "fundamentals":
            bundle.models.append(self.model_report(sample, ModelTag.fe_twoway, "fundamentals"))
        self.fundamentals(sample, bundle)
        return bundle

    def run(self, command: str) -> PipelineResult:
        if command == "simulate":
            return self.simulate()
        bundle = self.build(command)
        with self.timer.track("write"):
            paths = ReportService(self.config.out_dir).write(bundle)
        return PipelineResult(bundle=bundle, paths=paths)

    def simulate(self) -> PipelineResult:
        spec = self.config.synthetic
        if spec is None:
            raise InvalidArgumentsError("simulate needs synthetic generator settings")
        with self.timer.track("simulate"):
            panel = generate_panel(spec)
            content = write_panel(panel.dataset)
        files = {SIMULATED_PANEL_FILE: content}
        for key, frame in truth_tables(panel.truth).items():
            files[TRUTH_FILES[key]] = csv_bytes(frame)
        paths = ReportService(self.config.out_dir).write_files(files)
        return PipelineResult(bundle=None, paths=paths)


def run_pipeline(config: PipelineConfig, command: str = "report") -> PipelineResult:
    """
    Run one command and write its artifacts.

    Errors propagate as ShareValueError subclasses carrying the exit code.
    """
    pipeline = PanelPipeline(config)
    result = pipeline.run(command)
    pipeline.timer.log_summary()
    return result
