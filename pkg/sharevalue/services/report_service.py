"""
Report Service

Renders a ReportBundle into text tables, CSV plot data and a line-oriented
JSON file, then moves them into the output directory in one step.

Output is a pure function of the bundle: no timestamps, floats written with
their shortest round-trip representation.
"""

import json
import math
import os
import shutil
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import pandas as pd
from loguru import logger

from sharevalue.config import REPORT_FORMAT_VERSION
from sharevalue.schemas.analysis import Histogram
from sharevalue.schemas.estimation import MODEL_TITLES, ModelSelectionReport
from sharevalue.schemas.panel import DEPENDENT_NAME
from sharevalue.schemas.report import FittedModelReport, ReportBundle

REPORT_FORMAT = "sharevalue-report"

SELECTION_FILE = "model_selection.txt"
COEFFICIENTS_FILE = "coefficients.txt"
ENTITY_EFFECTS_FILE = "entity_effects.csv"
PERIOD_EFFECTS_FILE = "period_effects.csv"
DIVERGENCE_FILE = "divergence.csv"
YEARLY_STATS_FILE = "yearly_stats.txt"
MEAN_DIVERGENCE_FILE = "mean_divergence.csv"
ENTITY_EFFECTS_HIST_FILE = "entity_effects_hist.csv"
DROP_LEDGER_FILE = "drop_ledger.csv"
JSONL_FILE = "report.jsonl"
HISTOGRAM_DIR = "histograms"


def _stars(p_value: float) -> str:
    if p_value < 0.01:
        return "***"
    if p_value < 0.05:
        return "**"
    if p_value < 0.1:
        return "*"
    return ""


def _fmt(value: Optional[float], spec: str = ".6f") -> str:
    if value is None:
        return "n/a"
    return format(value, spec)


def _df_text(df) -> str:
    if isinstance(df, (tuple, list)):
        return f"({df[0]}, {df[1]})"
    return str(df)


def _jsonable(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, dict):
        return {key: _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    return value


def csv_bytes(frame: pd.DataFrame) -> bytes:
    return frame.to_csv(index=False, lineterminator="\n").encode("utf-8")


def histogram_frame(hist: Histogram) -> pd.DataFrame:
    return pd.DataFrame({
        "bin_left": [b.bin_left for b in hist.bins],
        "bin_right": [b.bin_right for b in hist.bins],
        "rel_freq": [b.relative_frequency for b in hist.bins],
    })


# ----------------------------------------------------------------------
# Text renderers
# ----------------------------------------------------------------------
def render_selection(report: ModelSelectionReport) -> str:
    lines = [
        f"Model selection (alpha = {report.alpha})",
        f"Selected model: {report.selected_model.value}",
    ]
    if report.override:
        lines.append("Selection overridden from the command line; tests not run")
    if report.tests:
        lines += ["", "Tests", f"{'name':<34}{'statistic':>16}  {'df':<14}{'p-value':>14}  decision"]
        for test in report.tests:
            flags = f"  [{', '.join(test.flags)}]" if test.flags else ""
            lines.append(
                f"{test.name:<34}{test.statistic:>16.6f}  {_df_text(test.df):<14}"
                f"{test.p_value:>14.6g}  {test.decision.value}{flags}"
            )
    if report.narrative:
        lines += ["", "Decision steps"]
        lines += [f"{step.order:>2}. {step.text}" for step in report.narrative]
    if report.skipped:
        lines += ["", "Skipped"]
        lines += [f" - {item}" for item in report.skipped]
    return "\n".join(lines) + "\n"


def render_coefficients(models: List[FittedModelReport], bundle: ReportBundle) -> str:
    lines: List[str] = []
    for model in models:
        table, goodness = model.table, model.goodness
        if lines:
            lines.append("")
        lines += [
            f"{MODEL_TITLES[table.model_tag]} ({model.role})",
            f"Dependent variable: {DEPENDENT_NAME} (currency {bundle.currency_code})",
        ]
        covariance = f"Covariance: {table.covariance_method.value}"
        if table.cluster_count is not None:
            covariance += f" (clusters: {table.cluster_count}, small-sample factor {table.small_sample_factor:.6f})"
        lines += [covariance, f"Residual degrees of freedom: {table.df_resid}", ""]
        lines.append(f"{'Variable':<20}{'Coefficient':>14}   {'t-stat':>10}  {'p-value':>10}")
        for row in table.rows:
            lines.append(
                f"{row.name:<20}{row.estimate:>14.6f}{_stars(row.p_value):<3}"
                f"{row.t_stat:>10.3f}  {row.p_value:>10.4g}"
            )
            lines.append(f"{'':<20}{'(' + format(row.std_error, '.6f') + ')':>15}")
        lines += [
            "",
            f"{'R-squared':<20}{goodness.r_squared:>14.6f}",
            f"{'Adjusted R-squared':<20}{goodness.adj_r_squared:>14.6f}",
            f"{'F statistic':<20}{goodness.f_stat:>14.4f}  {_df_text(goodness.f_df)}  p = {goodness.f_pvalue:.4g}",
            f"{'Observations':<20}{goodness.n_obs:>14d}",
        ]
    if bundle.effects_summaries:
        lines += ["", "Fixed effects (observation-weighted sum to zero)",
                  f"{'dimension':<12}{'count':>7}{'mean':>12}{'std dev':>12}{'std error':>12}{'min':>12}{'max':>12}"]
        for summary in bundle.effects_summaries:
            lines.append(
                f"{summary.dimension:<12}{summary.count:>7d}{summary.mean:>12.6f}{summary.std_dev:>12.6f}"
                f"{summary.std_error:>12.6f}{summary.minimum:>12.6f}{summary.maximum:>12.6f}"
            )
    lines.append("*** p<0.01, ** p<0.05, * p<0.1; standard errors in parentheses")
    return "\n".join(lines) + "\n"


def render_yearly_stats(bundle: ReportBundle) -> str:
    report = bundle.divergence_report
    lines = [
        "Divergence rate statistics by year (log units)",
        f"Moments: {report.moment_convention}; excess kurtosis = kurtosis - 3",
        f"{'Year':<6}{'Mean':>11}{'Std. Dev.':>11}{'Kurtosis':>11}{'Excess':>11}{'Skewness':>11}"
        f"{'Share>0':>9}{'Observations':>14}  note",
    ]
    for row in report.yearly:
        lines.append(
            f"{row.year:<6}{_fmt(row.mean):>11}{_fmt(row.std_dev):>11}{_fmt(row.raw_kurtosis, '.4f'):>11}"
            f"{_fmt(row.excess_kurtosis, '.4f'):>11}{_fmt(row.skewness, '.4f'):>11}"
            f"{_fmt(row.share_positive, '.4f'):>9}{row.n_obs:>14d}  {row.flag or ''}".rstrip()
        )
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------
# Service
# ----------------------------------------------------------------------
class ReportService:
    """Builds and atomically writes report bundles."""

    def __init__(self, out_dir: Union[str, Path]):
        """
        Args:
            out_dir: Destination directory (created when missing)
        """
        self.out_dir = Path(out_dir)

    def jsonl_records(self, bundle: ReportBundle) -> List[Dict[str, Any]]:
        records: List[Dict[str, Any]] = [{
            "format": REPORT_FORMAT,
            "version": REPORT_FORMAT_VERSION,
            "command": bundle.command,
            "currency": bundle.currency_code,
        }]
        if bundle.panel is not None:
            records.append({"record": "panel", **bundle.panel.model_dump(mode="json")})
        if bundle.selection is not None:
            selection = bundle.selection
            records.append({
                "record": "selection",
                "alpha": selection.alpha,
                "selected_model": selection.selected_model.value,
                "override": selection.override,
                "skipped": selection.skipped,
            })
            records += [{"record": "test", **test.model_dump(mode="json")} for test in selection.tests]
            records += [{"record": "step", **step.model_dump(mode="json")} for step in selection.narrative]
        for model in bundle.models:
            records.append({
                "record": "model",
                "role": model.role,
                **model.table.model_dump(mode="json", exclude={"rows"}),
                "goodness_of_fit": model.goodness.model_dump(mode="json"),
            })
            records += [
                {"record": "coefficient", "model_tag": model.table.model_tag.value, **row.model_dump(mode="json")}
                for row in model.table.rows
            ]
        if bundle.effects is not None:
            records.append({"record": "effects", "a0": bundle.effects.a0,
                            "normalization": bundle.effects.normalization})
        records += [{"record": "effects_summary", **s.model_dump(mode="json")} for s in bundle.effects_summaries]
        if bundle.divergence_report is not None:
            report = bundle.divergence_report
            records.append({"record": "divergence_meta", "bin_width": report.bin_width,
                            "moment_convention": report.moment_convention})
            records += [{"record": "yearly", **row.model_dump(mode="json")} for row in report.yearly]
            records += [{"record": "mean_divergence", **point.model_dump(mode="json")} for point in report.mean_series]
            records += [{"record": "histogram", **hist.model_dump(mode="json")} for hist in report.histograms]
        if bundle.entity_effects_histogram is not None:
            records.append({"record": "entity_effects_histogram",
                            **bundle.entity_effects_histogram.model_dump(mode="json")})
        records += [{"record": "note", "text": note} for note in bundle.notes]
        return records

    def render(self, bundle: ReportBundle) -> Dict[str, bytes]:
        """Relative file path -> content for every artifact the bundle supports."""
        files: Dict[str, bytes] = {}
        if bundle.selection is not None:
            files[SELECTION_FILE] = render_selection(bundle.selection).encode("utf-8")
        if bundle.models:
            files[COEFFICIENTS_FILE] = render_coefficients(bundle.models, bundle).encode("utf-8")

        effects = bundle.effects
        if effects is not None:
            files[ENTITY_EFFECTS_FILE] = csv_bytes(pd.DataFrame({
                "entity_id": list(effects.entity_ids), "mu": effects.mu, "n_obs": effects.entity_counts,
            }))
            files[PERIOD_EFFECTS_FILE] = csv_bytes(pd.DataFrame({
                "year": list(effects.period_ids), "gamma": effects.gamma, "n_obs": effects.period_counts,
            }))
        if bundle.divergence is not None:
            files[DIVERGENCE_FILE] = csv_bytes(bundle.divergence.to_frame())
        if bundle.divergence_report is not None:
            report = bundle.divergence_report
            files[YEARLY_STATS_FILE] = render_yearly_stats(bundle).encode("utf-8")
            for hist in report.histograms:
                files[f"{HISTOGRAM_DIR}/divergence_hist_{hist.label}.csv"] = csv_bytes(histogram_frame(hist))
            files[MEAN_DIVERGENCE_FILE] = csv_bytes(pd.DataFrame(
                [point.model_dump() for point in report.mean_series],
                columns=["year", "mean_divergence", "time_effect"],
            ))
        if bundle.entity_effects_histogram is not None:
            files[ENTITY_EFFECTS_HIST_FILE] = csv_bytes(histogram_frame(bundle.entity_effects_histogram))
        if bundle.drop_ledger is not None:
            files[DROP_LEDGER_FILE] = csv_bytes(bundle.drop_ledger)

        lines = [json.dumps(_jsonable(record), ensure_ascii=False) for record in self.jsonl_records(bundle)]
        files[JSONL_FILE] = ("\n".join(lines) + "\n").encode("utf-8")
        return files

    def write_files(self, files: Dict[str, bytes]) -> List[Path]:
        """
        Stage every file in a temporary directory inside ``out_dir`` and move
        each into place.

        Files a previous run left at a target are set aside in the staging
        directory first. If any move fails, targets already replaced get their
        previous content back and new targets are removed.
        """
        self.out_dir.mkdir(parents=True, exist_ok=True)
        staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=self.out_dir))
        previous = staging / ".previous"
        moved: List[Path] = []
        try:
            for relative, content in files.items():
                staged = staging / relative
                staged.parent.mkdir(parents=True, exist_ok=True)
                staged.write_bytes(content)
            for relative in files:
                target = self.out_dir / relative
                target.parent.mkdir(parents=True, exist_ok=True)
                if target.exists():
                    backup = previous / relative
                    backup.parent.mkdir(parents=True, exist_ok=True)
                    os.rename(target, backup)
                os.replace(staging / relative, target)
                moved.append(target)
        except OSError:
            self._roll_back(moved, previous)
            raise
        finally:
            shutil.rmtree(staging, ignore_errors=True)

        logger.info("Wrote {} report files to {}", len(moved), self.out_dir)
        return moved

    def _roll_back(self, moved: List[Path], previous: Path) -> None:
        restored = removed = 0
        for target in moved:
            backup = previous / target.relative_to(self.out_dir)
            target.unlink(missing_ok=True)
            if backup.exists():
                os.rename(backup, target)
                restored += 1
            else:
                removed += 1
        # a target set aside but never replaced
        leftovers = sorted(path for path in previous.rglob("*") if path.is_file()) if previous.exists() else []
        for backup in leftovers:
            target = self.out_dir / backup.relative_to(previous)
            if not target.exists():
                os.rename(backup, target)
                restored += 1
        logger.error(
            "Report write failed after replacing {}; restored {} previous files, removed {} new files",
            ", ".join(str(path.relative_to(self.out_dir)) for path in moved) or "nothing", restored, removed,
        )

    def write(self, bundle: ReportBundle) -> List[Path]:
        return self.write_files(self.render(bundle))
