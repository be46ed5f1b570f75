"""
Fundamentals Service

Theoretical value ln Y^ = a0 + mu_i + gamma_t + b'ln X, fundamentals
ln Y~ = ln Y^ - gamma_t, divergence D = ln Y - ln Y~, yearly moment table,
histogram export and the mean-divergence time series.
"""

from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from loguru import logger
from scipy.signal import find_peaks

from sharevalue.config import DEFAULT_BIN_WIDTH, MOMENT_CHUNK_SIZE
from sharevalue.exceptions import AlignmentError, EmptyExportError
from sharevalue.schemas.analysis import (
    DivergenceReport,
    Histogram,
    HistogramBin,
    MeanDivergencePoint,
    ValueKind,
    ValueSeries,
    YearlyMoments,
)
from sharevalue.schemas.estimation import EffectsDecomposition, FitResult
from sharevalue.schemas.panel import EstimationSample
from sharevalue.utils.moments import MomentAccumulator

INSUFFICIENT_FLAG = "insufficient_observations"
ZERO_VARIANCE_FLAG = "zero_variance"
# Relative scale below which a year's spread counts as zero
ZERO_VARIANCE_SCALE = 1e-12
DEFAULT_PROMINENCE = 0.2


def _positions(labels: np.ndarray, ids: Sequence, what: str) -> np.ndarray:
    positions = pd.Index(list(ids)).get_indexer(labels)
    missing = np.flatnonzero(positions < 0)
    if missing.size:
        shown = sorted({str(labels[i]) for i in missing[:5]})
        raise AlignmentError(f"{what} {', '.join(shown)} missing from the effects decomposition")
    return positions


def _components(sample: EstimationSample, fit: FitResult, effects: EffectsDecomposition):
    if np.asarray(fit.slopes).shape[0] != sample.k:
        raise AlignmentError(f"fit has {np.asarray(fit.slopes).shape[0]} slopes, sample has {sample.k} regressors")
    mu = effects.mu[_positions(sample.entity_labels(), effects.entity_ids, "entity")]
    gamma = effects.gamma[_positions(sample.period_labels(), effects.period_ids, "period")]
    return mu, gamma, sample.ln_x @ np.asarray(fit.slopes, dtype=float)


def _series(sample: EstimationSample, kind: ValueKind, values: np.ndarray) -> ValueSeries:
    return ValueSeries(
        kind=kind,
        entity_index=sample.entity_index,
        period_index=sample.period_index,
        values=np.asarray(values, dtype=float),
        entity_ids=sample.entity_ids,
        period_ids=sample.period_ids,
    )


def theoretical_value(sample: EstimationSample, fit: FitResult, effects: EffectsDecomposition) -> ValueSeries:
    """ln Y^_it = a0 + mu_i + gamma_t + b'ln X_it on the sample's rows."""
    mu, gamma, xb = _components(sample, fit, effects)
    return _series(sample, ValueKind.theoretical, effects.a0 + mu + gamma + xb)


def fundamentals_series(sample: EstimationSample, fit: FitResult, effects: EffectsDecomposition) -> ValueSeries:
    """The theoretical value with the time effect removed: a0 + mu_i + b'ln X_it."""
    mu, _, xb = _components(sample, fit, effects)
    return _series(sample, ValueKind.fundamentals, effects.a0 + mu + xb)


def divergence_rates(sample: EstimationSample, fundamentals: ValueSeries) -> ValueSeries:
    """
    D_it = ln Y_it - ln Y~_it, which equals gamma_t + e_it.

    Raises:
        AlignmentError: the series does not cover exactly the sample's rows
    """
    if fundamentals.n_obs != sample.n_obs:
        raise AlignmentError(f"fundamentals have {fundamentals.n_obs} rows, sample has {sample.n_obs}")
    if not (
        np.array_equal(fundamentals.entity_labels(), sample.entity_labels())
        and np.array_equal(fundamentals.period_labels(), sample.period_labels())
    ):
        raise AlignmentError("fundamentals rows are not aligned with the estimation sample")
    return _series(sample, ValueKind.divergence, sample.ln_y - fundamentals.values)


def _year_groups(series: ValueSeries, years: Optional[Sequence[int]] = None) -> Dict[int, np.ndarray]:
    labels = series.period_labels()
    selected = sorted(set(labels.tolist())) if years is None else sorted(set(int(y) for y in years))
    return {year: series.values[labels == year] for year in selected}


def yearly_divergence_stats(
    divergence: ValueSeries,
    chunk_size: int = MOMENT_CHUNK_SIZE,
) -> List[YearlyMoments]:
    """
    Mean, std dev (n-1), skewness, raw and excess kurtosis (n-denominator
    central moments) and share of positive divergence per year, sorted by year.

    Years with fewer than two observations are flagged with their moments
    omitted; years without spread report std 0 and flag the shape moments.
    """
    rows: List[YearlyMoments] = []
    for year, values in _year_groups(divergence).items():
        acc = MomentAccumulator().update(values, chunk_size)
        if acc.n < 2:
            rows.append(YearlyMoments(
                year=year, n_obs=acc.n,
                mean=acc.mean if acc.n else None,
                flag=INSUFFICIENT_FLAG,
            ))
            continue

        share_positive = float(np.mean(values > 0))
        spread = ZERO_VARIANCE_SCALE * max(1.0, abs(acc.mean))
        if acc.central_moment(2) <= spread * spread:
            rows.append(YearlyMoments(
                year=year, n_obs=acc.n, mean=acc.mean, std_dev=0.0,
                share_positive=share_positive, flag=ZERO_VARIANCE_FLAG,
            ))
            continue

        rows.append(YearlyMoments(
            year=year,
            n_obs=acc.n,
            mean=acc.mean,
            std_dev=acc.std_dev,
            skewness=acc.skewness,
            raw_kurtosis=acc.raw_kurtosis,
            excess_kurtosis=acc.excess_kurtosis,
            share_positive=share_positive,
        ))
    return rows


def histogram(values: np.ndarray, bin_width: float, label: str) -> Histogram:
    """Relative frequencies on bins [j*w, (j+1)*w) covering [min, max]."""
    if not bin_width > 0:
        raise ValueError(f"bin_width must be positive, got {bin_width}")
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise EmptyExportError(f"no observations for histogram '{label}'")

    index = np.floor(values / bin_width).astype(np.int64)
    low = int(index.min())
    counts = np.bincount(index - low)
    frequencies = counts / values.size
    bins = [
        HistogramBin(
            bin_left=(low + j) * bin_width,
            bin_right=(low + j + 1) * bin_width,
            relative_frequency=float(frequency),
        )
        for j, frequency in enumerate(frequencies)
    ]
    return Histogram(label=label, bin_width=bin_width, n_obs=int(values.size), bins=bins)


def distribution_export(
    divergence: ValueSeries,
    years: Optional[Sequence[int]] = None,
    bin_width: float = DEFAULT_BIN_WIDTH,
) -> List[Histogram]:
    """
    One divergence histogram per selected year (all years by default).

    Raises:
        EmptyExportError: empty selection, or a selected year without observations
    """
    if not bin_width > 0:
        raise ValueError(f"bin_width must be positive, got {bin_width}")
    if years is not None and len(years) == 0:
        raise EmptyExportError("no years selected for histogram export")

    groups = _year_groups(divergence, years)
    if not groups:
        raise EmptyExportError("divergence series has no observations")
    empty = [year for year, values in groups.items() if values.size == 0]
    if empty:
        raise EmptyExportError(f"no observations for selected years {empty}")
    return [histogram(values, bin_width, str(year)) for year, values in groups.items()]


def histogram_modes(hist: Histogram, prominence: float = DEFAULT_PROMINENCE) -> int:
    """Number of local maxima whose prominence exceeds ``prominence`` x the tallest bin."""
    frequencies = hist.frequencies
    if frequencies.size == 0:
        return 0
    padded = np.concatenate([[0.0], frequencies, [0.0]])
    peaks, _ = find_peaks(padded, prominence=prominence * float(frequencies.max()))
    return int(peaks.size)


def mean_divergence_series(divergence: ValueSeries, effects: EffectsDecomposition) -> List[MeanDivergencePoint]:
    """Yearly mean divergence next to the estimated time effect."""
    gamma = effects.gamma_map
    points = []
    for year, values in _year_groups(divergence).items():
        if year not in gamma:
            raise AlignmentError(f"period {year} missing from the effects decomposition")
        points.append(MeanDivergencePoint(year=year, mean_divergence=float(values.mean()), time_effect=gamma[year]))
    return points


def divergence_report(
    divergence: ValueSeries,
    effects: EffectsDecomposition,
    years: Optional[Sequence[int]] = None,
    bin_width: float = DEFAULT_BIN_WIDTH,
) -> DivergenceReport:
    yearly = yearly_divergence_stats(divergence)
    histograms = distribution_export(divergence, years, bin_width)
    for hist in histograms:
        logger.debug("Divergence histogram {}: {} bins, {} mode(s)", hist.label, len(hist.bins), histogram_modes(hist))
    return DivergenceReport(
        yearly=yearly,
        histograms=histograms,
        mean_series=mean_divergence_series(divergence, effects),
        bin_width=bin_width,
    )
