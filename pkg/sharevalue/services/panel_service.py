"""
Panel Service

Loading, validation and log transformation of firm-year panel data.

Input contract: UTF-8 comma-separated text with header
``entity_id,year,price,dps,cfps,bvps`` (an optional ``currency`` column may
declare the single currency of the monetary columns), ``.`` decimal point and
no thousands separators.
"""

import io
from pathlib import Path
from typing import BinaryIO, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger

from sharevalue.config import DEFAULT_CURRENCY
from sharevalue.exceptions import (
    CurrencyMismatchError,
    DuplicateKeyError,
    EmptySampleError,
    MissingColumnError,
    PanelFormatError,
)
from sharevalue.schemas.panel import (
    FILE_COLUMNS,
    NONPOSITIVE_REASON,
    VALUE_COLUMNS,
    DropRecord,
    EstimationSample,
    PanelDataset,
    PanelSummary,
)

CURRENCY_COLUMN = "currency"
# First data row sits on file line 2
HEADER_OFFSET = 2

Source = Union[bytes, str, Path, BinaryIO]


def _read_text(source: Source) -> str:
    if isinstance(source, (str, Path)):
        try:
            raw = Path(source).read_bytes()
        except OSError as exc:
            raise PanelFormatError(f"cannot read {source}: {exc.strerror or exc}") from exc
    elif isinstance(source, (bytes, bytearray)):
        raw = bytes(source)
    else:
        raw = source.read()
    if isinstance(raw, str):
        return raw
    try:
        return raw.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise PanelFormatError(f"input is not valid UTF-8 ({exc.reason} at byte {exc.start})") from exc


def _parse_numeric(frame: pd.DataFrame, column: str, issues: List[Dict], integer: bool = False) -> pd.Series:
    text = frame[column].str.strip()
    values = pd.to_numeric(text, errors="coerce")
    bad = values.isna() | ~np.isfinite(values.astype(float))
    if integer:
        bad |= values.notna() & (values != np.floor(values))
    for position in np.flatnonzero(bad.to_numpy()):
        issues.append({
            "row": int(position) + HEADER_OFFSET,
            "column": column,
            "value": frame[column].iloc[position],
        })
    return values


def load_panel(
    source: Source,
    currency_code: Optional[str] = None,
    period_range: Optional[Tuple[int, int]] = None,
) -> PanelDataset:
    """
    Parse delimited firm-year text into a PanelDataset.

    Args:
        source: Raw bytes, a binary stream, or a path to the file
        currency_code: Declared currency; must match a ``currency`` column when one is present
        period_range: Declared (t_min, t_max); inferred from the data when omitted

    Returns:
        PanelDataset with one observation per data row, in file order

    Raises:
        MissingColumnError: a required header column is absent
        DuplicateKeyError: an (entity_id, year) pair repeats
        PanelFormatError: malformed cells, listed with row number and column
    """
    text = _read_text(source)
    if not text.strip():
        raise PanelFormatError("empty input: a header row is required")

    try:
        frame = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False, sep=",")
    except pd.errors.ParserError as exc:
        raise PanelFormatError(f"malformed delimited text: {exc}") from exc

    frame.columns = [str(column).strip() for column in frame.columns]
    for column in FILE_COLUMNS:
        if column not in frame.columns:
            raise MissingColumnError(column)

    issues: List[Dict] = []
    entity = frame["entity_id"].str.strip()
    for position in np.flatnonzero((entity == "").to_numpy()):
        issues.append({"row": int(position) + HEADER_OFFSET, "column": "entity_id", "value": ""})

    period = _parse_numeric(frame, "year", issues, integer=True)
    numeric = {name: _parse_numeric(frame, header, issues) for header, name in FILE_COLUMNS.items()
               if name in VALUE_COLUMNS}

    if issues:
        issues.sort(key=lambda issue: (issue["row"], issue["column"]))
        raise PanelFormatError("malformed cells", issues)

    currency = _resolve_currency(frame, currency_code)

    parsed = pd.DataFrame({"entity_id": entity.astype(str), "period": period.astype(np.int64)})
    for name in VALUE_COLUMNS:
        parsed[name] = numeric[name].astype(float)

    duplicated = parsed.duplicated(["entity_id", "period"], keep=False)
    if duplicated.any():
        first_key = parsed.loc[duplicated, ["entity_id", "period"]].iloc[0]
        clash = parsed.index[
            (parsed["entity_id"] == first_key["entity_id"]) & (parsed["period"] == first_key["period"])
        ]
        rows = [int(position) + HEADER_OFFSET for position in clash[:2]]
        raise DuplicateKeyError(first_key["entity_id"], int(first_key["period"]), rows)

    if period_range is None:
        period_range = (int(parsed["period"].min()), int(parsed["period"].max())) if len(parsed) else (0, 0)
    else:
        low, high = int(period_range[0]), int(period_range[1])
        outside = ~parsed["period"].between(low, high)
        if outside.any():
            raise PanelFormatError(
                f"periods outside declared range {low}-{high}",
                [{"row": int(position) + HEADER_OFFSET, "column": "year", "value": frame["year"].iloc[position]}
                 for position in np.flatnonzero(outside.to_numpy())],
            )
        period_range = (low, high)

    logger.info("Loaded panel: {} observations, {} entities, periods {}-{}",
                len(parsed), parsed["entity_id"].nunique(), period_range[0], period_range[1])
    return PanelDataset(frame=parsed.reset_index(drop=True), currency_code=currency, period_range=period_range)


def _resolve_currency(frame: pd.DataFrame, declared: Optional[str]) -> str:
    if CURRENCY_COLUMN not in frame.columns:
        return declared or DEFAULT_CURRENCY
    codes = sorted({code.strip() for code in frame[CURRENCY_COLUMN] if code.strip()})
    if len(codes) > 1:
        raise CurrencyMismatchError(f"monetary columns mix currencies {codes}; convert upstream")
    found = codes[0] if codes else (declared or DEFAULT_CURRENCY)
    if declared and found != declared:
        raise CurrencyMismatchError(f"input currency {found} does not match declared {declared}")
    return found


def write_panel(dataset: PanelDataset, include_currency: bool = False) -> bytes:
    """
    Serialize a dataset back to the input format.

    The file has no place for a declared period range, so only the observed
    years survive; pass ``period_range`` to ``load_panel`` to restore a wider
    declaration.
    """
    inverse = {name: header for header, name in FILE_COLUMNS.items()}
    frame = dataset.frame.rename(columns=inverse)[list(FILE_COLUMNS)]
    if include_currency:
        frame = frame.assign(**{CURRENCY_COLUMN: dataset.currency_code})
    return frame.to_csv(index=False, lineterminator="\n").encode("utf-8")


def index_sample(
    entity_labels: np.ndarray,
    period_labels: np.ndarray,
    ln_y: np.ndarray,
    ln_x: np.ndarray,
    drop_ledger: Tuple[DropRecord, ...] = (),
    source_obs: Optional[int] = None,
) -> EstimationSample:
    """Build sorted entity/period index maps and order rows by (entity, period)."""
    entity_labels = np.asarray(entity_labels, dtype=object)
    period_labels = np.asarray(period_labels, dtype=np.int64)
    entity_ids = tuple(sorted(set(entity_labels.tolist())))
    period_ids = tuple(int(p) for p in np.unique(period_labels))

    entity_index = pd.Index(entity_ids, dtype=object).get_indexer(entity_labels)
    period_index = pd.Index(period_ids, dtype=np.int64).get_indexer(period_labels)
    order = np.lexsort((period_index, entity_index))

    return EstimationSample(
        entity_index=entity_index[order].astype(np.int64),
        period_index=period_index[order].astype(np.int64),
        ln_y=np.asarray(ln_y, dtype=float)[order],
        ln_x=np.asarray(ln_x, dtype=float)[order],
        entity_ids=entity_ids,
        period_ids=period_ids,
        drop_ledger=tuple(drop_ledger),
        source_obs=len(order) + len(drop_ledger) if source_obs is None else source_obs,
    )


def reindex_sample(sample: EstimationSample) -> EstimationSample:
    """Re-run the index-building step on an existing sample (a no-op on prepared samples)."""
    return index_sample(
        sample.entity_labels(),
        sample.period_labels(),
        sample.ln_y,
        sample.ln_x,
        sample.drop_ledger,
        sample.source_obs,
    )


def prepare_sample(data: PanelDataset) -> EstimationSample:
    """
    Log-transform price and the three per-share indicators.

    Rows with any non-positive value cannot be logged; they move to the drop
    ledger with reason "nonpositive value" instead of being imputed.
    """
    if data.n_obs == 0:
        raise EmptySampleError("panel dataset has no observations")

    frame = data.frame
    values = frame[list(VALUE_COLUMNS)].to_numpy(dtype=float)
    nonpositive = (values <= 0).any(axis=1)

    dropped = frame.loc[nonpositive, ["entity_id", "period"]].sort_values(["entity_id", "period"])
    ledger = tuple(
        DropRecord(entity_id=str(entity), period=int(period), reason=NONPOSITIVE_REASON)
        for entity, period in dropped.itertuples(index=False, name=None)
    )
    if len(ledger) == data.n_obs:
        raise EmptySampleError(f"all {data.n_obs} observations dropped (nonpositive values)")

    kept = frame.loc[~nonpositive]
    logs = np.log(kept[list(VALUE_COLUMNS)].to_numpy(dtype=float))
    if ledger:
        logger.warning("Dropped {} of {} observations with nonpositive values", len(ledger), data.n_obs)

    return index_sample(
        kept["entity_id"].to_numpy(dtype=object),
        kept["period"].to_numpy(dtype=np.int64),
        logs[:, 0],
        logs[:, 1:],
        ledger,
        data.n_obs,
    )


def panel_summary(sample: EstimationSample) -> PanelSummary:
    if sample.n_obs == 0:
        raise EmptySampleError("estimation sample is empty")
    entity_counts = sample.entity_counts
    period_counts = sample.period_counts
    return PanelSummary(
        n_entities=sample.n_entities,
        n_periods=sample.n_periods,
        n_obs=sample.n_obs,
        is_balanced=bool(np.all(entity_counts == sample.n_periods)),
        per_period_counts={int(p): int(c) for p, c in zip(sample.period_ids, period_counts)},
    )


def drop_ledger_frame(data: PanelDataset, sample: EstimationSample) -> pd.DataFrame:
    """Dropped source rows in the input layout plus a ``reason`` column."""
    inverse = {name: header for header, name in FILE_COLUMNS.items()}
    ledger = pd.DataFrame(
        [(record.entity_id, record.period, record.reason) for record in sample.drop_ledger],
        columns=["entity_id", "period", "reason"],
    )
    merged = ledger.merge(data.frame, on=["entity_id", "period"], how="left")
    merged = merged.rename(columns=inverse)
    return merged[list(FILE_COLUMNS) + ["reason"]]

