"""CSV ingestion into validated subject records."""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from survival.errors import IngestError
from survival.records import SubjectRecord
from .config import CovariateSchema, DataSchema

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ValidationReport:
    n_rows: int
    n_records: int
    n_trial: int
    n_external: int
    dropped: Dict[str, int] = field(default_factory=dict)
    flagged: Dict[str, int] = field(default_factory=dict)

    @property
    def n_flagged(self) -> int:
        return sum(self.flagged.values())

    def to_dict(self) -> Dict:
        return {"rows": self.n_rows, "records": self.n_records, "trial": self.n_trial,
                "external": self.n_external, "dropped": dict(self.dropped),
                "flagged": dict(self.flagged)}


@dataclass(frozen=True)
class IngestResult:
    records: List[SubjectRecord]
    covariate_names: Tuple[str, ...]
    report: ValidationReport


def _numeric(frame: pd.DataFrame, column: str, rows: np.ndarray) -> np.ndarray:
    """Parse a column as floats; the first bad cell is reported with its 1-based data row."""
    values = pd.to_numeric(frame[column].str.strip(), errors="coerce").to_numpy(float)
    bad = np.flatnonzero(np.isnan(values) & rows)
    if bad.size:
        raise IngestError(f"cannot parse {column}={frame[column].iloc[bad[0]]!r} as a number",
                          int(bad[0]) + 1)
    return values


def _expand(frame: pd.DataFrame, covariate: CovariateSchema, rows: np.ndarray) -> np.ndarray:
    column = covariate.source_column
    if covariate.kind != "categorical":
        values = _numeric(frame, column, rows)
        if covariate.kind == "binary":
            bad = np.flatnonzero(rows & ~np.isin(values, (0.0, 1.0)))
            if bad.size:
                raise IngestError(f"{column} must be 0 or 1, got {frame[column].iloc[bad[0]]!r}",
                                  int(bad[0]) + 1)
        return values[:, None]
    labels = frame[column].str.strip()
    unknown = np.flatnonzero(rows & ~labels.isin(covariate.levels).to_numpy())
    if unknown.size:
        raise IngestError(f"unknown {column} level {labels.iloc[unknown[0]]!r} "
                          f"(expected one of {', '.join(covariate.levels)})", int(unknown[0]) + 1)
    levels = [level for level in covariate.levels if level != covariate.reference]
    return np.column_stack([(labels == level).to_numpy(float) for level in levels])


def ingest_csv(path: str, schema: DataSchema, arms: Optional[Tuple[str, str]] = None) -> IngestResult:
    """Read a comma-delimited UTF-8 file with a header row into subject records.

    Categorical covariates become ``name[level]`` indicators without the
    reference level. With ``arms=(treated, control)`` trial rows with any
    other arm label are dropped before validation and counted; without it
    arm cells must be 0 or 1. Row numbers in errors count data rows from 1.

    Raises:
        IngestError: missing column, unparseable cell, negative time, event
            not in {0, 1}, unknown category level or non-positive design weight.
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except FileNotFoundError:
        raise IngestError(f"data file not found: {path}")
    except (pd.errors.EmptyDataError, pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise IngestError(f"cannot read {path}: {exc}")

    required = [c.source_column for c in schema.covariates]
    for role in ("source", "design_weight"):
        if getattr(schema, role):
            required.append(getattr(schema, role))
    if schema.source is not None or schema.default_source == "trial":
        required += [c for c in (schema.time, schema.event, schema.arm) if c]
    missing = [c for c in dict.fromkeys(required) if c not in frame.columns]
    if missing:
        raise IngestError(f"missing required column(s): {', '.join(missing)}")

    n_rows = len(frame)
    if schema.source is None:
        is_trial = np.full(n_rows, schema.default_source == "trial")
    else:
        is_trial = (frame[schema.source].str.strip() == schema.trial_value).to_numpy()
    keep = np.ones(n_rows, dtype=bool)
    dropped: Dict[str, int] = {}

    arm_values = np.zeros(n_rows)
    if is_trial.any():
        labels = frame[schema.arm].str.strip()
        if arms is not None:
            treated, control = arms
            selected = labels.isin([treated, control]).to_numpy()
            other = is_trial & ~selected
            if other.any():
                dropped["arm_not_selected"] = int(other.sum())
                keep &= ~other
            arm_values = (labels == treated).to_numpy(float)
            if not (is_trial & keep & (labels == treated).to_numpy()).any() or \
                    not (is_trial & keep & (labels == control).to_numpy()).any():
                raise IngestError(f"arm labels {treated!r} / {control!r} not both present in {schema.arm}")
        else:
            arm_values = _numeric(frame, schema.arm, is_trial)
            bad = np.flatnonzero(is_trial & ~np.isin(arm_values, (0.0, 1.0)))
            if bad.size:
                raise IngestError(f"{schema.arm} must be 0 or 1 (or select arms by label), "
                                  f"got {labels.iloc[bad[0]]!r}", int(bad[0]) + 1)

    trial_rows = is_trial & keep
    flagged: Dict[str, int] = {}
    time = event = None
    if trial_rows.any():
        time = _numeric(frame, schema.time, trial_rows) * schema.time_scale
        negative = np.flatnonzero(trial_rows & (time < 0))
        if negative.size:
            raise IngestError(f"negative time {frame[schema.time].iloc[negative[0]]!r}", int(negative[0]) + 1)
        event = _numeric(frame, schema.event, trial_rows)
        bad = np.flatnonzero(trial_rows & ~np.isin(event, (0.0, 1.0)))
        if bad.size:
            raise IngestError(f"{schema.event} must be 0 or 1, got {frame[schema.event].iloc[bad[0]]!r}",
                              int(bad[0]) + 1)
        zero = int(np.sum(trial_rows & (time == 0)))
        if zero:
            flagged["zero_time"] = zero

    weights = np.ones(n_rows)
    if schema.design_weight is not None:
        external_rows = ~is_trial & keep
        weights = _numeric(frame, schema.design_weight, external_rows)
        bad = np.flatnonzero(external_rows & ~(weights > 0))
        if bad.size:
            raise IngestError(f"design weight must be positive, got {frame[schema.design_weight].iloc[bad[0]]!r}",
                              int(bad[0]) + 1)

    covariates = np.hstack([_expand(frame, c, keep) for c in schema.covariates])
    records = []
    for i in np.flatnonzero(keep):
        if is_trial[i]:
            records.append(SubjectRecord(tuple(covariates[i]), 1, 0, float(time[i]),
                                         bool(event[i] == 1.0), int(arm_values[i])))
        else:
            records.append(SubjectRecord(tuple(covariates[i]), 0, 1, design_weight=float(weights[i])))

    n_trial = int(trial_rows.sum())
    report = ValidationReport(n_rows, len(records), n_trial, len(records) - n_trial, dropped, flagged)
    logger.info("ingested %s: %d trial and %d external records (%d dropped, %d flagged)", path,
                report.n_trial, report.n_external, sum(dropped.values()), report.n_flagged)
    return IngestResult(records, tuple(schema.covariate_names), report)
