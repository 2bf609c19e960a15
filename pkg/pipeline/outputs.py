"""Delimited tables, curve files, diagnostics report and run manifest."""

import hashlib
import json
import logging
import math
import os
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from estimators.curves import SurvivalCurveEstimate
from estimators.transport import TransportResult
from survival.errors import ConfigError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"
TATE_COLUMNS = ["estimator", "horizon", "survival_treated", "survival_control", "tau",
                "std_error", "ci_lower", "ci_upper", "status", "note"]


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return None if math.isnan(value) or math.isinf(value) else value
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def read_json(path: str) -> Dict[str, Any]:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}")


def write_json(path: str, payload: Dict[str, Any]) -> str:
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(_jsonable(payload), f, indent=2, sort_keys=True)
        f.write('\n')
    return path


def write_tate_table(path: str, result: TransportResult, estimators: List[str], horizon: float) -> str:
    """One row per requested estimator; failed estimators keep their row with the failure note."""
    rows = []
    for tag in estimators:
        if tag in result.tates:
            tate = result.tates[tag]
            notes = [n for a in (0, 1) for n in result.curves[tag][a].notes]
            rows.append({"estimator": tag, "horizon": tate.horizon,
                         "survival_treated": tate.survival_treated,
                         "survival_control": tate.survival_control, "tau": tate.tau,
                         "std_error": tate.std_error, "ci_lower": tate.ci_95[0],
                         "ci_upper": tate.ci_95[1], "status": "ok", "note": "; ".join(notes)})
        else:
            rows.append({"estimator": tag, "horizon": horizon, "status": "failed",
                         "note": result.failures.get(tag, "not run")})
    pd.DataFrame(rows, columns=TATE_COLUMNS).to_csv(path, index=False, float_format=FLOAT_FORMAT,
                                                    lineterminator='\n')
    return path


def curve_frame(by_arm: Dict[int, SurvivalCurveEstimate]) -> pd.DataFrame:
    """Both arms' step functions on the union of their jump times."""
    times = np.union1d(by_arm[0].times, by_arm[1].times)
    columns = {"time": times}
    for a in (0, 1):
        columns[f"survival_{a}"] = by_arm[a].value_at(times)
    for a in (0, 1):
        lower, upper = by_arm[a].bounds_at(times)
        columns[f"lower_{a}"] = lower
        columns[f"upper_{a}"] = upper
    return pd.DataFrame(columns)


def write_curve_file(path: str, by_arm: Dict[int, SurvivalCurveEstimate]) -> str:
    curve_frame(by_arm).to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return path


def read_curve_file(path: str, tag: str) -> Dict[int, SurvivalCurveEstimate]:
    """Parse a curve file back into validated per-arm curves."""
    frame = pd.read_csv(path)
    curves = {}
    for a in (0, 1):
        lower, upper = frame[f"lower_{a}"].to_numpy(float), frame[f"upper_{a}"].to_numpy(float)
        has_interval = not np.all(np.isnan(lower))
        curves[a] = SurvivalCurveEstimate(tag, a, frame["time"].to_numpy(float),
                                          frame[f"survival_{a}"].to_numpy(float),
                                          lower if has_interval else None,
                                          upper if has_interval else None)
    return curves


def file_digest(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(65536), b''):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir: str, config_echo: Dict[str, Any], seed: int, files: List[str],
                   extra: Optional[Dict[str, Any]] = None) -> str:
    """Config echo, seed and a sha256 per emitted file; no wall-clock content."""
    payload = {"config": config_echo, "seed": seed,
               "files": {os.path.basename(f): file_digest(f) for f in sorted(files)}}
    if extra:
        payload.update(extra)
    path = write_json(os.path.join(out_dir, "manifest.json"), payload)
    logger.info("wrote manifest for %d files to %s", len(files), path)
    return path
