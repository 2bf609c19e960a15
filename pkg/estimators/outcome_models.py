"""Per-arm outcome models (Cox PH or spline hazard) behind one cumulative-hazard interface."""

import logging
from typing import Dict, Optional, Protocol

import numpy as np

from hare.selection import HareConfig, fit_hare
from survival.cox import fit_cox
from survival.records import TrialSample

logger = logging.getLogger(__name__)

OUTCOME_MODELS = ("cox", "hare")
_CHUNK = 2000


class OutcomeModel(Protocol):
    def cumulative_hazard(self, x: np.ndarray, times: np.ndarray) -> np.ndarray: ...


def fit_outcome_models(trial: TrialSample, kind: str,
                       hare_config: Optional[HareConfig] = None) -> Dict[int, OutcomeModel]:
    """One fit per arm on the trial subjects of that arm."""
    if kind not in OUTCOME_MODELS:
        raise ValueError(f"outcome model must be one of {OUTCOME_MODELS}, got {kind!r}")
    models = {}
    for a in (0, 1):
        subset = trial.arm_subset(a)
        if subset.n == 0:
            raise ValueError(f"arm {a} has no trial subjects")
        models[a] = fit_cox(subset) if kind == "cox" else fit_hare(subset, hare_config)
    logger.debug("fitted %s outcome models for both arms", kind)
    return models


def average_survival(model: OutcomeModel, covariates: np.ndarray, weights: np.ndarray,
                     times: np.ndarray) -> np.ndarray:
    """sum_j v_j exp(-Lambda(t | X_j)) / sum_j v_j, evaluated in row chunks."""
    weights = np.asarray(weights, dtype=float)
    total = np.zeros(len(times))
    for start in range(0, covariates.shape[0], _CHUNK):
        block = slice(start, start + _CHUNK)
        total += weights[block] @ np.exp(-model.cumulative_hazard(covariates[block], times))
    return total / weights.sum()
