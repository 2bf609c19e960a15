"""Per-arm Cox models for the censoring time and the IPCW factor S_a^C(t, X)."""

import logging
from typing import Dict, Mapping, Union

import numpy as np

from survival.cox import CoxFit, conditional_survival, fit_cox
from survival.records import TrialSample

logger = logging.getLogger(__name__)


def fit_censoring_models(trial: TrialSample) -> Dict[int, CoxFit]:
    """One censoring Cox fit (event indicator 1 - Delta) per arm present in the trial."""
    fits = {}
    for a in (0, 1):
        subset = trial.arm_subset(a)
        if subset.n:
            fits[a] = fit_cox(subset, response="censoring")
            logger.debug("censoring model arm %d: %d censorings", a, fits[a].n_events)
    return fits


def censoring_survival(fits: Union[CoxFit, Mapping[int, CoxFit]], x: np.ndarray, a: int,
                       t: Union[float, np.ndarray]) -> np.ndarray:
    """P(C > t | X = x, A = a) under the arm-a censoring model."""
    fit = fits if isinstance(fits, CoxFit) else fits[a]
    if fit.response != "censoring":
        raise ValueError("censoring_survival needs a fit with response='censoring'")
    return conditional_survival(fit, x, t)
