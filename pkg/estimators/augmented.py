"""Augmented calibration-weighting (doubly robust) survival estimator.

S_a(t) = exp(-sum_{u <= t} num(u) / denom(u)) on the grid of the arm's
distinct observed times. denom estimates S_a(u-) and num estimates its jump;
both combine the weighted at-risk IPCW term with an outcome-model term
corrected by the censoring-martingale augmentation

    Aug_i(u) = sum_{s <= u} exp(Lambda^C_i(s) + Lambda_i(s)) [dN^C_i(s) - Y_i(s) dLambda^C_i(s)].
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from survival.errors import NegativeDenominatorError
from survival.records import ExternalSample, TrialSample
from weighting.weight_set import WeightSet
from .curves import SurvivalCurveEstimate, finalize_curve
from .outcome_models import OutcomeModel
from .weighting_estimators import DEFAULT_CENSORING_CAP, arm_weights

logger = logging.getLogger(__name__)

_CHUNK = 2000


@dataclass(frozen=True, eq=False)
class AcwComponents:
    grid: np.ndarray
    num: np.ndarray
    denom: np.ndarray
    denom_right: np.ndarray
    notes: List[str] = field(default_factory=list)


def _external_terms(model: OutcomeModel, external: ExternalSample, points: np.ndarray):
    """sum_j v_j exp(-Lambda_j(u)) at every point and sum_j v_j exp(-Lambda_j(u-)) dLambda_j(u)."""
    v = external.normalized_weights
    survival = np.zeros(len(points))
    increments = np.zeros(len(points) - 1)
    for start in range(0, external.n, _CHUNK):
        block = slice(start, start + _CHUNK)
        hazard = model.cumulative_hazard(external.covariates[block], points)
        survival += v[block] @ np.exp(-hazard)
        increments += v[block] @ (np.exp(-hazard[:, :-1]) * np.diff(hazard, axis=1))
    return survival, increments


def acw_components(trial: TrialSample, external: ExternalSample, horizon: float,
                   weights: WeightSet, model: OutcomeModel, a: int,
                   censoring_cap: float = DEFAULT_CENSORING_CAP) -> AcwComponents:
    """num and denom at each grid time u_k, denominators taken at u_k- (left limits)."""
    rows = trial.arm == a
    time, event = trial.time[rows], trial.event[rows]
    grid = np.unique(np.concatenate((time[(time > 0) & (time <= horizon)], [horizon])))
    points = np.concatenate(([0.0], grid))
    notes = []

    w = arm_weights(weights.calib_weights, weights, trial, a)[rows]
    censoring_hazard = weights.censoring_cumulative_hazard(points)[rows]
    inflation = np.exp(censoring_hazard)
    if np.any(inflation > censoring_cap):
        message = f"{int(np.sum(inflation > censoring_cap))} censoring inflation factors capped at {censoring_cap:g}"
        logger.warning(message)
        notes.append(message)
        inflation = np.minimum(inflation, censoring_cap)
    outcome_hazard = model.cumulative_hazard(trial.covariates[rows], points)
    survival = np.exp(-outcome_hazard)
    external_survival, external_increments = _external_terms(model, external, points)

    at_risk = time[:, None] >= grid[None, :]
    beyond = time[:, None] > grid[None, :]
    at_time = time[:, None] == grid[None, :]
    events = at_time & event[:, None]
    censorings = at_time & ~event[:, None]

    integrand = np.exp(censoring_hazard[:, 1:] + outcome_hazard[:, 1:])
    martingale = censorings - at_risk * np.diff(censoring_hazard, axis=1)
    augmentation = np.cumsum(integrand * martingale, axis=1)
    augmentation_left = np.hstack([np.zeros((len(w), 1)), augmentation[:, :-1]])

    denom = (w @ (inflation[:, :-1] * at_risk) + external_survival[:-1]
             - w @ (survival[:, :-1] * (1.0 - augmentation_left)))
    num = (w @ (inflation[:, :-1] * events) + external_increments
           - w @ (survival[:, :-1] * np.diff(outcome_hazard, axis=1) * (1.0 - augmentation_left)))
    denom_right = (w @ (inflation[:, 1:] * beyond) + external_survival[1:]
                   - w @ (survival[:, 1:] * (1.0 - augmentation)))
    return AcwComponents(grid, num, denom, denom_right, notes)


def estimate_acw(trial: TrialSample, external: ExternalSample, horizon: float,
                 weights: WeightSet, models: Dict[int, OutcomeModel], tag: str = "ACW_PH",
                 censoring_cap: float = DEFAULT_CENSORING_CAP) -> Dict[int, SurvivalCurveEstimate]:
    """Doubly robust curves per arm; ``models`` maps arm to a Cox or spline hazard fit.

    Raises:
        NegativeDenominatorError: denom <= 0 at some grid time.
    """
    curves = {}
    for a in (0, 1):
        parts = acw_components(trial, external, horizon, weights, models[a], a, censoring_cap)
        bad = np.flatnonzero(parts.denom <= 0)
        if len(bad):
            raise NegativeDenominatorError(float(parts.grid[bad[0]]), float(parts.denom[bad[0]]))
        increments = parts.num / parts.denom
        notes = list(parts.notes)
        if np.any(increments < 0):
            message = f"{tag} arm {a}: {int(np.sum(increments < 0))} negative hazard increments set to 0"
            logger.warning(message)
            notes.append(message)
            increments = np.maximum(increments, 0.0)
        values = np.concatenate(([1.0], np.exp(-np.cumsum(increments))))
        curves[a] = finalize_curve(tag, a, np.concatenate(([0.0], parts.grid)), values,
                                   isotonize=False, notes=notes)
    return curves


def estimate_acw_denominator(trial: TrialSample, external: ExternalSample, horizon: float,
                             weights: WeightSet, models: Dict[int, OutcomeModel],
                             censoring_cap: float = DEFAULT_CENSORING_CAP,
                             isotonize: bool = True) -> Dict[int, SurvivalCurveEstimate]:
    """The augmented denominator itself, read as a direct estimate of S_a(t)."""
    curves = {}
    for a in (0, 1):
        parts = acw_components(trial, external, horizon, weights, models[a], a, censoring_cap)
        values = np.concatenate(([1.0], parts.denom_right))
        curves[a] = finalize_curve("ACW_DENOM_PH", a, np.concatenate(([0.0], parts.grid)), values,
                                   isotonize=isotonize, notes=parts.notes)
    return curves
