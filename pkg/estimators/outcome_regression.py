"""Outcome-regression estimators: model-based survival averaged over a population."""

import logging
from typing import Dict, Mapping

import numpy as np

from survival.records import ExternalSample, TrialSample
from .curves import SurvivalCurveEstimate, evaluation_grid, finalize_curve
from .outcome_models import OutcomeModel, average_survival

logger = logging.getLogger(__name__)


def _extrapolation_notes(trial: TrialSample, external: ExternalSample):
    low, high = trial.covariates.min(axis=0), trial.covariates.max(axis=0)
    notes = []
    for j, name in enumerate(trial.covariate_names):
        outside = int(np.sum((external.covariates[:, j] < low[j]) | (external.covariates[:, j] > high[j])))
        if outside:
            notes.append(f"{outside} external records extrapolate {name} beyond the trial range")
    for note in notes:
        logger.warning(note)
    return notes


def estimate_or(trial: TrialSample, external: ExternalSample, horizon: float,
                models: Mapping[int, OutcomeModel], tag: str = "OR_PH") -> Dict[int, SurvivalCurveEstimate]:
    """Design-weighted external average of exp(-Lambda_a(t | X_j))."""
    if list(external.covariate_names) != list(trial.covariate_names):
        raise ValueError("external covariates must match the outcome model inputs")
    notes = _extrapolation_notes(trial, external)
    curves = {}
    for a in (0, 1):
        times = evaluation_grid(trial, a, horizon)
        values = average_survival(models[a], external.covariates, external.design_weights, times)
        curves[a] = finalize_curve(tag, a, times, values, isotonize=False, notes=notes)
    return curves


def estimate_rct_only(trial: TrialSample, horizon: float, models: Mapping[int, OutcomeModel],
                      tag: str = "RCT_PH") -> Dict[int, SurvivalCurveEstimate]:
    """n^{-1} sum over all trial subjects of exp(-Lambda_a(t | X_i))."""
    curves = {}
    for a in (0, 1):
        times = evaluation_grid(trial, a, horizon)
        values = average_survival(models[a], trial.covariates, np.ones(trial.n), times)
        curves[a] = finalize_curve(tag, a, times, values, isotonize=False)
    return curves
