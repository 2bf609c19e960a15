"""Weighted at-risk estimators with inverse-probability-of-censoring inflation (CW, IPSW)."""

import logging
from typing import Dict, List, Tuple

import numpy as np

from survival.records import TrialSample
from weighting.weight_set import WeightSet
from .curves import SurvivalCurveEstimate, evaluation_grid, finalize_curve

logger = logging.getLogger(__name__)

DEFAULT_CENSORING_CAP = 50.0


def arm_weights(sampling_weights: np.ndarray, weights: WeightSet, trial: TrialSample, a: int) -> np.ndarray:
    """omega_i A_ai / pi_ai, normalized to sum to one over arm a."""
    pi = weights.propensity_fit.arm_probabilities(trial.arm)
    w = np.where(trial.arm == a, sampling_weights / pi, 0.0)
    return w / w.sum()


def ipcw_factor(weights: WeightSet, times: np.ndarray, cap: float) -> Tuple[np.ndarray, List[str]]:
    """exp(Lambda^C_i(t)) capped at ``cap``; the number of capped entries is reported."""
    factor = np.exp(weights.censoring_cumulative_hazard(times))
    notes = []
    capped = factor > cap
    if capped.any():
        message = f"{int(capped.sum())} censoring inflation factors capped at {cap:g}"
        logger.warning(message)
        notes.append(message)
        factor = np.minimum(factor, cap)
    return factor, notes


def _weighted_at_risk(trial: TrialSample, horizon: float, sampling_weights: np.ndarray,
                      weights: WeightSet, tag: str, cap: float,
                      isotonize: bool) -> Dict[int, SurvivalCurveEstimate]:
    curves = {}
    for a in (0, 1):
        times = evaluation_grid(trial, a, horizon)
        w = arm_weights(sampling_weights, weights, trial, a)
        rows = trial.arm == a
        factor, notes = ipcw_factor(weights, times, cap)
        survived = trial.time[rows, None] > times[None, :]
        values = w[rows] @ (factor[rows] * survived)
        curves[a] = finalize_curve(tag, a, times, values, isotonize, notes)
    return curves


def estimate_cw(trial: TrialSample, horizon: float, weights: WeightSet,
                censoring_cap: float = DEFAULT_CENSORING_CAP,
                isotonize: bool = True) -> Dict[int, SurvivalCurveEstimate]:
    """S_a(t) = sum_i omega_i (A_ai / pi_ai) exp(Lambda^C_ai(t)) I(U_i > t), self-normalized."""
    return _weighted_at_risk(trial, horizon, weights.calib_weights, weights, "CW",
                             censoring_cap, isotonize)


def estimate_ipsw(trial: TrialSample, horizon: float, weights: WeightSet,
                  censoring_cap: float = DEFAULT_CENSORING_CAP,
                  isotonize: bool = True) -> Dict[int, SurvivalCurveEstimate]:
    """The CW formula with inverse-odds sampling weights in place of calibration weights."""
    if weights.ipsw is None:
        raise ValueError("the weight set carries no IPSW weights; estimate them with with_ipsw=True")
    curves = _weighted_at_risk(trial, horizon, weights.ipsw.weights, weights, "IPSW",
                               censoring_cap, isotonize)
    for curve in curves.values():
        curve.notes.extend(weights.ipsw.warnings)
    return curves
