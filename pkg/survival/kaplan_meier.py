"""Kaplan-Meier product-limit estimator (optionally weighted)."""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .records import SubjectRecord, TrialSample

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class KaplanMeierCurve:
    """Right-continuous step function S(t) = prod_{t_i <= t} (1 - d_i / n_i).

    ``at_risk_counts`` and ``event_counts`` hold weight sums for weighted fits.
    """
    event_times: np.ndarray
    survival_values: np.ndarray
    at_risk_counts: np.ndarray
    event_counts: np.ndarray

    def survival_at(self, t: Union[float, np.ndarray]) -> np.ndarray:
        """S(t), equal to 1 before the first event time."""
        t = np.asarray(t, dtype=float)
        index = np.searchsorted(self.event_times, t, side="right")
        values = np.concatenate(([1.0], self.survival_values))
        return values[index]

    def survival_before(self, t: Union[float, np.ndarray]) -> np.ndarray:
        """Left limit S(t-)."""
        t = np.asarray(t, dtype=float)
        index = np.searchsorted(self.event_times, t, side="left")
        values = np.concatenate(([1.0], self.survival_values))
        return values[index]


def _as_arrays(data: Union[TrialSample, Sequence[SubjectRecord]]):
    if isinstance(data, TrialSample):
        return data.time, data.event
    records = list(data)
    if any(not r.is_trial for r in records):
        raise ValueError("Kaplan-Meier needs trial records (trial_flag == 1)")
    time = np.array([r.followup_time for r in records], dtype=float)
    event = np.array([bool(r.event) for r in records])
    return time, event


def fit_kaplan_meier(data: Union[TrialSample, Sequence[SubjectRecord]],
                     weights: Optional[np.ndarray] = None) -> KaplanMeierCurve:
    """Product-limit curve over the distinct event times.

    Args:
        data: trial subjects of a single arm.
        weights: optional positive per-subject weights; counts become weight sums.

    Returns:
        KaplanMeierCurve. With no events the curve is identically 1.
    """
    time, event = _as_arrays(data)
    if len(time) == 0:
        raise ValueError("Kaplan-Meier needs at least one record")
    if np.any(time < 0):
        raise ValueError("follow-up times must be >= 0")
    if weights is None:
        weights = np.ones(len(time))
    else:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != time.shape or np.any(weights <= 0):
            raise ValueError("weights must be positive, one per record")

    event_times = np.unique(time[event])
    if len(event_times) == 0:
        logger.debug("no events among %d records; survival is identically 1", len(time))
        empty = np.empty(0)
        return KaplanMeierCurve(empty, empty, empty, empty)

    order = np.argsort(time, kind="stable")
    sorted_time = time[order]
    sorted_weights = weights[order]
    # weight of subjects with time >= t
    tail = np.concatenate((np.cumsum(sorted_weights[::-1])[::-1], [0.0]))
    at_risk = tail[np.searchsorted(sorted_time, event_times, side="left")]
    event_weight = np.bincount(np.searchsorted(event_times, time[event]),
                               weights=weights[event], minlength=len(event_times))
    survival = np.cumprod(1.0 - event_weight / at_risk)
    return KaplanMeierCurve(event_times, survival, at_risk, event_weight)


def nelson_aalen(time: np.ndarray, event: np.ndarray):
    """Nelson-Aalen cumulative hazard at the distinct event times."""
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=bool)
    event_times = np.unique(time[event])
    at_risk = np.array([(time >= t).sum() for t in event_times], dtype=float)
    deaths = np.array([(event & (time == t)).sum() for t in event_times], dtype=float)
    return event_times, np.cumsum(deaths / at_risk)
