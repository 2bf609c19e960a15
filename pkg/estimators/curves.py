"""Survival-curve and TATE containers shared by every estimator."""

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from survival.records import TrialSample

logger = logging.getLogger(__name__)

ESTIMATOR_TAGS = ("OR_PH", "IPSW", "CW", "ACW_PH", "ACW_HARE", "RCT_PH", "RCT_HARE")
OPTIONAL_TAGS = ("OR_HARE", "ACW_DENOM_PH")
ALL_TAGS = ESTIMATOR_TAGS + OPTIONAL_TAGS


@dataclass(frozen=True, eq=False)
class SurvivalCurveEstimate:
    """Right-continuous step function S_a(t | target) from t = 0 up to the horizon."""
    estimator_tag: str
    arm: int
    times: np.ndarray
    values: np.ndarray
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    notes: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.estimator_tag not in ALL_TAGS:
            raise ValueError(f"unknown estimator tag {self.estimator_tag!r}")
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.shape != values.shape or times.size == 0 or times[0] != 0.0:
            raise ValueError("a curve needs matching times/values starting at t = 0")
        if np.any(np.diff(times) <= 0):
            raise ValueError("curve times must be strictly increasing")
        if np.any(values < 0) or np.any(values > 1):
            raise ValueError("survival values must lie in [0, 1]")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def value_at(self, t: Union[float, np.ndarray]) -> np.ndarray:
        index = np.searchsorted(self.times, np.asarray(t, dtype=float), side="right") - 1
        return self.values[np.clip(index, 0, None)]

    def bounds_at(self, t: Union[float, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
        if self.lower is None:
            nan = np.full(np.shape(t), np.nan)
            return nan, nan
        index = np.clip(np.searchsorted(self.times, np.asarray(t, dtype=float), side="right") - 1, 0, None)
        return self.lower[index], self.upper[index]

    def with_interval(self, lower: np.ndarray, upper: np.ndarray) -> "SurvivalCurveEstimate":
        return replace(self, lower=np.asarray(lower, dtype=float), upper=np.asarray(upper, dtype=float))


@dataclass(frozen=True)
class TateEstimate:
    estimator_tag: str
    horizon: float
    tau: float
    survival_treated: float
    survival_control: float
    std_error: float = float("nan")
    ci_95: Tuple[float, float] = (float("nan"), float("nan"))


def evaluation_grid(trial: TrialSample, arm: int, horizon: float) -> np.ndarray:
    """0, the arm's distinct event times up to the horizon, and the horizon itself."""
    subset = trial.arm_subset(arm)
    events = subset.time[subset.event]
    events = events[(events > 0) & (events <= horizon)]
    return np.unique(np.concatenate(([0.0], events, [horizon])))


def finalize_curve(tag: str, arm: int, times: np.ndarray, values: np.ndarray,
                   isotonize: bool = True, notes: Optional[Sequence[str]] = None) -> SurvivalCurveEstimate:
    """Pin S(0) = 1, clamp to [0, 1] and optionally take the running minimum (all logged)."""
    notes = list(notes or [])
    values = np.asarray(values, dtype=float).copy()
    values[0] = 1.0
    if np.any(values < 0) or np.any(values > 1):
        message = f"{tag} arm {arm}: {int(np.sum((values < 0) | (values > 1)))} values clamped to [0, 1]"
        logger.warning(message)
        notes.append(message)
        values = np.clip(values, 0.0, 1.0)
    if isotonize:
        monotone = np.minimum.accumulate(values)
        changed = int(np.sum(monotone < values - 1e-15))
        if changed:
            message = f"{tag} arm {arm}: isotonized {changed} increasing steps"
            logger.info(message)
            notes.append(message)
        values = monotone
    return SurvivalCurveEstimate(tag, arm, times, values, notes=notes)
