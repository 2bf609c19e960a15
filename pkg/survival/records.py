"""Subject records and the array-backed trial/external samples built from them."""

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd


@dataclass(frozen=True)
class SubjectRecord:
    """One individual's observed tuple.

    External records (``external_flag == 1``) carry covariates only; their
    follow-up time, event indicator and arm are ignored. ``event`` is True when
    the event was observed (the record is not censored).
    """
    covariates: Tuple[float, ...]
    trial_flag: int
    external_flag: int
    followup_time: Optional[float] = None
    event: Optional[bool] = None
    arm: Optional[int] = None
    design_weight: float = 1.0

    def __post_init__(self):
        if self.trial_flag + self.external_flag != 1:
            raise ValueError("a record belongs to exactly one source "
                             f"(trial_flag={self.trial_flag}, external_flag={self.external_flag})")
        if self.design_weight <= 0:
            raise ValueError(f"design_weight must be positive, got {self.design_weight}")
        if self.trial_flag == 1:
            if self.design_weight != 1.0:
                raise ValueError("trial records have design weight 1")
            if self.followup_time is None or self.event is None or self.arm is None:
                raise ValueError("trial records need followup_time, event and arm")
            if self.followup_time < 0:
                raise ValueError(f"followup_time must be >= 0, got {self.followup_time}")
            if self.arm not in (0, 1):
                raise ValueError(f"arm must be 0 or 1, got {self.arm}")

    @property
    def is_trial(self) -> bool:
        return self.trial_flag == 1


@dataclass(frozen=True, eq=False)
class TrialSample:
    """Trial subjects as aligned arrays (time, event, arm, covariate matrix)."""
    time: np.ndarray
    event: np.ndarray
    arm: np.ndarray
    covariates: np.ndarray
    covariate_names: Tuple[str, ...]

    def __post_init__(self):
        n = len(self.time)
        object.__setattr__(self, "time", np.asarray(self.time, dtype=float))
        object.__setattr__(self, "event", np.asarray(self.event, dtype=bool))
        object.__setattr__(self, "arm", np.asarray(self.arm, dtype=int))
        covariates = np.asarray(self.covariates, dtype=float)
        if covariates.ndim != 2:
            covariates = covariates.reshape(n, len(self.covariate_names))
        object.__setattr__(self, "covariates", covariates)
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))
        if not (len(self.event) == len(self.arm) == covariates.shape[0] == n):
            raise ValueError("trial arrays must have the same length")
        if covariates.shape[1] != len(self.covariate_names):
            raise ValueError("covariate_names does not match the covariate matrix width")
        if np.any(self.time < 0):
            raise ValueError("follow-up times must be >= 0")
        if not np.all(np.isin(self.arm, (0, 1))):
            raise ValueError("arm values must be 0 or 1")

    @classmethod
    def from_records(cls, records: Iterable[SubjectRecord],
                     covariate_names: Sequence[str]) -> "TrialSample":
        trial = [r for r in records if r.is_trial]
        if not trial:
            raise ValueError("no trial records")
        return cls(
            time=np.array([r.followup_time for r in trial], dtype=float),
            event=np.array([bool(r.event) for r in trial]),
            arm=np.array([r.arm for r in trial], dtype=int),
            covariates=np.array([r.covariates for r in trial], dtype=float),
            covariate_names=tuple(covariate_names),
        )

    @property
    def n(self) -> int:
        return len(self.time)

    @property
    def n_events(self) -> int:
        return int(self.event.sum())

    def take(self, index: np.ndarray) -> "TrialSample":
        """Rows selected by a boolean mask or an integer index (repeats allowed)."""
        return TrialSample(self.time[index], self.event[index], self.arm[index],
                           self.covariates[index], self.covariate_names)

    def arm_subset(self, a: int) -> "TrialSample":
        return self.take(self.arm == a)

    def select(self, names: Sequence[str]) -> "TrialSample":
        columns = [self.covariate_names.index(name) for name in names]
        return TrialSample(self.time, self.event, self.arm,
                           self.covariates[:, columns], tuple(names))

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.covariates, columns=list(self.covariate_names))


@dataclass(frozen=True, eq=False)
class ExternalSample:
    """External (target population) subjects: covariates and design weights."""
    covariates: np.ndarray
    covariate_names: Tuple[str, ...]
    design_weights: Optional[np.ndarray] = None

    def __post_init__(self):
        covariates = np.asarray(self.covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates.reshape(-1, len(self.covariate_names))
        object.__setattr__(self, "covariates", covariates)
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))
        if self.design_weights is None:
            weights = np.ones(covariates.shape[0])
        else:
            weights = np.asarray(self.design_weights, dtype=float)
        if len(weights) != covariates.shape[0]:
            raise ValueError("design_weights must have one entry per external record")
        if np.any(weights <= 0):
            raise ValueError("design weights must be positive")
        object.__setattr__(self, "design_weights", weights)
        if covariates.shape[1] != len(self.covariate_names):
            raise ValueError("covariate_names does not match the covariate matrix width")

    @classmethod
    def from_records(cls, records: Iterable[SubjectRecord],
                     covariate_names: Sequence[str]) -> "ExternalSample":
        external = [r for r in records if not r.is_trial]
        if not external:
            raise ValueError("no external records")
        return cls(
            covariates=np.array([r.covariates for r in external], dtype=float),
            covariate_names=tuple(covariate_names),
            design_weights=np.array([r.design_weight for r in external], dtype=float),
        )

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def normalized_weights(self) -> np.ndarray:
        return self.design_weights / self.design_weights.sum()

    def take(self, index: np.ndarray) -> "ExternalSample":
        return ExternalSample(self.covariates[index], self.covariate_names,
                              self.design_weights[index])

    def select(self, names: Sequence[str]) -> "ExternalSample":
        columns = [self.covariate_names.index(name) for name in names]
        return ExternalSample(self.covariates[:, columns], tuple(names), self.design_weights)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.covariates, columns=list(self.covariate_names))


@dataclass(frozen=True, eq=False)
class StudyData:
    """Aligned trial and external samples.

    ``shared_covariates`` lists the trial covariates that the external sample
    also measures, in trial order; transported estimators use only those.
    """
    trial: TrialSample
    external: Optional[ExternalSample] = None
    shared_covariates: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.external is None:
            shared = self.trial.covariate_names
        else:
            available = set(self.external.covariate_names)
            shared = tuple(n for n in self.trial.covariate_names if n in available)
        if not self.shared_covariates:
            object.__setattr__(self, "shared_covariates", shared)

    def aligned(self) -> Tuple[TrialSample, Optional[ExternalSample]]:
        """Trial and external samples restricted to the shared covariates."""
        names = list(self.shared_covariates)
        external = None if self.external is None else self.external.select(names)
        return self.trial.select(names), external
