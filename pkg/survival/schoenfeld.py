"""Grambsch-Therneau proportional-hazards test on Schoenfeld residuals."""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
from scipy import stats

from .cox import CoxFit
from .kaplan_meier import fit_kaplan_meier
from .records import SubjectRecord, TrialSample

logger = logging.getLogger(__name__)

TRANSFORMS = ("km", "identity", "rank")


@dataclass(frozen=True, eq=False)
class PhTestResult:
    per_covariate_chisq: np.ndarray
    per_covariate_p: np.ndarray
    global_chisq: float
    global_p: float
    time_transform_tag: str
    covariate_names: Tuple[str, ...] = ()

    def as_rows(self):
        """(name, chisq, df, p) rows, global test last."""
        rows = [(name, float(c), 1, float(p)) for name, c, p in
                zip(self.covariate_names, self.per_covariate_chisq, self.per_covariate_p)]
        rows.append(("GLOBAL", self.global_chisq, len(self.covariate_names), self.global_p))
        return rows


def schoenfeld_residuals(fit: CoxFit, sample: TrialSample):
    """Unscaled Schoenfeld residuals x_i - xbar(t_i), one row per event."""
    indicator = sample.event if fit.response == "event" else ~sample.event
    eta = sample.covariates @ fit.coefficients
    risk = np.exp(eta - eta.max())
    event_index = np.flatnonzero(indicator)
    event_index = event_index[np.argsort(sample.time[event_index], kind="stable")]
    residuals = np.empty((len(event_index), sample.covariates.shape[1]))
    order = np.argsort(sample.time, kind="stable")
    sorted_time = sample.time[order]
    weighted = np.cumsum((risk[:, None] * sample.covariates)[order][::-1], axis=0)[::-1]
    total = np.cumsum(risk[order][::-1])[::-1]
    start = np.searchsorted(sorted_time, sample.time[event_index], side="left")
    residuals[:] = sample.covariates[event_index] - weighted[start] / total[start, None]
    return sample.time[event_index], residuals


def _transform_times(times: np.ndarray, sample: TrialSample, fit: CoxFit, transform: str):
    if transform == "identity":
        return times.astype(float)
    if transform == "rank":
        return stats.rankdata(times)
    indicator = sample.event if fit.response == "event" else ~sample.event
    km = fit_kaplan_meier(TrialSample(sample.time, indicator, sample.arm,
                                      sample.covariates, sample.covariate_names))
    return 1.0 - km.survival_before(times)


def schoenfeld_ph_test(fit: CoxFit, data: Union[TrialSample, Sequence[SubjectRecord]],
                       transform: str = "km") -> PhTestResult:
    """Score test of beta_j(t) = beta_j + theta_j g(t) using the average information.

    Args:
        fit: converged fit on the same records.
        data: the records the fit was computed on.
        transform: time transform g: "km" (1 - KM at t-), "identity" or "rank".
    """
    if transform not in TRANSFORMS:
        raise ValueError(f"transform must be one of {TRANSFORMS}, got {transform!r}")
    if not fit.converged:
        raise ValueError("the PH test needs a converged fit")
    if not isinstance(data, TrialSample):
        data = TrialSample.from_records(data, fit.covariate_names)
    p = len(fit.coefficients)
    if p == 0:
        raise ValueError("the PH test needs at least one covariate")

    times, residuals = schoenfeld_residuals(fit, data)
    n_events = len(times)
    if n_events < 2:
        raise ValueError(f"the PH test needs at least 2 events, got {n_events}")

    g = _transform_times(times, data, fit, transform)
    centered = g - g.mean()
    spread = float(centered @ centered)
    if spread <= 0:
        raise ValueError("transformed event times are all equal")
    variance = np.linalg.inv(fit.information_matrix)
    u = centered @ residuals
    scaled = n_events * (variance @ u)
    per_covariate = scaled ** 2 / (n_events * np.diag(variance) * spread)
    global_chisq = float(n_events * (u @ variance @ u) / spread)
    per_p = stats.chi2.sf(per_covariate, df=1)
    global_p = float(stats.chi2.sf(global_chisq, df=p))
    logger.debug("PH test (%s): global chisq %.4f p %.4g", transform, global_chisq, global_p)
    names = fit.covariate_names or tuple(f"x{j}" for j in range(p))
    return PhTestResult(per_covariate, per_p, global_chisq, global_p, transform, tuple(names))
