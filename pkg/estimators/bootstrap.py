"""Nonparametric bootstrap: resample both samples, rerun the whole transport fit."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from survival.errors import BootstrapError, TransportError
from survival.records import ExternalSample, TrialSample
from .transport import TransportResult, TransportSettings, run_transport

logger = logging.getLogger(__name__)

MAX_FAILURE_SHARE = 0.10


@dataclass(frozen=True, eq=False)
class BootstrapSummary:
    n_requested: int
    n_failed: int
    curve_std_errors: Dict[str, Dict[int, np.ndarray]]
    curve_intervals: Dict[str, Dict[int, Tuple[np.ndarray, np.ndarray]]]
    tau_draws: Dict[str, np.ndarray]
    failure_messages: List[str] = field(default_factory=list)


def resample_indices(rng: np.random.Generator, trial: TrialSample,
                     external: Optional[ExternalSample]):
    """Trial rows drawn with replacement within each arm; external rows independently."""
    trial_rows = np.concatenate([rng.choice(np.flatnonzero(trial.arm == a), size=int(np.sum(trial.arm == a)))
                                 for a in (0, 1) if np.any(trial.arm == a)])
    external_rows = None if external is None else rng.integers(0, external.n, size=external.n)
    return trial_rows, external_rows


def _replicate(trial, external, settings, child, point: TransportResult):
    rng = np.random.default_rng(child)
    trial_rows, external_rows = resample_indices(rng, trial, external)
    replicate = run_transport(trial.take(trial_rows),
                              None if external is None else external.take(external_rows),
                              replace(settings, estimators=tuple(point.curves)), strict=True)
    values = {tag: {a: replicate.curves[tag][a].value_at(point.curves[tag][a].times)
                    for a in (0, 1)} for tag in point.curves}
    taus = {tag: replicate.tates[tag].tau for tag in point.tates}
    return values, taus


def bootstrap(trial: TrialSample, external: Optional[ExternalSample],
              settings: TransportSettings, n_boot: int, seed: int,
              point: Optional[TransportResult] = None, n_jobs: int = 1) -> Tuple[TransportResult, BootstrapSummary]:
    """Standard errors and percentile 95% intervals for every curve and TATE.

    Replicate b draws from ``SeedSequence(seed).spawn(n_boot)[b]``, so results
    depend only on the seed. Failed replicates are dropped and counted.

    Raises:
        BootstrapError: more than 10% of the replicates failed.
    """
    if n_boot < 2:
        raise ValueError(f"bootstrap needs at least 2 replicates, got {n_boot}")
    if point is None:
        point = run_transport(trial, external, settings)
    if not point.curves:
        raise BootstrapError("no estimator produced a point estimate to bootstrap")
    children = np.random.SeedSequence(seed).spawn(n_boot)

    def attempt(child):
        try:
            return _replicate(trial, external, settings, child, point)
        except (TransportError, ValueError) as exc:
            return exc

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = list(pool.map(attempt, children))
    else:
        outcomes = [attempt(child) for child in children]

    failures = [str(o) for o in outcomes if isinstance(o, Exception)]
    successes = [o for o in outcomes if not isinstance(o, Exception)]
    if len(failures) > MAX_FAILURE_SHARE * n_boot or len(successes) < 2:
        raise BootstrapError(f"{len(failures)} of {n_boot} bootstrap replicates failed; "
                             f"first failure: {failures[0] if failures else 'n/a'}")
    if failures:
        logger.warning("%d of %d bootstrap replicates failed and were dropped", len(failures), n_boot)

    curves, tates, std_errors, intervals, tau_draws = {}, {}, {}, {}, {}
    for tag, by_arm in point.curves.items():
        curves[tag], std_errors[tag], intervals[tag] = {}, {}, {}
        for a, curve in by_arm.items():
            draws = np.vstack([values[tag][a] for values, _ in successes])
            lower, upper = np.percentile(draws, [2.5, 97.5], axis=0)
            std_errors[tag][a] = draws.std(axis=0, ddof=1)
            intervals[tag][a] = (lower, upper)
            curves[tag][a] = curve.with_interval(lower, upper)
        draws = np.array([taus[tag] for _, taus in successes])
        tau_draws[tag] = draws
        estimate = point.tates[tag]
        lower, upper = np.percentile(draws, [2.5, 97.5])
        ci = (float(min(lower, estimate.tau)), float(max(upper, estimate.tau)))
        tates[tag] = replace(estimate, std_error=float(draws.std(ddof=1)), ci_95=ci)

    summary = BootstrapSummary(n_boot, len(failures), std_errors, intervals, tau_draws, failures)
    return point.with_uncertainty(curves, tates), summary
