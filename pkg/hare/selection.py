"""Stepwise addition / Wald deletion search over spline hazard bases, scored by a penalized likelihood."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from survival.errors import ConvergenceError, SingularDesignError
from survival.records import TrialSample
from .basis import HareBasis, HareTerm, start_basis
from .fit import HareFit, SelectionStep, fit_hare_fixed_basis

logger = logging.getLogger(__name__)

_CRITERION_TOLERANCE = 1e-9
LOG_N_PENALTY = "log_n"


@dataclass(frozen=True)
class HareConfig:
    """Search settings.

    ``max_terms=None`` means min(12, events // 10); the start set is never
    truncated, so a cap at or below its size disables the search.

    ``penalty`` is the per-term cost in -2 loglik + penalty * K: 2 (AIC) or
    ``"log_n"`` for log(sample size). With 2 the search picks the best of
    many candidates at every step and admits spurious time-dependent terms
    on proportional-hazards data far more often than ``"log_n"`` does.
    """
    max_terms: Optional[int] = None
    covariate_knot_quantiles: Tuple[float, ...] = (0.25, 0.5, 0.75)
    time_knot_quantiles: Tuple[float, ...] = (0.25, 0.5, 0.75)
    min_events: int = 25
    n_jobs: int = 1
    penalty: Union[float, str] = 2.0

    def __post_init__(self):
        if isinstance(self.penalty, str):
            if self.penalty != LOG_N_PENALTY:
                raise ValueError(f"penalty must be a positive number or {LOG_N_PENALTY!r}, "
                                 f"got {self.penalty!r}")
        elif not self.penalty > 0:
            raise ValueError(f"penalty must be positive, got {self.penalty}")

    @classmethod
    def from_dict(cls, payload: dict) -> "HareConfig":
        payload = dict(payload or {})
        for key in ("covariate_knot_quantiles", "time_knot_quantiles"):
            if key in payload:
                payload[key] = tuple(float(q) for q in payload[key])
        if "penalty" in payload and not isinstance(payload["penalty"], str):
            payload["penalty"] = float(payload["penalty"])
        return cls(**payload)

    def term_cap(self, n_events: int) -> int:
        return self.max_terms if self.max_terms is not None else min(12, n_events // 10)

    def penalty_value(self, n: int) -> float:
        return math.log(n) if self.penalty == LOG_N_PENALTY else float(self.penalty)


def _quantile_knots(values: np.ndarray, quantiles: Sequence[float]) -> List[float]:
    if len(np.unique(values)) <= 2:
        return []
    knots = np.unique(np.quantile(values, quantiles))
    return [float(k) for k in knots if values.min() < k < values.max()]


def candidate_terms(basis: HareBasis, sample: TrialSample, config: HareConfig) -> List[HareTerm]:
    """Terms whose parents are all present and which are not yet in the basis."""
    present = set(basis.terms)
    candidates = []
    linear = [t for t in basis.terms if len(t.covariate_factors) == 1 and not t.has_time]
    time_factors = [t for t in basis.terms if t.has_time and not t.covariate_factors]

    for term in linear:
        j, knot = term.covariate_factors[0]
        if knot is None:
            for k in _quantile_knots(sample.covariates[:, j], config.covariate_knot_quantiles):
                candidates.append(HareTerm(((j, k),)))
    if any(t.time_linear and not t.covariate_factors for t in basis.terms):
        event_times = sample.time[sample.event]
        if len(event_times):
            knots = np.unique(np.quantile(event_times, config.time_knot_quantiles))
            candidates.extend(HareTerm(time_knot=float(k)) for k in knots if k > 0)
    for first in range(len(linear)):
        for second in range(first + 1, len(linear)):
            (j1, k1), (j2, k2) = linear[first].covariate_factors[0], linear[second].covariate_factors[0]
            if j1 != j2:
                candidates.append(HareTerm(((j1, k1), (j2, k2))))
    for term in linear:
        for time_term in time_factors:
            candidates.append(HareTerm(term.covariate_factors, time_term.time_linear,
                                       time_term.time_knot))

    unique = []
    for term in candidates:
        if term not in present and term not in unique:
            unique.append(term)
    return unique


def _try_fit(sample: TrialSample, basis: HareBasis, penalty: float) -> Optional[HareFit]:
    try:
        return replace(fit_hare_fixed_basis(sample, basis), penalty=penalty)
    except (SingularDesignError, ConvergenceError, ValueError) as exc:
        logger.debug("skipping basis %s: %s", basis.names[-1], exc)
        return None


def _removable(basis: HareBasis, protected: set) -> List[HareTerm]:
    needed = {parent for term in basis.terms for parent in term.parents()}
    return [term for term in basis.terms if term not in protected and term not in needed]


def fit_hare(sample: TrialSample, config: Optional[HareConfig] = None) -> HareFit:
    """Greedy search from {constant, t, linear main effects}, scored by
    -2 loglik + penalty * K (AIC with the default penalty).

    Addition refits the model for every candidate and keeps the best score
    while it improves and the term cap allows; deletion then drops the added
    term with the smallest Wald statistic while the score improves. The
    best-scoring model visited is returned with the full trace.

    Start-set terms are never deleted, even when dropping one would lower
    the score; the returned model always contains the linear time term and
    every linear main effect.

    Raises:
        ValueError: fewer than ``config.min_events`` events.
    """
    config = config or HareConfig()
    if sample.n_events < config.min_events:
        raise ValueError(f"spline hazard selection needs at least {config.min_events} events, "
                         f"got {sample.n_events}")
    penalty = config.penalty_value(sample.n)
    basis = start_basis(sample.covariates, sample.covariate_names)
    protected = set(basis.terms)
    current = replace(fit_hare_fixed_basis(sample, basis), penalty=penalty)
    trace = [SelectionStep("start", ",".join(basis.names), len(basis), current.criterion)]
    best = current
    cap = max(config.term_cap(sample.n_events), len(basis))
    logger.debug("hare start criterion %.4f (penalty %.3g), term cap %d", current.criterion, penalty, cap)

    executor = ThreadPoolExecutor(max_workers=config.n_jobs) if config.n_jobs > 1 else None
    try:
        while len(current.basis) < cap:
            candidates = candidate_terms(current.basis, sample, config)
            if not candidates:
                break
            bases = [current.basis.with_term(term) for term in candidates]
            if executor is not None:
                fits = list(executor.map(lambda b: _try_fit(sample, b, penalty), bases))
            else:
                fits = [_try_fit(sample, b, penalty) for b in bases]
            scored = [(fit.criterion, k) for k, fit in enumerate(fits) if fit is not None]
            if not scored:
                break
            value, k = min(scored)
            if value >= current.criterion - _CRITERION_TOLERANCE:
                break
            current = fits[k]
            trace.append(SelectionStep("add", candidates[k].name(sample.covariate_names),
                                       len(current.basis), current.criterion))
            if current.criterion < best.criterion:
                best = current
    finally:
        if executor is not None:
            executor.shutdown()

    while True:
        removable = _removable(current.basis, protected)
        if not removable:
            break
        z = np.abs(current.coefficients) / current.standard_errors
        index = {term: k for k, term in enumerate(current.basis.terms)}
        weakest = min(removable, key=lambda term: z[index[term]])
        reduced = _try_fit(sample, current.basis.without_term(weakest), penalty)
        if reduced is None or reduced.criterion >= current.criterion - _CRITERION_TOLERANCE:
            break
        current = reduced
        trace.append(SelectionStep("delete", weakest.name(sample.covariate_names),
                                   len(current.basis), current.criterion))
        if current.criterion < best.criterion:
            best = current

    logger.info("hare selected %d terms (criterion %.3f): %s", len(best.basis), best.criterion,
                ", ".join(best.basis.names))
    return HareFit(best.basis, best.coefficients, best.log_likelihood, best.information_matrix,
                   best.converged, best.n_iterations, best.n_events, trace, penalty)
