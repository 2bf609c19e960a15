"""Cox proportional-hazards regression with Breslow ties and Breslow baseline."""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from .errors import ConvergenceError, SingularDesignError
from .records import SubjectRecord, TrialSample

logger = logging.getLogger(__name__)

RESPONSES = ("event", "censoring")


@dataclass(frozen=True, eq=False)
class CoxFit:
    """Fitted treatment-specific hazard model lambda_0(t) exp(beta' x).

    The baseline cumulative hazard is stored at its jump times and evaluated
    as a right-continuous step function, constant after the last jump.
    """
    coefficients: np.ndarray
    baseline_times: np.ndarray
    baseline_cumhaz: np.ndarray
    log_partial_likelihood: float
    information_matrix: np.ndarray
    converged: bool
    n_iterations: int
    covariate_names: Tuple[str, ...] = ()
    response: str = "event"
    n_events: int = 0

    def baseline_at(self, t: Union[float, np.ndarray]) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        index = np.searchsorted(self.baseline_times, t, side="right")
        return np.concatenate(([0.0], self.baseline_cumhaz))[index]

    def linear_predictor(self, x: np.ndarray) -> np.ndarray:
        """beta' x for a single covariate vector or for each row of a matrix."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if len(self.coefficients) == 0:
            return np.zeros(x.shape[0]) if x.ndim > 1 else np.float64(0.0)
        return x @ self.coefficients

    def cumulative_hazard(self, x: np.ndarray, times: np.ndarray) -> np.ndarray:
        """Lambda_0(t) exp(beta' x) for every row of ``x`` and every time: shape (n, len(times))."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != len(self.coefficients):
            x = x.reshape(-1, len(self.coefficients))
        risk = np.exp(self.linear_predictor(x))
        return np.outer(risk, self.baseline_at(np.atleast_1d(times)))

    @property
    def standard_errors(self) -> np.ndarray:
        if len(self.coefficients) == 0:
            return np.empty(0)
        return np.sqrt(np.diag(np.linalg.inv(self.information_matrix)))


class _RiskSets:
    """Sorted data and event-time bookkeeping reused across Newton iterations."""

    def __init__(self, time: np.ndarray, event: np.ndarray, covariates: np.ndarray):
        order = np.argsort(time, kind="stable")
        self.time = time[order]
        self.event = event[order]
        self.covariates = covariates[order]
        self.event_times = np.unique(self.time[self.event])
        # first sorted position with time >= t_k: start of each risk set
        self.risk_start = np.searchsorted(self.time, self.event_times, side="left")
        index = np.searchsorted(self.event_times, self.time[self.event])
        self.deaths = np.bincount(index, minlength=len(self.event_times)).astype(float)
        p = covariates.shape[1]
        self.event_sums = np.zeros((len(self.event_times), p))
        np.add.at(self.event_sums, index, self.covariates[self.event])

    def evaluate(self, beta: np.ndarray, with_second: bool = True):
        eta = self.covariates @ beta if len(beta) else np.zeros(len(self.time))
        shift = eta.max()
        risk = np.exp(eta - shift)
        s0 = np.cumsum(risk[::-1])[::-1][self.risk_start]
        loglik = float((self.event_sums @ beta).sum() - self.deaths @ (np.log(s0) + shift))
        weighted = risk[:, None] * self.covariates
        s1 = np.cumsum(weighted[::-1], axis=0)[::-1][self.risk_start]
        mean = s1 / s0[:, None]
        score = (self.event_sums - self.deaths[:, None] * mean).sum(axis=0)
        information = None
        if with_second:
            outer = weighted[:, :, None] * self.covariates[:, None, :]
            s2 = np.cumsum(outer[::-1], axis=0)[::-1][self.risk_start]
            second = s2 / s0[:, None, None] - mean[:, :, None] * mean[:, None, :]
            information = np.tensordot(self.deaths, second, axes=1)
        return loglik, score, information, s0 * np.exp(shift)


def _collinear_columns(covariates: np.ndarray, names: Sequence[str]) -> list:
    centered = covariates - covariates.mean(axis=0)
    constant = [names[j] for j in range(covariates.shape[1]) if np.allclose(centered[:, j], 0.0)]
    if constant:
        return constant
    full_rank = np.linalg.matrix_rank(centered)
    involved = []
    for j in range(covariates.shape[1]):
        reduced = np.delete(centered, j, axis=1)
        if np.linalg.matrix_rank(reduced) == full_rank:
            involved.append(names[j])
    return involved


def _as_arrays(data: Union[TrialSample, Sequence[SubjectRecord]]):
    if isinstance(data, TrialSample):
        return data.time, data.event, data.covariates, data.covariate_names
    records = [r for r in data]
    if any(not r.is_trial for r in records):
        raise ValueError("Cox models are fitted on trial records only")
    time = np.array([r.followup_time for r in records], dtype=float)
    event = np.array([bool(r.event) for r in records])
    covariates = np.array([r.covariates for r in records], dtype=float)
    if covariates.ndim != 2:
        covariates = covariates.reshape(len(records), -1)
    names = tuple(f"x{j}" for j in range(covariates.shape[1]))
    return time, event, covariates, names


def fit_cox(data: Union[TrialSample, Sequence[SubjectRecord]], response: str = "event",
            tol: float = 1e-9, max_iter: int = 50) -> CoxFit:
    """Maximize the Breslow partial likelihood by Newton's method with step-halving.

    Args:
        data: trial subjects of one arm.
        response: "event" models T (indicator Delta); "censoring" models C
            (indicator 1 - Delta).
        tol: sup-norm tolerance on the score.
        max_iter: Newton iteration limit.

    Returns:
        CoxFit with the Breslow baseline cumulative hazard at the optimum.

    Raises:
        SingularDesignError: a covariate is constant or columns are collinear.
        ConvergenceError: the score did not reach ``tol`` within ``max_iter``, or
            30 step-halvings could not keep the partial likelihood from falling.
    """
    if response not in RESPONSES:
        raise ValueError(f"response must be one of {RESPONSES}, got {response!r}")
    time, event, covariates, names = _as_arrays(data)
    if len(time) == 0:
        raise ValueError("Cox fit needs at least one record")
    indicator = event if response == "event" else ~event
    p = covariates.shape[1]
    n_events = int(indicator.sum())

    if n_events == 0 and response == "censoring":
        logger.debug("no censoring events; censoring survival is identically 1")
        return CoxFit(np.zeros(p), np.empty(0), np.empty(0), 0.0, np.zeros((p, p)),
                      True, 0, tuple(names), response, 0)
    if p >= n_events:
        raise ValueError(f"need more {response} events ({n_events}) than covariates ({p})")

    if p and np.linalg.matrix_rank(covariates - covariates.mean(axis=0)) < p:
        raise SingularDesignError("singular information matrix; collinear columns",
                                  _collinear_columns(covariates, names))

    risk_sets = _RiskSets(time, indicator, covariates)
    beta = np.zeros(p)
    loglik, score, information, s0 = risk_sets.evaluate(beta)
    converged = False
    iteration = 0
    for iteration in range(max_iter + 1):
        gradient_norm = float(np.max(np.abs(score))) if p else 0.0
        logger.debug("cox iteration %d loglik %.10g score %.3e", iteration, loglik, gradient_norm)
        if gradient_norm < tol:
            converged = True
            break
        if iteration == max_iter:
            break
        try:
            step = np.linalg.solve(information, score)
        except np.linalg.LinAlgError:
            raise SingularDesignError("singular information matrix; collinear columns",
                                      _collinear_columns(covariates, names))
        for _ in range(30):
            candidate = beta + step
            new = risk_sets.evaluate(candidate)
            if new[0] >= loglik - 1e-12 * abs(loglik):
                break
            step = step / 2.0
        else:
            raise ConvergenceError(f"step-halving failed in the Cox {response} model at iteration {iteration}",
                                   beta, gradient_norm)
        beta = candidate
        loglik, score, information, s0 = new

    if not converged:
        raise ConvergenceError(f"Cox {response} model did not converge in {max_iter} iterations",
                               beta, gradient_norm)
    if p and np.linalg.matrix_rank(information) < p:
        raise SingularDesignError("singular information matrix; collinear columns",
                                  _collinear_columns(covariates, names))

    cumhaz = np.cumsum(risk_sets.deaths / s0)
    return CoxFit(beta, risk_sets.event_times, cumhaz, loglik,
                  information if p else np.zeros((0, 0)), True, iteration,
                  tuple(names), response, n_events)


def conditional_survival(fit: CoxFit, x: np.ndarray, t: Union[float, np.ndarray]) -> np.ndarray:
    """S(t | x) = exp(-Lambda_0(t) exp(beta' x)), in (0, 1]."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be >= 0")
    return np.exp(-fit.baseline_at(t) * np.exp(fit.linear_predictor(np.asarray(x, dtype=float))))
