"""Logistic treatment-propensity model pi_A(X; rho) fitted on the trial."""

import logging
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import statsmodels.api as sm
from statsmodels.tools.sm_exceptions import PerfectSeparationError, PerfectSeparationWarning

from survival.errors import SeparationError
from survival.records import TrialSample
from .calibration import CalibrationFunction, default_calibration_functions, evaluate_functions

logger = logging.getLogger(__name__)

PROBABILITY_CLIP = 1e-6
# |linear predictor| beyond this means fitted probabilities at 0 or 1 in double precision
_SEPARATION_LINEAR_PREDICTOR = 30.0


@dataclass(frozen=True, eq=False)
class LogisticFit:
    coefficients: np.ndarray
    standard_errors: np.ndarray
    probabilities: np.ndarray
    term_names: Tuple[str, ...]


def fit_logistic(response: np.ndarray, design: np.ndarray, term_names: Sequence[str],
                 freq_weights: Optional[np.ndarray] = None) -> LogisticFit:
    """Maximum-likelihood logistic regression; ``design`` must carry its intercept column.

    Raises:
        SeparationError: the response is constant or statsmodels detects
            perfect / quasi-complete separation.
    """
    response = np.asarray(response, dtype=float)
    if len(np.unique(response)) < 2:
        raise SeparationError(f"response takes the single value {response[0]:g}; "
                              "the logistic model is separated")
    model = sm.GLM(response, design, family=sm.families.Binomial(), freq_weights=freq_weights)
    with warnings.catch_warnings():
        warnings.simplefilter("error", PerfectSeparationWarning)
        try:
            result = model.fit()
        except (PerfectSeparationError, PerfectSeparationWarning) as exc:
            raise SeparationError(f"perfect separation in logistic fit: {exc}") from exc
    params = np.asarray(result.params, dtype=float)
    linear = design @ params
    if not np.all(np.isfinite(params)) or np.max(np.abs(linear)) > _SEPARATION_LINEAR_PREDICTOR:
        raise SeparationError("quasi-complete separation in logistic fit")
    return LogisticFit(params, np.asarray(result.bse, dtype=float),
                       1.0 / (1.0 + np.exp(-linear)), tuple(term_names))


def design_matrix(frame, functions: Sequence[CalibrationFunction]):
    values = evaluate_functions(functions, frame)
    return np.column_stack([np.ones(len(frame)), values]), ("(Intercept)",) + tuple(g.name for g in functions)


@dataclass(frozen=True, eq=False)
class PropensityFit:
    """pi_A(X_i) for every trial subject, clipped to [1e-6, 1 - 1e-6]."""
    coefficients: np.ndarray
    standard_errors: np.ndarray
    probabilities: np.ndarray
    term_names: Tuple[str, ...]
    estimated: bool = True

    def arm_probabilities(self, arm: np.ndarray) -> np.ndarray:
        """pi_{a,i} = A_i pi_A + (1 - A_i)(1 - pi_A)."""
        return np.where(np.asarray(arm) == 1, self.probabilities, 1.0 - self.probabilities)


def fit_propensity(trial: TrialSample,
                   functions: Optional[Sequence[CalibrationFunction]] = None) -> PropensityFit:
    """Logistic fit of the arm indicator on g(X).

    Raises:
        SeparationError: only one arm is present or the arms are separated by g(X).
    """
    present = np.unique(trial.arm)
    if len(present) < 2:
        raise SeparationError(f"both arms must be present, found only arm {present[0]}")
    if functions is None:
        functions = default_calibration_functions(trial.covariate_names, trial.covariate_names)
    design, names = design_matrix(trial.frame(), functions)
    fit = fit_logistic(trial.arm, design, names)
    probabilities = np.clip(fit.probabilities, PROBABILITY_CLIP, 1.0 - PROBABILITY_CLIP)
    logger.debug("propensity range [%.4f, %.4f]", probabilities.min(), probabilities.max())
    return PropensityFit(fit.coefficients, fit.standard_errors, probabilities, names)


def known_propensity(trial: TrialSample) -> PropensityFit:
    """Constant pi_A equal to the observed arm-1 fraction (randomization probability)."""
    share = float(np.mean(trial.arm == 1))
    if share in (0.0, 1.0):
        raise SeparationError("both arms must be present")
    intercept = np.log(share / (1.0 - share))
    return PropensityFit(np.array([intercept]), np.array([np.nan]),
                         np.full(trial.n, share), ("(Intercept)",), estimated=False)
