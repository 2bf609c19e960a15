"""Calibration (entropy-balancing) weights solved through the Lagrangian dual.

The weights minimize sum w_i log w_i subject to sum w_i = 1 and
sum w_i g(X_i) = g_target. The dual root lambda gives
w_i = exp(lambda' g(X_i)) / sum_j exp(lambda' g(X_j)); under the loglinear
sampling-score model the same weights read exp(-eta' g) with eta = -lambda.
"""

import logging
import re
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from survival.errors import ConvergenceError, InfeasibleCalibrationError
from survival.records import ExternalSample, TrialSample

logger = logging.getLogger(__name__)

_POWER = re.compile(r"^(?P<col>.+)\^(?P<power>\d+)$")
_LOG = re.compile(r"^log\((?P<col>.+)\)$")
_SQRT = re.compile(r"^sqrt\((?P<col>.+)\)$")


@dataclass(frozen=True)
class CalibrationFunction:
    """A named covariate transform g_k evaluated on a covariate frame."""
    name: str
    transform: Callable[[pd.DataFrame], np.ndarray] = field(compare=False, repr=False)
    columns: Tuple[str, ...] = ()

    def __call__(self, frame: pd.DataFrame) -> np.ndarray:
        missing = [c for c in self.columns if c not in frame.columns]
        if missing:
            raise ValueError(f"calibration function {self.name!r} needs missing column(s) "
                             f"{', '.join(missing)}")
        values = np.asarray(self.transform(frame), dtype=float)
        if values.shape != (len(frame),):
            raise ValueError(f"calibration function {self.name!r} must return one value per row")
        return values


def parse_calibration_function(expression: str) -> CalibrationFunction:
    """Build g from ``col``, ``col^k``, ``log(col)``, ``sqrt(col)`` or ``a*b``."""
    expression = expression.strip()
    if "*" in expression:
        parts = [parse_calibration_function(p) for p in expression.split("*")]
        columns = tuple(c for p in parts for c in p.columns)

        def product(frame, parts=parts):
            out = np.ones(len(frame))
            for part in parts:
                out = out * part(frame)
            return out
        return CalibrationFunction(expression, product, columns)
    match = _POWER.match(expression)
    if match:
        col, power = match["col"], int(match["power"])
        return CalibrationFunction(expression, lambda f: f[col].to_numpy(float) ** power, (col,))
    match = _LOG.match(expression)
    if match:
        col = match["col"]
        return CalibrationFunction(expression, lambda f: np.log(f[col].to_numpy(float)), (col,))
    match = _SQRT.match(expression)
    if match:
        col = match["col"]
        return CalibrationFunction(expression, lambda f: np.sqrt(f[col].to_numpy(float)), (col,))
    return CalibrationFunction(expression, lambda f: f[expression].to_numpy(float), (expression,))


def default_calibration_functions(trial_names: Sequence[str],
                                  external_names: Sequence[str]) -> Tuple[CalibrationFunction, ...]:
    """First moments of every covariate measured in both samples.

    Categorical covariates arrive expanded to non-reference indicators, so their
    first moments are the category proportions.
    """
    available = set(external_names)
    return tuple(parse_calibration_function(name) for name in trial_names if name in available)


def evaluate_functions(functions: Sequence[CalibrationFunction], frame: pd.DataFrame) -> np.ndarray:
    if not functions:
        return np.empty((len(frame), 0))
    return np.column_stack([g(frame) for g in functions])


def compute_target_moments(external: ExternalSample,
                           functions: Sequence[CalibrationFunction]) -> np.ndarray:
    """Design-weighted mean of each g over the external sample."""
    if external.n == 0:
        raise ValueError("target moments need at least one external record")
    values = evaluate_functions(functions, external.frame())
    for k, g in enumerate(functions):
        if not np.all(np.isfinite(values[:, k])):
            raise ValueError(f"calibration function {g.name!r} is undefined on some external records")
    return external.design_weights @ values / external.design_weights.sum()


@dataclass(frozen=True, eq=False)
class CalibrationSpec:
    functions: Tuple[CalibrationFunction, ...]
    target_moments: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "functions", tuple(self.functions))
        target = np.asarray(self.target_moments, dtype=float)
        if target.shape != (len(self.functions),):
            raise ValueError("target_moments needs one entry per calibration function")
        object.__setattr__(self, "target_moments", target)

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(g.name for g in self.functions)


def build_calibration_spec(external: ExternalSample,
                           functions: Optional[Iterable[CalibrationFunction]] = None,
                           trial_names: Optional[Sequence[str]] = None) -> CalibrationSpec:
    if functions is None:
        names = trial_names if trial_names is not None else external.covariate_names
        functions = default_calibration_functions(names, external.covariate_names)
    functions = tuple(functions)
    return CalibrationSpec(functions, compute_target_moments(external, functions))


@dataclass(frozen=True, eq=False)
class CalibrationResult:
    weights: np.ndarray
    dual_solution: np.ndarray
    iterations: int
    constraint_residual: float

    @property
    def eta(self) -> np.ndarray:
        """Loglinear sampling-score coefficients: eta = -lambda."""
        return -self.dual_solution

    @property
    def effective_sample_size(self) -> float:
        return float(1.0 / np.sum(self.weights ** 2))

    def diagnostics(self) -> Dict[str, float]:
        return {
            "iterations": self.iterations,
            "constraint_residual": self.constraint_residual,
            "effective_sample_size": self.effective_sample_size,
            "max_weight": float(self.weights.max()),
        }


def loglinear_weights(eta: np.ndarray, g_values: np.ndarray) -> np.ndarray:
    """w_i = exp(-eta' g_i) / sum_j exp(-eta' g_j)."""
    score = -(g_values @ eta)
    score = np.exp(score - score.max())
    return score / score.sum()


def _check_feasible(values: np.ndarray, target: np.ndarray, names: Sequence[str]) -> np.ndarray:
    """Keep-mask of non-constant columns; raises when a target sits outside the trial range."""
    low, high = values.min(axis=0), values.max(axis=0)
    keep = np.ones(len(target), dtype=bool)
    extremes = []
    for k, name in enumerate(names):
        scale = max(1.0, abs(low[k]), abs(high[k]))
        if high[k] - low[k] <= 1e-12 * scale:
            keep[k] = False
            if abs(target[k] - low[k]) > 1e-10 * scale:
                extremes.append(f"{name} is constant {low[k]:.6g} in the trial, target {target[k]:.6g}")
        elif not (low[k] < target[k] < high[k]):
            extremes.append(f"{name} target {target[k]:.6g} outside trial range "
                            f"[{low[k]:.6g}, {high[k]:.6g}]")
    if extremes:
        raise InfeasibleCalibrationError("target moments unattainable", extremes)
    return keep


def solve_calibration(trial: TrialSample, spec: CalibrationSpec, tol: float = 1e-10,
                      max_iter: int = 100, constraint_tol: float = 1e-8) -> CalibrationResult:
    """Damped Newton on the convex dual log sum_i exp(lambda'(g_i - g_target)).

    g is standardized internally with trial means and standard deviations and
    lambda is returned on the original scale.

    Raises:
        InfeasibleCalibrationError: a target lies outside the trial range or
            the dual diverges.
        ConvergenceError: the constraint residual stays above ``constraint_tol``.
    """
    values = evaluate_functions(spec.functions, trial.frame())
    n, k = values.shape
    if n == 0:
        raise ValueError("calibration needs trial records")
    lam_full = np.zeros(k)
    if k == 0:
        return CalibrationResult(np.full(n, 1.0 / n), lam_full, 0, 0.0)

    keep = _check_feasible(values, spec.target_moments, spec.names)
    if not keep.any():
        logger.debug("every calibration function is constant at its target; uniform weights")
        residual = float(np.max(np.abs(values.mean(axis=0) - spec.target_moments)))
        return CalibrationResult(np.full(n, 1.0 / n), lam_full, 0, residual)
    center = values[:, keep].mean(axis=0)
    scale = values[:, keep].std(axis=0)
    z = (values[:, keep] - center) / scale
    deviation = z - (spec.target_moments[keep] - center) / scale
    tol = min(tol, constraint_tol / (10.0 * scale.max()))

    def objective(lam):
        eta = deviation @ lam
        top = eta.max()
        weights = np.exp(eta - top)
        total = weights.sum()
        return top + np.log(total), weights / total

    lam = np.zeros(keep.sum())
    value, weights = objective(lam)
    gradient = weights @ deviation
    iteration = 0
    for iteration in range(max_iter + 1):
        if np.max(np.abs(gradient)) < tol:
            break
        if iteration == max_iter:
            break
        hessian = (deviation * weights[:, None]).T @ deviation - np.outer(gradient, gradient)
        step = np.linalg.lstsq(hessian, -gradient, rcond=None)[0]
        slope = gradient @ step
        size = 1.0
        for _ in range(50):
            candidate = lam + size * step
            new_value, new_weights = objective(candidate)
            if new_value <= value + 1e-4 * size * slope or size < 1e-12:
                break
            size /= 2.0
        lam, value, weights = candidate, new_value, new_weights
        gradient = weights @ deviation
        logger.debug("calibration iteration %d residual %.3e", iteration, np.max(np.abs(gradient)))
        if np.max(np.abs(lam)) > 1e3:
            extremes = [f"{name} dual coefficient diverging" for name, l in
                        zip(np.array(spec.names)[keep], lam) if abs(l) > 1e2]
            raise InfeasibleCalibrationError("calibration dual diverged", extremes)

    residual = float(np.max(np.abs(values.T @ weights - spec.target_moments)))
    lam_full[keep] = lam / scale
    if residual > constraint_tol:
        raise ConvergenceError(f"calibration constraint residual {residual:.3e} above "
                               f"{constraint_tol:.1e} after {iteration} iterations",
                               lam_full, residual)
    return CalibrationResult(weights, lam_full, iteration, residual)
