"""Maximum-likelihood fit of a linear-spline hazard model on a fixed basis."""

import json
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Union

import numpy as np

from survival.errors import ConvergenceError, SingularDesignError
from survival.records import TrialSample
from .basis import HareBasis
from .likelihood import HareLikelihood, segment_integral

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SelectionStep:
    action: str
    term: str
    n_terms: int
    criterion: float

    def to_dict(self) -> Dict:
        return {"action": self.action, "term": self.term, "n_terms": self.n_terms,
                "criterion": self.criterion}


@dataclass(frozen=True, eq=False)
class HareFit:
    """log lambda(t | x) = sum_k beta_k B_k(t | x).

    ``criterion`` is -2 loglik + penalty * K; the default penalty 2 makes it AIC.
    """
    basis: HareBasis
    coefficients: np.ndarray
    log_likelihood: float
    information_matrix: np.ndarray
    converged: bool = True
    n_iterations: int = 0
    n_events: int = 0
    selection_trace: List[SelectionStep] = field(default_factory=list)
    penalty: float = 2.0

    @property
    def aic(self) -> float:
        return -2.0 * self.log_likelihood + 2.0 * len(self.coefficients)

    @property
    def criterion(self) -> float:
        return -2.0 * self.log_likelihood + self.penalty * len(self.coefficients)

    @property
    def standard_errors(self) -> np.ndarray:
        return np.sqrt(np.diag(np.linalg.inv(self.information_matrix)))

    def log_hazard(self, x: np.ndarray, t: Union[float, np.ndarray]) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.basis.design(x, t) @ self.coefficients

    def cumulative_hazard(self, x: np.ndarray, times: np.ndarray) -> np.ndarray:
        """Lambda(t | x) for every row of ``x`` and every time: shape (n, len(times)).

        Past the last time knot the final linear segment is extended.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if np.any(times < 0):
            raise ValueError("t must be >= 0")
        covariate_part = self.basis.covariate_matrix(x)
        bounds = self.basis.segments()
        out = np.zeros((x.shape[0], len(times)))
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            length = np.clip(np.minimum(times, hi) - lo, 0.0, None)
            if not np.any(length > 0):
                break
            intercepts, slopes = self.basis.time_lines(lo, hi)
            a = covariate_part @ (self.coefficients * (intercepts + slopes * lo))
            b = covariate_part @ (self.coefficients * slopes)
            out += segment_integral(a[:, None], b[:, None], length[None, :])
        return out

    def to_dict(self) -> Dict:
        return {
            "basis": self.basis.to_dict(),
            "term_names": list(self.basis.names),
            "coefficients": self.coefficients.tolist(),
            "log_likelihood": self.log_likelihood,
            "aic": self.aic,
            "penalty": self.penalty,
            "information_matrix": self.information_matrix.tolist(),
            "n_events": self.n_events,
            "n_iterations": self.n_iterations,
            "selection_trace": [step.to_dict() for step in self.selection_trace],
        }

    @classmethod
    def from_dict(cls, payload: Dict) -> "HareFit":
        return cls(
            basis=HareBasis.from_dict(payload["basis"]),
            coefficients=np.asarray(payload["coefficients"], dtype=float),
            log_likelihood=float(payload["log_likelihood"]),
            information_matrix=np.asarray(payload["information_matrix"], dtype=float),
            n_iterations=int(payload.get("n_iterations", 0)),
            n_events=int(payload.get("n_events", 0)),
            selection_trace=[SelectionStep(**step) for step in payload.get("selection_trace", [])],
            penalty=float(payload.get("penalty", 2.0)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def cumulative_hazard(fit: HareFit, x: np.ndarray, t: Union[float, np.ndarray]) -> np.ndarray:
    """Lambda^H(t | x) for a single covariate vector (scalar t gives a scalar)."""
    values = fit.cumulative_hazard(np.reshape(x, (1, -1)), t)[0]
    return values[0] if np.ndim(t) == 0 else values


def conditional_survival_hare(fit: HareFit, x: np.ndarray, t: Union[float, np.ndarray]) -> np.ndarray:
    return np.exp(-cumulative_hazard(fit, x, t))


def _check_rank(basis: HareBasis, sample: TrialSample):
    """Design evaluated at each follow-up time and at half of it must have full column rank."""
    design = np.vstack([basis.design(sample.covariates, sample.time),
                        basis.design(sample.covariates, sample.time / 2.0)])
    if np.linalg.matrix_rank(design) == len(basis):
        return
    full = np.linalg.matrix_rank(design)
    involved = [name for k, name in enumerate(basis.names)
                if np.linalg.matrix_rank(np.delete(design, k, axis=1)) == full]
    raise SingularDesignError("rank-deficient spline design", involved)


def fit_hare_fixed_basis(sample: TrialSample, basis: HareBasis, tol: float = 1e-7,
                         max_iter: int = 100, start: Optional[np.ndarray] = None) -> HareFit:
    """Newton maximization of sum_i [Delta_i log lambda(U_i|X_i) - Lambda(U_i|X_i)].

    The likelihood is concave in beta, so the stationary point is the global
    maximum.

    Raises:
        ValueError: no constant term or fewer events than terms.
        SingularDesignError: basis columns are linearly dependent on the data.
        ConvergenceError: score sup-norm above ``tol`` after ``max_iter`` steps.
    """
    if not any(term.is_constant for term in basis.terms):
        raise ValueError("the basis must include the constant term")
    n_events = sample.n_events
    if n_events < len(basis):
        raise ValueError(f"need at least as many events ({n_events}) as basis terms ({len(basis)})")
    _check_rank(basis, sample)

    likelihood = HareLikelihood(basis, sample.time, sample.event, sample.covariates)
    if start is None:
        beta = np.zeros(len(basis))
        constant = next(k for k, term in enumerate(basis.terms) if term.is_constant)
        beta[constant] = np.log(n_events / sample.time.sum())
    else:
        beta = np.asarray(start, dtype=float).copy()

    loglik, score, hessian = likelihood.derivatives(beta)
    iteration = 0
    for iteration in range(max_iter + 1):
        gradient_norm = float(np.max(np.abs(score)))
        if gradient_norm < tol:
            break
        if iteration == max_iter:
            raise ConvergenceError(f"spline hazard fit did not converge in {max_iter} iterations",
                                   beta, gradient_norm)
        try:
            step = np.linalg.solve(-hessian, score)
        except np.linalg.LinAlgError:
            raise SingularDesignError("singular spline information matrix", basis.names)
        # Newton decrement at rounding level: the score is as small as the data's scale allows
        if score @ step < 1e-14 * max(1.0, abs(loglik)):
            break
        for _ in range(40):
            candidate = beta + step
            if likelihood.log_likelihood(candidate) >= loglik - 1e-12 * abs(loglik):
                break
            step = step / 2.0
        else:
            raise ConvergenceError("step-halving failed in spline hazard fit", beta, gradient_norm)
        beta = candidate
        loglik, score, hessian = likelihood.derivatives(beta)
        logger.debug("hare iteration %d loglik %.10g score %.3e", iteration, loglik, gradient_norm)

    return HareFit(basis, beta, loglik, -hessian, True, iteration, n_events)
