"""Inverse-odds-of-sampling weights from a pooled trial-membership model."""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from survival.records import ExternalSample, TrialSample
from .calibration import CalibrationFunction, default_calibration_functions
from .propensity import design_matrix, fit_logistic

logger = logging.getLogger(__name__)

UNSTABLE_PROBABILITY = 1e-6
EXTREME_PROBABILITY = 1e-3


@dataclass(frozen=True, eq=False)
class IpswResult:
    weights: np.ndarray
    membership_probabilities: np.ndarray
    coefficients: np.ndarray
    term_names: Tuple[str, ...]
    warnings: List[str] = field(default_factory=list)
    extreme_weights: bool = False

    @property
    def effective_sample_size(self) -> float:
        return float(1.0 / np.sum(self.weights ** 2))

    def diagnostics(self) -> dict:
        return {
            "min_trial_membership_probability": float(self.membership_probabilities.min()),
            "effective_sample_size": self.effective_sample_size,
            "max_weight": float(self.weights.max()),
            "extreme_weights": self.extreme_weights,
            "warnings": list(self.warnings),
        }


def ipsw_weights(trial: TrialSample, external: ExternalSample,
                 functions: Optional[Sequence[CalibrationFunction]] = None) -> IpswResult:
    """Fit P(trial | pooled, X) on g(X) and weight trial subjects by (1 - p) / p.

    External records enter with design weights rescaled to sum to m, so the
    fitted odds are on the target population's scale up to a constant that
    the final normalization removes.
    """
    if functions is None:
        functions = default_calibration_functions(trial.covariate_names, external.covariate_names)
    trial_design, names = design_matrix(trial.frame(), functions)
    external_design, _ = design_matrix(external.frame(), functions)
    design = np.vstack([trial_design, external_design])
    membership = np.concatenate([np.ones(trial.n), np.zeros(external.n)])
    freq = np.concatenate([np.ones(trial.n),
                           external.design_weights * external.n / external.design_weights.sum()])

    fit = fit_logistic(membership, design, names, freq_weights=freq)
    p = fit.probabilities[:trial.n]
    notes = []
    smallest = float(p.min())
    if smallest < UNSTABLE_PROBABILITY:
        message = f"trial-membership probability {smallest:.3g} below {UNSTABLE_PROBABILITY:g}; IPSW may not be stable"
        logger.warning(message)
        notes.append(message)
    extreme = smallest < EXTREME_PROBABILITY
    if extreme:
        notes.append(f"extreme IPSW weights: min trial-membership probability {smallest:.3g}")
    odds = (1.0 - p) / np.maximum(p, np.finfo(float).tiny)
    weights = odds / odds.sum()
    return IpswResult(weights, p, fit.coefficients, names, notes, extreme)
