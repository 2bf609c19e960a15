"""Bundle of every nuisance weight the transported estimators consume."""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from survival.cox import CoxFit
from survival.records import ExternalSample, TrialSample
from .calibration import (CalibrationFunction, CalibrationResult, CalibrationSpec,
                          build_calibration_spec, solve_calibration)
from .censoring import fit_censoring_models
from .ipsw import IpswResult, ipsw_weights
from .propensity import PropensityFit, fit_propensity, known_propensity

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class WeightSet:
    """Calibration, sampling, propensity and censoring nuisances for one trial sample.

    ``calib_weights`` sum to one over the trial; ``propensity`` holds pi_A(X_i).
    """
    calibration_spec: CalibrationSpec
    calibration: CalibrationResult
    propensity_fit: PropensityFit
    censoring_fits: Dict[int, CoxFit]
    ipsw: Optional[IpswResult] = None
    notes: list = field(default_factory=list)
    arm: Optional[np.ndarray] = None
    censoring_covariates: Optional[np.ndarray] = None

    def censoring_cumulative_hazard(self, times: np.ndarray) -> np.ndarray:
        """Lambda^C_{A_i}(t | X_i) for every trial subject under its own arm's model: (n, T)."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        out = np.zeros((len(self.arm), len(times)))
        for a, fit in self.censoring_fits.items():
            rows = self.arm == a
            if rows.any():
                out[rows] = fit.cumulative_hazard(self.censoring_covariates[rows], times)
        return out

    @property
    def calib_weights(self) -> np.ndarray:
        return self.calibration.weights

    @property
    def dual_solution(self) -> np.ndarray:
        return self.calibration.dual_solution

    @property
    def propensity(self) -> np.ndarray:
        return self.propensity_fit.probabilities

    @property
    def propensity_coefficients(self) -> np.ndarray:
        return self.propensity_fit.coefficients

    @property
    def ipsw_weights(self) -> Optional[np.ndarray]:
        return None if self.ipsw is None else self.ipsw.weights

    @property
    def solver_diag(self) -> dict:
        diag = {"calibration": self.calibration.diagnostics(),
                "calibration_functions": list(self.calibration_spec.names),
                "target_moments": [float(v) for v in self.calibration_spec.target_moments],
                "propensity_estimated": self.propensity_fit.estimated,
                "propensity_range": [float(self.propensity.min()), float(self.propensity.max())]}
        if self.ipsw is not None:
            diag["ipsw"] = self.ipsw.diagnostics()
        if self.notes:
            diag["notes"] = list(self.notes)
        return diag


def estimate_weights(trial: TrialSample, external: ExternalSample,
                     functions: Optional[Sequence[CalibrationFunction]] = None,
                     estimate_propensity: bool = True,
                     with_ipsw: bool = False) -> WeightSet:
    """Fit every nuisance model on one (trial, external) pair.

    Calibration functions default to the first moments of the covariates both
    samples measure; the censoring models use every trial covariate.
    """
    spec = build_calibration_spec(external, functions, trial_names=trial.covariate_names)
    calibration = solve_calibration(trial, spec)
    logger.debug("calibration solved in %d iterations (ESS %.1f of %d)",
                 calibration.iterations, calibration.effective_sample_size, trial.n)
    if estimate_propensity:
        propensity = fit_propensity(trial, spec.functions)
    else:
        propensity = known_propensity(trial)
    censoring = fit_censoring_models(trial)
    ipsw = ipsw_weights(trial, external, spec.functions) if with_ipsw else None
    notes = [] if ipsw is None else list(ipsw.warnings)
    return WeightSet(spec, calibration, propensity, censoring, ipsw, notes,
                     arm=trial.arm.copy(), censoring_covariates=trial.covariates)
