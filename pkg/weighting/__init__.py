"""Nuisance weights: calibration, propensity, sampling (IPSW) and censoring."""

from .calibration import (CalibrationFunction, CalibrationResult, CalibrationSpec,
                          build_calibration_spec, compute_target_moments,
                          default_calibration_functions, loglinear_weights,
                          parse_calibration_function, solve_calibration)
from .censoring import censoring_survival, fit_censoring_models
from .ipsw import IpswResult, ipsw_weights
from .propensity import PropensityFit, fit_propensity, known_propensity
from .weight_set import WeightSet, estimate_weights

__all__ = [
    'CalibrationFunction',
    'CalibrationResult',
    'CalibrationSpec',
    'build_calibration_spec',
    'compute_target_moments',
    'default_calibration_functions',
    'loglinear_weights',
    'parse_calibration_function',
    'solve_calibration',
    'censoring_survival',
    'fit_censoring_models',
    'IpswResult',
    'ipsw_weights',
    'PropensityFit',
    'fit_propensity',
    'known_propensity',
    'WeightSet',
    'estimate_weights',
]
