"""Transport estimators for treatment-specific survival curves and the TATE."""

from .augmented import AcwComponents, acw_components, estimate_acw, estimate_acw_denominator
from .bootstrap import BootstrapSummary, bootstrap
from .curves import (ALL_TAGS, ESTIMATOR_TAGS, SurvivalCurveEstimate, TateEstimate,
                     evaluation_grid, finalize_curve)
from .outcome_models import OUTCOME_MODELS, average_survival, fit_outcome_models
from .outcome_regression import estimate_or, estimate_rct_only
from .tate import estimate_tate
from .transport import TransportResult, TransportSettings, run_transport
from .weighting_estimators import estimate_cw, estimate_ipsw

__all__ = [
    'AcwComponents',
    'acw_components',
    'estimate_acw',
    'estimate_acw_denominator',
    'BootstrapSummary',
    'bootstrap',
    'ALL_TAGS',
    'ESTIMATOR_TAGS',
    'SurvivalCurveEstimate',
    'TateEstimate',
    'evaluation_grid',
    'finalize_curve',
    'OUTCOME_MODELS',
    'average_survival',
    'fit_outcome_models',
    'estimate_or',
    'estimate_rct_only',
    'estimate_tate',
    'TransportResult',
    'TransportSettings',
    'run_transport',
    'estimate_cw',
    'estimate_ipsw',
]
