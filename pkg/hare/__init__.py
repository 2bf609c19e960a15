"""Linear-spline hazard regression with stepwise AIC selection."""

from .basis import HareBasis, HareTerm, start_basis
from .fit import (HareFit, SelectionStep, conditional_survival_hare, cumulative_hazard,
                  fit_hare_fixed_basis)
from .selection import HareConfig, candidate_terms, fit_hare

__all__ = [
    'HareBasis',
    'HareTerm',
    'start_basis',
    'HareFit',
    'SelectionStep',
    'conditional_survival_hare',
    'cumulative_hazard',
    'fit_hare_fixed_basis',
    'HareConfig',
    'candidate_terms',
    'fit_hare',
]
