"""External-sample emulation from published summary statistics."""

from .copula import (OVERRIDE_SCALES, CopulaSpec, attainable_rank_correlation, estimate_copula_from_trial,
                     repair_correlation, spearman_to_gaussian)
from .robustness import RobustnessReport, VariantSpread, emulation_robustness_report
from .sampler import beta_parameters, emulate_sample, expand_categories, to_external_sample
from .summary_spec import BUILTIN_SUMMARIES, SummarySpec, VariableSummary, load_summary_spec

__all__ = [
    'OVERRIDE_SCALES',
    'CopulaSpec',
    'attainable_rank_correlation',
    'estimate_copula_from_trial',
    'repair_correlation',
    'spearman_to_gaussian',
    'RobustnessReport',
    'VariantSpread',
    'emulation_robustness_report',
    'beta_parameters',
    'emulate_sample',
    'expand_categories',
    'to_external_sample',
    'BUILTIN_SUMMARIES',
    'SummarySpec',
    'VariableSummary',
    'load_summary_spec',
]
