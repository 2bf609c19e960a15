"""Survival core: Kaplan-Meier, Cox regression and the Schoenfeld PH test."""

from .cox import CoxFit, conditional_survival, fit_cox
from .kaplan_meier import KaplanMeierCurve, fit_kaplan_meier, nelson_aalen
from .records import ExternalSample, StudyData, SubjectRecord, TrialSample
from .schoenfeld import PhTestResult, schoenfeld_ph_test

__all__ = [
    'CoxFit',
    'conditional_survival',
    'fit_cox',
    'KaplanMeierCurve',
    'fit_kaplan_meier',
    'nelson_aalen',
    'ExternalSample',
    'StudyData',
    'SubjectRecord',
    'TrialSample',
    'PhTestResult',
    'schoenfeld_ph_test',
]
