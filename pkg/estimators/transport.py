"""Run a menu of transport estimators on one (trial, external) pair."""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

from hare.selection import HareConfig
from survival.errors import TransportError
from survival.records import ExternalSample, StudyData, TrialSample
from weighting.calibration import CalibrationFunction, parse_calibration_function
from weighting.weight_set import WeightSet, estimate_weights
from .augmented import estimate_acw, estimate_acw_denominator
from .curves import ALL_TAGS, ESTIMATOR_TAGS, SurvivalCurveEstimate, TateEstimate
from .outcome_models import fit_outcome_models
from .outcome_regression import estimate_or, estimate_rct_only
from .tate import estimate_tate
from .weighting_estimators import DEFAULT_CENSORING_CAP, estimate_cw, estimate_ipsw

logger = logging.getLogger(__name__)

_NEEDS_EXTERNAL = {"OR_PH", "OR_HARE", "IPSW", "CW", "ACW_PH", "ACW_HARE", "ACW_DENOM_PH"}
_NEEDS_WEIGHTS = {"IPSW", "CW", "ACW_PH", "ACW_HARE", "ACW_DENOM_PH"}
_OUTCOME_KIND = {"OR_PH": "cox", "ACW_PH": "cox", "RCT_PH": "cox", "ACW_DENOM_PH": "cox",
                 "OR_HARE": "hare", "ACW_HARE": "hare", "RCT_HARE": "hare"}


@dataclass(frozen=True)
class TransportSettings:
    horizon: float = 24.0
    estimators: Tuple[str, ...] = ESTIMATOR_TAGS
    calibration_functions: Optional[Tuple[str, ...]] = None
    estimate_propensity: bool = True
    censoring_cap: float = DEFAULT_CENSORING_CAP
    isotonize: bool = True
    hare: HareConfig = field(default_factory=HareConfig)

    def __post_init__(self):
        unknown = [tag for tag in self.estimators if tag not in ALL_TAGS]
        if unknown:
            raise ValueError(f"unknown estimator tag(s): {', '.join(unknown)}")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        object.__setattr__(self, "estimators", tuple(self.estimators))

    def functions(self) -> Optional[Tuple[CalibrationFunction, ...]]:
        if self.calibration_functions is None:
            return None
        return tuple(parse_calibration_function(g) for g in self.calibration_functions)


@dataclass(frozen=True, eq=False)
class TransportResult:
    curves: Dict[str, Dict[int, SurvivalCurveEstimate]]
    tates: Dict[str, TateEstimate]
    failures: Dict[str, str] = field(default_factory=dict)
    weights: Optional[WeightSet] = None
    outcome_models: Dict[str, dict] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    def with_uncertainty(self, curves, tates) -> "TransportResult":
        return replace(self, curves=curves, tates=tates)


def _fit_models(kind: str, trial: TrialSample, settings: TransportSettings, cache: dict):
    if kind not in cache:
        cache[kind] = fit_outcome_models(trial, kind, settings.hare)
    return cache[kind]


def _estimate(tag: str, trial: TrialSample, outcome_trial: TrialSample,
              external: Optional[ExternalSample], weights: Optional[WeightSet],
              settings: TransportSettings, cache: dict) -> Dict[int, SurvivalCurveEstimate]:
    horizon = settings.horizon
    if tag in ("RCT_PH", "RCT_HARE"):
        return estimate_rct_only(outcome_trial, horizon, _fit_models(_OUTCOME_KIND[tag], outcome_trial, settings, cache), tag)
    if tag in ("OR_PH", "OR_HARE"):
        return estimate_or(outcome_trial, external, horizon,
                           _fit_models(_OUTCOME_KIND[tag], outcome_trial, settings, cache), tag)
    if tag == "CW":
        return estimate_cw(trial, horizon, weights, settings.censoring_cap, settings.isotonize)
    if tag == "IPSW":
        return estimate_ipsw(trial, horizon, weights, settings.censoring_cap, settings.isotonize)
    models = _fit_models(_OUTCOME_KIND[tag], outcome_trial, settings, cache)
    if tag == "ACW_DENOM_PH":
        return estimate_acw_denominator(outcome_trial, external, horizon, weights, models,
                                        settings.censoring_cap, settings.isotonize)
    return estimate_acw(outcome_trial, external, horizon, weights, models, tag, settings.censoring_cap)


def run_transport(trial: TrialSample, external: Optional[ExternalSample],
                  settings: Optional[TransportSettings] = None, strict: bool = False) -> TransportResult:
    """Fit nuisances once and evaluate every requested estimator.

    Outcome models use the covariates both samples measure; the censoring
    models use every trial covariate. Weighting is skipped when no requested
    estimator needs it. With ``strict`` the first failure is raised instead of
    being recorded against its estimator tag.
    """
    settings = settings or TransportSettings()
    failures: Dict[str, str] = {}
    requested = list(settings.estimators)

    if external is None:
        for tag in [t for t in requested if t in _NEEDS_EXTERNAL]:
            failures[tag] = "no external sample configured"
    outcome_trial, external = StudyData(trial, external).aligned()

    weights = None
    if external is not None and any(tag in _NEEDS_WEIGHTS for tag in requested):
        try:
            weights = estimate_weights(trial, external, settings.functions(),
                                       settings.estimate_propensity, with_ipsw="IPSW" in requested)
        except (TransportError, ValueError) as exc:
            if strict:
                raise
            logger.error("weight estimation failed: %s", exc)
            for tag in requested:
                if tag in _NEEDS_WEIGHTS:
                    failures[tag] = f"weight estimation failed: {exc}"

    curves, tates, cache = {}, {}, {}
    for tag in requested:
        if tag in failures:
            continue
        try:
            curves[tag] = _estimate(tag, trial, outcome_trial, external, weights, settings, cache)
            tates[tag] = estimate_tate(curves[tag][1], curves[tag][0], settings.horizon)
            logger.debug("%s: S1=%.4f S0=%.4f tau=%.4f", tag, tates[tag].survival_treated,
                         tates[tag].survival_control, tates[tag].tau)
        except (TransportError, ValueError) as exc:
            if strict:
                raise
            logger.error("%s failed: %s", tag, exc)
            failures[tag] = str(exc)

    fitted = {}
    for kind, models in cache.items():
        fitted[kind] = {a: (m.to_dict() if hasattr(m, "to_dict") else
                            {"coefficients": m.coefficients.tolist(),
                             "covariates": list(m.covariate_names)})
                        for a, m in models.items()}
    return TransportResult(curves, tates, failures, weights, fitted)
