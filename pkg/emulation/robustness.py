"""Sensitivity of transported estimates to emulation randomness and to the copula."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional

import numpy as np

from estimators.curves import evaluation_grid
from estimators.transport import TransportSettings, run_transport
from survival.records import TrialSample
from .copula import CopulaSpec
from .sampler import emulate_sample, to_external_sample
from .summary_spec import SummarySpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VariantSpread:
    """Spread of one estimator across the repeats of one copula variant."""
    estimator_tag: str
    variant: str
    n_repeats: int
    curve_range: Dict[int, float]
    tau_range: float
    tau_mean: float

    @property
    def max_curve_range(self) -> float:
        return max(self.curve_range.values()) if self.curve_range else 0.0


@dataclass(frozen=True, eq=False)
class RobustnessReport:
    spreads: List[VariantSpread]
    variant_gaps: Dict[str, Dict[int, float]]
    grids: Dict[int, np.ndarray]
    mean_curves: Dict[str, Dict[str, Dict[int, np.ndarray]]]
    failures: List[str] = field(default_factory=list)

    def spread(self, tag: str, variant: str) -> VariantSpread:
        for item in self.spreads:
            if item.estimator_tag == tag and item.variant == variant:
                return item
        raise KeyError((tag, variant))

    def to_dict(self) -> Dict:
        return {
            "spreads": [{"estimator": s.estimator_tag, "variant": s.variant,
                         "n_repeats": s.n_repeats,
                         "max_curve_range": {str(a): v for a, v in s.curve_range.items()},
                         "tau_range": s.tau_range, "tau_mean": s.tau_mean}
                        for s in self.spreads],
            "variant_gaps": {tag: {str(a): v for a, v in gaps.items()}
                             for tag, gaps in self.variant_gaps.items()},
            "failures": list(self.failures),
        }


def _one_repeat(trial, spec, copula, settings, child, grids):
    frame = emulate_sample(spec, copula, spec.size, seed=int(child.generate_state(1)[0]))
    external = to_external_sample(frame, spec, trial.covariate_names)
    result = run_transport(trial, external, settings)
    curves = {tag: {a: by_arm[a].value_at(grids[a]) for a in (0, 1)}
              for tag, by_arm in result.curves.items()}
    taus = {tag: tate.tau for tag, tate in result.tates.items()}
    return curves, taus, [f"{tag}: {message}" for tag, message in result.failures.items()]


def emulation_robustness_report(trial: TrialSample, spec: SummarySpec,
                                copula_variants: Mapping[str, CopulaSpec],
                                settings: Optional[TransportSettings] = None,
                                n_repeats: int = 2, seed: int = 0,
                                n_jobs: int = 1) -> RobustnessReport:
    """Rerun transport estimation over repeated emulations for every copula variant.

    For each estimator and variant the report gives the maximum pointwise
    range of the repeated curves and the range of tau. ``variant_gaps`` is the
    maximum pointwise distance between the variants' mean curves. One repeat
    gives zero spread. Repeats derive their seeds from ``SeedSequence(seed)``.
    """
    if n_repeats < 1:
        raise ValueError("n_repeats must be >= 1")
    if not copula_variants:
        raise ValueError("at least one copula variant is required")
    settings = settings or TransportSettings()
    spec = spec.with_ranges_from(trial.frame())
    grids = {a: evaluation_grid(trial, a, settings.horizon) for a in (0, 1)}
    children = np.random.SeedSequence(seed).spawn(len(copula_variants) * n_repeats)

    spreads, failures, mean_curves = [], [], {}
    for v, (variant, copula) in enumerate(copula_variants.items()):
        jobs = children[v * n_repeats:(v + 1) * n_repeats]

        def run(child, copula=copula):
            return _one_repeat(trial, spec, copula, settings, child, grids)

        if n_jobs > 1:
            with ThreadPoolExecutor(max_workers=n_jobs) as pool:
                repeats = list(pool.map(run, jobs))
        else:
            repeats = [run(child) for child in jobs]
        for _, _, notes in repeats:
            failures.extend(f"{variant}: {note}" for note in notes)

        tags = set.intersection(*(set(curves) for curves, _, _ in repeats))
        for tag in sorted(tags):
            ranges, means = {}, {}
            for a in (0, 1):
                stack = np.vstack([curves[tag][a] for curves, _, _ in repeats])
                ranges[a] = float(np.max(stack.max(axis=0) - stack.min(axis=0)))
                means[a] = stack.mean(axis=0)
            taus = np.array([t[tag] for _, t, _ in repeats])
            spreads.append(VariantSpread(tag, variant, len(repeats), ranges,
                                         float(taus.max() - taus.min()), float(taus.mean())))
            mean_curves.setdefault(tag, {})[variant] = means
            logger.info("%s / %s: max curve range %.4f, tau range %.4f", variant, tag,
                        max(ranges.values()), spreads[-1].tau_range)

    gaps = {}
    for tag, by_variant in mean_curves.items():
        if len(by_variant) < 2:
            continue
        gaps[tag] = {}
        for a in (0, 1):
            stack = np.vstack([means[a] for means in by_variant.values()])
            gaps[tag][a] = float(np.max(stack.max(axis=0) - stack.min(axis=0)))
    return RobustnessReport(spreads, gaps, grids, mean_curves, failures)
