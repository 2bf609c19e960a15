"""Orchestrates ingestion, diagnostics, estimation, bootstrap and file emission."""

import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from emulation.copula import CopulaSpec, estimate_copula_from_trial
from emulation.sampler import emulate_sample, to_external_sample
from emulation.summary_spec import SummarySpec, load_summary_spec
from estimators.bootstrap import bootstrap
from estimators.transport import TransportResult, run_transport
from survival.errors import ConfigError, TransportError
from survival.kaplan_meier import fit_kaplan_meier
from survival.cox import fit_cox
from survival.records import ExternalSample, TrialSample
from survival.schoenfeld import schoenfeld_ph_test
from .config import ExternalConfig, RunConfig
from .ingest import IngestResult, ingest_csv
from . import outputs

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PipelineResult:
    result: Optional[TransportResult]
    diagnostics: Dict[str, Any]
    files: List[str] = field(default_factory=list)
    output_dir: str = ""


def load_trial(config: RunConfig) -> Tuple[TrialSample, IngestResult]:
    """Trial sample restricted to the selected arm pair."""
    trial_data = ingest_csv(config.resolve(config.trial_path), config.trial_schema, config.arms)
    return TrialSample.from_records(trial_data.records, trial_data.covariate_names), trial_data


def load_samples(config: RunConfig) -> Tuple[TrialSample, Optional[ExternalSample], Dict[str, Any]]:
    """Trial sample (arm-filtered) and the external sample, read or emulated."""
    trial, trial_data = load_trial(config)
    info: Dict[str, Any] = {"trial_ingest": trial_data.report.to_dict()}

    external = None
    cfg = config.external
    if cfg is None:
        if trial_data.report.n_external:
            external = ExternalSample.from_records(trial_data.records, trial_data.covariate_names)
    elif cfg.emulated:
        spec = load_summary_spec(cfg.summary, cfg.renormalize).with_ranges_from(trial.frame())
        copula = resolve_copula(cfg, spec, trial, config)
        frame = emulate_sample(spec, copula, cfg.size, cfg.seed)
        external = to_external_sample(frame, spec, trial.covariate_names)
        info["emulation"] = {"summary": spec.name, "size": len(frame), "seed": cfg.seed,
                             "copula": copula.to_dict(), "notes": list(spec.notes)}
    else:
        external_data = ingest_csv(config.resolve(cfg.path), cfg.schema)
        info["external_ingest"] = external_data.report.to_dict()
        external = ExternalSample.from_records(external_data.records, external_data.covariate_names)
    return trial, external, info


def resolve_copula(cfg: ExternalConfig, spec: SummarySpec, trial: Optional[TrialSample],
                   config: Optional[RunConfig] = None) -> CopulaSpec:
    """'identity', 'trial' (rank correlations of the trial sample) or a JSON file, then overrides."""
    names = [v.name for v in spec.present_variables]
    source = cfg.copula
    if isinstance(source, dict):
        copula = CopulaSpec.from_dict(source)
    elif source == "identity" or len(names) < 2:
        copula = CopulaSpec.identity(names)
    elif source == "trial":
        if trial is None:
            raise ConfigError("copula 'trial' needs a trial data file")
        copula = estimate_copula_from_trial(trial.frame(), names, spec)
    else:
        path = config.resolve(source) if config is not None else source
        copula = CopulaSpec.from_dict(outputs.read_json(path))
    if cfg.overrides:
        copula = copula.with_overrides({(a, b): rho for a, b, rho in cfg.overrides},
                                        cfg.override_scale, spec)
    return copula


def ph_diagnostics(trial: TrialSample) -> Dict[str, Any]:
    """Schoenfeld tests per arm plus the unadjusted Kaplan-Meier curves."""
    tests, km = {}, {}
    for a in (0, 1):
        subset = trial.arm_subset(a)
        try:
            result = schoenfeld_ph_test(fit_cox(subset), subset)
            tests[f"arm_{a}"] = [{"covariate": name, "chisq": chisq, "df": df, "p_value": p}
                                 for name, chisq, df, p in result.as_rows()]
        except (TransportError, ValueError) as exc:
            logger.warning("PH test for arm %d failed: %s", a, exc)
            tests[f"arm_{a}"] = {"error": str(exc)}
        curve = fit_kaplan_meier(subset)
        km[f"arm_{a}"] = {"time": curve.event_times, "survival": curve.survival_values,
                          "at_risk": curve.at_risk_counts, "events": curve.event_counts}
    return {"ph_tests": tests, "unadjusted_km": km}


def weight_diagnostics(result: TransportResult) -> Dict[str, Any]:
    if result.weights is None:
        return {}
    diag = result.weights.solver_diag
    propensity = result.weights.propensity
    diag["propensity_summary"] = {"min": propensity.min(), "max": propensity.max(),
                                  "mean": propensity.mean()}
    return diag


def _prepare_output(config: RunConfig) -> str:
    out_dir = config.resolve(config.output_dir)
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


def diagnose_ph(config: RunConfig) -> PipelineResult:
    trial, _, info = load_samples(config)
    diagnostics = dict(info, **ph_diagnostics(trial))
    out_dir = _prepare_output(config)
    files = [outputs.write_json(os.path.join(out_dir, "diagnostics.json"), diagnostics)]
    files.append(outputs.write_manifest(out_dir, config.to_dict(), config.seed, files))
    return PipelineResult(None, diagnostics, files, out_dir)


def run_pipeline(config: RunConfig) -> PipelineResult:
    """Full run: diagnostics, nuisance fits, every requested estimator, optional bootstrap.

    Writes ``tate_table.csv``, one ``curves_<TAG>.csv`` per estimator that
    succeeded, ``diagnostics.json`` and ``manifest.json`` into the output
    directory. Estimator failures are recorded, not raised.
    """
    trial, external, info = load_samples(config)
    settings = config.transport_settings()
    if config.horizon > trial.time.max():
        raise ConfigError(f"horizon {config.horizon:g} exceeds the trial follow-up ({trial.time.max():g})")

    diagnostics = dict(info, **ph_diagnostics(trial))
    result = run_transport(trial, external, settings)
    if config.bootstrap_replicates >= 2 and result.curves:
        result, summary = bootstrap(trial, external, settings, config.bootstrap_replicates,
                                    config.seed, point=result, n_jobs=config.n_jobs)
        diagnostics["bootstrap"] = {"replicates": summary.n_requested, "failed": summary.n_failed,
                                    "failure_messages": summary.failure_messages[:10]}
    diagnostics["weights"] = weight_diagnostics(result)
    diagnostics["failures"] = dict(result.failures)
    diagnostics["outcome_models"] = result.outcome_models
    diagnostics["curve_notes"] = {tag: {str(a): curve.notes for a, curve in by_arm.items()}
                                  for tag, by_arm in result.curves.items()}

    out_dir = _prepare_output(config)
    files = [outputs.write_tate_table(os.path.join(out_dir, "tate_table.csv"), result,
                                      list(settings.estimators), settings.horizon)]
    for tag in settings.estimators:
        if tag in result.curves:
            files.append(outputs.write_curve_file(os.path.join(out_dir, f"curves_{tag}.csv"),
                                                  result.curves[tag]))
    files.append(outputs.write_json(os.path.join(out_dir, "diagnostics.json"), diagnostics))
    files.append(outputs.write_manifest(out_dir, config.to_dict(), config.seed, files))
    for tag, message in result.failures.items():
        logger.warning("%s did not produce an estimate: %s", tag, message)
    return PipelineResult(result, diagnostics, files, out_dir)


def emulate_command(summary: str, copula_source: Any, m: Optional[int], seed: int, out_path: str,
                    trial: Optional[TrialSample] = None,
                    overrides: Tuple[Tuple[str, str, float], ...] = (),
                    renormalize: Optional[bool] = None, override_scale: str = "rank") -> str:
    """Write an emulated external sample to CSV (header only when m = 0).

    Continuous ranges missing from the summary are taken from ``trial``.
    """
    spec = load_summary_spec(summary, renormalize)
    if trial is not None:
        spec = spec.with_ranges_from(trial.frame())
    cfg = ExternalConfig(summary=summary, copula=copula_source, overrides=tuple(overrides),
                         size=m, seed=seed, override_scale=override_scale)
    copula = resolve_copula(cfg, spec, trial)
    frame = emulate_sample(spec, copula, m, seed)
    directory = os.path.dirname(out_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame.to_csv(out_path, index=False, float_format=outputs.FLOAT_FORMAT, lineterminator='\n')
    logger.info("wrote %d emulated subjects of %s to %s", len(frame), spec.name, out_path)
    return out_path
