"""Run configuration: one JSON document, CLI overrides, one environment override."""

import json
import logging
import os
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

from estimators.curves import ALL_TAGS, ESTIMATOR_TAGS
from emulation.copula import OVERRIDE_SCALES
from estimators.transport import TransportSettings
from hare.selection import HareConfig
from survival.errors import ConfigError

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "TRANSPORT_OUTPUT_DIR"
COVARIATE_TYPES = ("continuous", "binary", "categorical")


@dataclass(frozen=True)
class CovariateSchema:
    """One covariate column; categorical columns expand to ``name[level]`` indicators."""
    name: str
    kind: str = "continuous"
    column: Optional[str] = None
    levels: Tuple[str, ...] = ()
    reference: Optional[str] = None

    def __post_init__(self):
        if self.kind not in COVARIATE_TYPES:
            raise ConfigError(f"covariate {self.name}: unknown type {self.kind!r}")
        if self.kind == "categorical":
            if len(self.levels) < 2:
                raise ConfigError(f"covariate {self.name}: categorical columns need >= 2 levels")
            if self.reference is None:
                object.__setattr__(self, "reference", self.levels[0])
            elif self.reference not in self.levels:
                raise ConfigError(f"covariate {self.name}: reference {self.reference!r} is not a level")

    @property
    def source_column(self) -> str:
        return self.column or self.name

    @property
    def output_names(self) -> List[str]:
        if self.kind != "categorical":
            return [self.name]
        return [f"{self.name}[{level}]" for level in self.levels if level != self.reference]


@dataclass(frozen=True)
class DataSchema:
    """Maps CSV columns to record roles.

    ``time_scale`` multiplies the time column (e.g. 1/30.4375 for days to
    months). Without a ``source`` column every row belongs to ``default_source``.
    """
    covariates: Tuple[CovariateSchema, ...]
    time: Optional[str] = None
    event: Optional[str] = None
    arm: Optional[str] = None
    source: Optional[str] = None
    design_weight: Optional[str] = None
    time_scale: float = 1.0
    trial_value: str = "trial"
    default_source: str = "trial"

    @property
    def covariate_names(self) -> List[str]:
        return [name for c in self.covariates for name in c.output_names]

    @classmethod
    def from_dict(cls, payload: Dict[str, Any], default_source: str = "trial") -> "DataSchema":
        covariates = []
        for name, entry in payload.get("covariates", {}).items():
            entry = entry if isinstance(entry, dict) else {"type": entry}
            covariates.append(CovariateSchema(name, entry.get("type", "continuous"), entry.get("column"),
                                              tuple(str(v) for v in entry.get("levels", ())),
                                              entry.get("reference")))
        if not covariates:
            raise ConfigError("schema needs at least one covariate")
        scale = float(payload.get("time_scale", 1.0))
        if scale <= 0:
            raise ConfigError("time_scale must be positive")
        return cls(tuple(covariates), payload.get("time"), payload.get("event"), payload.get("arm"),
                   payload.get("source"), payload.get("design_weight"), scale,
                   str(payload.get("trial_value", "trial")), default_source)


@dataclass(frozen=True)
class ExternalConfig:
    """Either a data file or a summary spec with a copula to emulate from."""
    path: Optional[str] = None
    schema: Optional[DataSchema] = None
    summary: Optional[str] = None
    copula: Any = "trial"
    overrides: Tuple[Tuple[str, str, float], ...] = ()
    size: Optional[int] = None
    seed: int = 0
    renormalize: Optional[bool] = None
    override_scale: str = "rank"

    @property
    def emulated(self) -> bool:
        return self.summary is not None

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "ExternalConfig":
        if ("path" in payload) == ("summary" in payload):
            raise ConfigError("external needs exactly one of 'path' or 'summary'")
        if "path" in payload:
            if "schema" not in payload:
                raise ConfigError("external data needs a 'schema'")
            return cls(path=payload["path"],
                       schema=DataSchema.from_dict(payload["schema"], default_source="external"))
        overrides = []
        for item in payload.get("overrides", []):
            try:
                first, second = item["pair"]
                value = item["correlation"] if "correlation" in item else item["rank_correlation"]
                overrides.append((str(first), str(second), float(value)))
            except (KeyError, TypeError, ValueError):
                raise ConfigError(f"bad copula override {item!r}; expected pair and rank_correlation or correlation")
        scale = payload.get("override_scale", "rank")
        if scale not in OVERRIDE_SCALES:
            raise ConfigError(f"override_scale must be one of {OVERRIDE_SCALES}, got {scale!r}")
        size = payload.get("size")
        return cls(summary=payload["summary"], copula=payload.get("copula", "trial"),
                   overrides=tuple(overrides), size=None if size is None else int(size),
                   seed=int(payload.get("seed", 0)), renormalize=payload.get("renormalize"),
                   override_scale=scale)


@dataclass(frozen=True)
class RunConfig:
    trial_path: str
    trial_schema: DataSchema
    external: Optional[ExternalConfig] = None
    arms: Optional[Tuple[str, str]] = None
    calibration: Optional[Tuple[str, ...]] = None
    horizon: float = 24.0
    estimators: Tuple[str, ...] = ESTIMATOR_TAGS
    bootstrap_replicates: int = 0
    seed: int = 2024
    n_jobs: int = 1
    estimate_propensity: bool = True
    censoring_cap: float = 50.0
    isotonize: bool = True
    hare: HareConfig = field(default_factory=HareConfig)
    output_dir: str = "output"
    base_dir: str = "."
    source: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        unknown = [tag for tag in self.estimators if tag not in ALL_TAGS]
        if unknown:
            raise ConfigError(f"unknown estimator tag(s): {', '.join(unknown)}")
        if self.horizon <= 0:
            raise ConfigError("horizon must be positive")
        if self.bootstrap_replicates < 0 or self.bootstrap_replicates == 1:
            raise ConfigError("bootstrap replicates must be 0 (off) or >= 2")
        if self.trial_schema.time is None or self.trial_schema.event is None or self.trial_schema.arm is None:
            raise ConfigError("trial schema needs time, event and arm columns")

    def resolve(self, path: str) -> str:
        """Paths in the config are relative to the config file."""
        return path if os.path.isabs(path) else os.path.normpath(os.path.join(self.base_dir, path))

    def transport_settings(self) -> TransportSettings:
        return TransportSettings(horizon=self.horizon, estimators=self.estimators,
                                 calibration_functions=self.calibration,
                                 estimate_propensity=self.estimate_propensity,
                                 censoring_cap=self.censoring_cap, isotonize=self.isotonize,
                                 hare=self.hare)

    def with_overrides(self, out: Optional[str] = None, seed: Optional[int] = None,
                       boot: Optional[int] = None, estimators: Optional[List[str]] = None,
                       horizon: Optional[float] = None,
                       arms: Optional[Tuple[str, str]] = None) -> "RunConfig":
        """Apply CLI flags; without ``out`` the environment variable may set the output dir.

        Output directories given here are relative to the working directory,
        not to the config file.
        """
        changes: Dict[str, Any] = {}
        if out is not None:
            changes["output_dir"] = os.path.abspath(out)
        elif os.getenv(OUTPUT_DIR_ENV):
            changes["output_dir"] = os.path.abspath(os.environ[OUTPUT_DIR_ENV])
            logger.info("output directory taken from %s", OUTPUT_DIR_ENV)
        if seed is not None:
            changes["seed"] = seed
        if boot is not None:
            changes["bootstrap_replicates"] = boot
        if estimators is not None:
            changes["estimators"] = tuple(estimators)
        if horizon is not None:
            changes["horizon"] = horizon
        if arms is not None:
            changes["arms"] = tuple(arms)
        return replace(self, **changes) if changes else self

    def to_dict(self) -> Dict[str, Any]:
        """Effective configuration echoed into the run manifest."""
        echo = dict(self.source)
        echo.update({"horizon": self.horizon, "estimators": list(self.estimators),
                     "bootstrap": {"replicates": self.bootstrap_replicates, "seed": self.seed,
                                   "n_jobs": self.n_jobs},
                     "arms": None if self.arms is None else {"treated": self.arms[0], "control": self.arms[1]}})
        echo.pop("output_dir", None)
        return echo

    @classmethod
    def from_dict(cls, payload: Dict[str, Any], base_dir: str = ".") -> "RunConfig":
        try:
            trial = payload["trial"]
            trial_path, trial_schema = trial["path"], DataSchema.from_dict(trial["schema"])
        except KeyError as exc:
            raise ConfigError(f"missing config key {exc}")
        external = payload.get("external")
        arms = payload.get("arms")
        if arms is not None:
            try:
                arms = (str(arms["treated"]), str(arms["control"]))
            except (KeyError, TypeError):
                raise ConfigError("arms needs 'treated' and 'control' labels")
        bootstrap = payload.get("bootstrap", {})
        outcome = payload.get("outcome", {})
        calibration = payload.get("calibration")
        try:
            return cls(
                trial_path=trial_path, trial_schema=trial_schema,
                external=None if external is None else ExternalConfig.from_dict(external),
                arms=arms,
                calibration=None if calibration is None else tuple(calibration),
                horizon=float(payload.get("horizon", 24.0)),
                estimators=tuple(payload.get("estimators", ESTIMATOR_TAGS)),
                bootstrap_replicates=int(bootstrap.get("replicates", 0)),
                seed=int(bootstrap.get("seed", 2024)),
                n_jobs=int(bootstrap.get("n_jobs", 1)),
                estimate_propensity=bool(outcome.get("estimate_propensity", True)),
                censoring_cap=float(outcome.get("censoring_cap", 50.0)),
                isotonize=bool(outcome.get("isotonize", True)),
                hare=HareConfig.from_dict(payload.get("hare", {})),
                output_dir=payload.get("output_dir", "output"),
                base_dir=base_dir, source=payload)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config value: {exc}")


def load_run_config(path: str) -> RunConfig:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            payload = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}")
    return RunConfig.from_dict(payload, base_dir=os.path.dirname(os.path.abspath(path)))
