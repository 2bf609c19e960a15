"""Draw an individual-level external sample from summary statistics and a Gaussian copula."""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from survival.errors import EmulationError
from survival.records import ExternalSample
from .copula import CopulaSpec
from .summary_spec import SummarySpec, VariableSummary

logger = logging.getLogger(__name__)


def beta_parameters(variable: VariableSummary) -> Tuple[float, float]:
    """Method-of-moments (alpha, beta) of the beta on (lower, upper) matching mean and sd."""
    if not variable.has_range:
        raise EmulationError("continuous variable needs a range (lower, upper)", variable.name)
    lower, upper = variable.lower, variable.upper
    if not lower < variable.mean < upper:
        raise EmulationError(f"mean {variable.mean:g} must lie strictly inside ({lower:g}, {upper:g})",
                             variable.name)
    width = upper - lower
    mu = (variable.mean - lower) / width
    var = (variable.sd / width) ** 2
    bound = mu * (1.0 - mu)
    if var >= bound:
        raise EmulationError(
            f"sd {variable.sd:g} infeasible on ({lower:g}, {upper:g}): scaled variance "
            f"{var:.6g} must be below mu*(1-mu) = {bound:.6g} (sd < {np.sqrt(bound) * width:.6g})",
            variable.name)
    common = bound / var - 1.0
    return mu * common, (1.0 - mu) * common


def _margin(variable: VariableSummary, u: np.ndarray) -> np.ndarray:
    if variable.kind == "binary":
        return (u > 1.0 - variable.proportion).astype(float)
    if variable.kind == "categorical":
        thresholds = np.cumsum(variable.proportions)
        codes = np.searchsorted(thresholds, u, side="right")
        return np.minimum(codes, len(variable.levels) - 1)
    alpha, beta = beta_parameters(variable)
    return variable.lower + (variable.upper - variable.lower) * stats.beta.ppf(u, alpha, beta)


def emulate_sample(spec: SummarySpec, copula: Optional[CopulaSpec] = None, m: Optional[int] = None,
                   seed: int = 0) -> pd.DataFrame:
    """Emulate ``m`` external subjects (default: the spec's size).

    Latent Gaussian vectors with the copula's correlation are pushed through
    the normal CDF and then each margin's quantile function: thresholds on
    cumulative proportions for categorical and binary variables, a shifted
    beta for continuous ones. Categorical columns hold level labels; absent
    variables are not emitted. Identical arguments give identical frames.
    """
    m = spec.size if m is None else int(m)
    if m < 0:
        raise ValueError("m must be >= 0")
    variables = spec.present_variables
    names = [v.name for v in variables]
    for v in variables:
        if v.kind == "continuous":
            beta_parameters(v)
    if m == 0 or not names:
        return pd.DataFrame({name: pd.Series(dtype=object if spec.variable(name).kind == "categorical" else float)
                             for name in names})

    copula = CopulaSpec.identity(names) if copula is None else copula.restricted(names)
    rng = np.random.default_rng(seed)
    latent = rng.multivariate_normal(np.zeros(len(names)), copula.matrix, size=m, method="eigh")
    uniforms = stats.norm.cdf(latent)
    columns = {}
    for j, v in enumerate(variables):
        values = _margin(v, uniforms[:, j])
        if v.kind == "categorical":
            columns[v.name] = np.asarray(v.levels, dtype=object)[values]
        else:
            columns[v.name] = values
    logger.debug("emulated %d subjects for %s over %s", m, spec.name, ", ".join(names))
    return pd.DataFrame(columns, columns=names)


def expand_categories(frame: pd.DataFrame, spec: SummarySpec) -> pd.DataFrame:
    """Replace each categorical label column by ``name[level]`` indicators for every level."""
    out = frame.copy()
    for v in spec.present_variables:
        if v.kind == "categorical" and v.name in out.columns:
            labels = out.pop(v.name).astype(str)
            for level in v.levels:
                out[f"{v.name}[{level}]"] = (labels == level).astype(float)
    return out


def to_external_sample(frame: pd.DataFrame, spec: SummarySpec,
                       trial_names: Sequence[str]) -> ExternalSample:
    """External sample over the trial covariates the emulated frame provides, in trial order."""
    expanded = expand_categories(frame, spec)
    names = [name for name in trial_names if name in expanded.columns]
    if not names:
        raise EmulationError("the emulated sample shares no covariate with the trial", spec.name)
    return ExternalSample(expanded[names].to_numpy(float).reshape(len(expanded), len(names)),
                          tuple(names))
