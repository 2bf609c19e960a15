"""Gaussian-copula dependence estimated from the trial's rank correlations."""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import linalg

from survival.errors import ConfigError
from .summary_spec import SummarySpec, VariableSummary

logger = logging.getLogger(__name__)

_MIN_EIGENVALUE = 1e-8
OVERRIDE_SCALES = ("rank", "latent")


def spearman_to_gaussian(rho: np.ndarray) -> np.ndarray:
    """Gaussian-copula parameter whose Spearman correlation is ``rho``: 2 sin(pi rho / 6)."""
    return 2.0 * np.sin(np.pi * np.asarray(rho, dtype=float) / 6.0)


def repair_correlation(matrix: np.ndarray) -> Tuple[np.ndarray, bool]:
    """Nearest-by-clipping PSD correlation matrix; returns (matrix, repaired)."""
    matrix = (matrix + matrix.T) / 2.0
    np.fill_diagonal(matrix, 1.0)
    values, vectors = linalg.eigh(matrix)
    if values.min() >= -1e-12:
        return matrix, False
    clipped = (vectors * np.maximum(values, _MIN_EIGENVALUE)) @ vectors.T
    scale = np.sqrt(np.diag(clipped))
    repaired = clipped / np.outer(scale, scale)
    np.fill_diagonal(repaired, 1.0)
    logger.warning("copula correlation matrix was indefinite (min eigenvalue %.3g); clipped to PSD",
                   values.min())
    return repaired, True


def attainable_rank_correlation(variable: VariableSummary) -> float:
    """Largest |Spearman| between this margin and a continuous one.

    Ties cap it at sqrt(1 - sum p_k^3) for a discrete margin with level shares p_k.
    """
    if variable.kind == "binary":
        shares = np.array([variable.proportion, 1.0 - variable.proportion])
    elif variable.kind == "categorical":
        shares = np.asarray(variable.proportions, dtype=float)
    else:
        return 1.0
    return float(np.sqrt(1.0 - np.sum(shares ** 3)))


def _pair_bound(spec: SummarySpec, first: str, second: str) -> float:
    try:
        kinds = [spec.variable(first), spec.variable(second)]
    except KeyError:
        return 1.0
    discrete = [v for v in kinds if v.kind in ("binary", "categorical")]
    # two discrete margins can still reach 1 when their shares agree
    if len(discrete) != 1:
        return 1.0
    return attainable_rank_correlation(discrete[0])


@dataclass(frozen=True, eq=False)
class CopulaSpec:
    """Latent Gaussian correlation matrix over named variables (symmetric, unit diagonal, PSD)."""
    variables: Tuple[str, ...]
    matrix: np.ndarray
    repaired: bool = False
    notes: List[str] = field(default_factory=list)

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=float)
        k = len(self.variables)
        if matrix.shape != (k, k):
            raise ConfigError("copula matrix must be square with one row per variable")
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def identity(cls, variables: Sequence[str]) -> "CopulaSpec":
        return cls(tuple(variables), np.eye(len(variables)))

    def entry(self, first: str, second: str) -> float:
        return float(self.matrix[self.variables.index(first), self.variables.index(second)])

    def with_overrides(self, overrides: Dict[Tuple[str, str], float], scale: str = "rank",
                       spec: Optional[SummarySpec] = None) -> "CopulaSpec":
        """Set pairwise correlations and re-repair.

        With ``scale="rank"`` each value is a Spearman target converted through
        2 sin(pi rho / 6), which is exact only between continuous margins. With
        ``scale="latent"`` the value is written into the Gaussian matrix as is.
        Given ``spec``, a rank target beyond what a discrete margin can reach
        against a continuous one is logged and noted.
        """
        if scale not in OVERRIDE_SCALES:
            raise ConfigError(f"override scale must be one of {OVERRIDE_SCALES}, got {scale!r}")
        matrix = self.matrix.copy()
        notes = list(self.notes)
        for (first, second), rho in overrides.items():
            if first not in self.variables or second not in self.variables:
                raise ConfigError(f"copula override names unknown variable(s) {first}, {second}")
            if not -1.0 <= rho <= 1.0:
                raise ConfigError(f"copula override {first}/{second} = {rho} outside [-1, 1]")
            i, j = self.variables.index(first), self.variables.index(second)
            matrix[i, j] = matrix[j, i] = spearman_to_gaussian(rho) if scale == "rank" else rho
            notes.append(f"{scale} correlation {first}/{second} set to {rho:g}")
            if scale == "rank" and spec is not None:
                bound = _pair_bound(spec, first, second)
                if abs(rho) > bound:
                    message = (f"rank correlation {first}/{second} = {rho:g} exceeds the {bound:.3f} "
                               f"a discrete margin allows; the emulated sample will be weaker")
                    logger.warning(message)
                    notes.append(message)
        matrix, repaired = repair_correlation(matrix)
        if repaired:
            notes.append("overridden matrix repaired to PSD by eigenvalue clipping")
        return CopulaSpec(self.variables, matrix, self.repaired or repaired, notes)

    def restricted(self, variables: Sequence[str]) -> "CopulaSpec":
        """Sub-matrix over ``variables``; names the copula lacks are independent."""
        k = len(variables)
        matrix = np.eye(k)
        for a, first in enumerate(variables):
            for b, second in enumerate(variables):
                if a != b and first in self.variables and second in self.variables:
                    matrix[a, b] = self.entry(first, second)
        return CopulaSpec(tuple(variables), matrix, self.repaired, list(self.notes))

    def to_dict(self) -> Dict:
        return {"variables": list(self.variables), "matrix": self.matrix.tolist(),
                "repaired": self.repaired, "notes": list(self.notes)}

    @classmethod
    def from_dict(cls, payload: Dict) -> "CopulaSpec":
        matrix, repaired = repair_correlation(np.asarray(payload["matrix"], dtype=float))
        return cls(tuple(payload["variables"]), matrix, repaired)


def variable_scores(frame: pd.DataFrame, name: str, levels: Sequence[str] = ()) -> Optional[np.ndarray]:
    """Numeric column for ``name``; categorical variables are rebuilt as ordinal codes
    from their ``name[level]`` indicators (the level without an indicator scores 0)."""
    if name in frame.columns:
        return frame[name].to_numpy(float)
    code = np.zeros(len(frame))
    found = False
    for k, level in enumerate(levels):
        column = f"{name}[{level}]"
        if column in frame.columns:
            code = code + k * frame[column].to_numpy(float)
            found = True
    return code if found else None


def estimate_copula_from_trial(frame: pd.DataFrame, variables: Sequence[str],
                               spec: Optional[SummarySpec] = None) -> CopulaSpec:
    """Spearman correlations of the trial columns mapped through 2 sin(pi rho / 6).

    Variables without a usable trial column are left independent of the rest.
    """
    if len(variables) < 2:
        raise ValueError("a copula needs at least 2 variables")
    scores = {}
    for name in variables:
        levels = ()
        if spec is not None:
            try:
                levels = spec.variable(name).levels
            except KeyError:
                pass
        values = variable_scores(frame, name, levels)
        if values is not None and np.ptp(values) > 0:
            scores[name] = values
    notes = [f"{name} has no trial column; treated as independent"
             for name in variables if name not in scores]
    rank = pd.DataFrame(scores).corr(method="spearman") if scores else pd.DataFrame()
    matrix = np.eye(len(variables))
    for a, first in enumerate(variables):
        for b, second in enumerate(variables):
            if a != b and first in scores and second in scores:
                matrix[a, b] = spearman_to_gaussian(rank.loc[first, second])
    matrix, repaired = repair_correlation(matrix)
    if repaired:
        notes.append("trial rank-correlation matrix repaired to PSD by eigenvalue clipping")
    return CopulaSpec(tuple(variables), matrix, repaired, notes)
