"""Right-censored full log-likelihood of a linear-spline log-hazard model.

On each segment between time knots the log-hazard is a + b*u, so every
integral of the hazard (and of its derivatives in beta) has a closed form
in terms of I_m(b, L) = int_0^L s^m exp(b s) ds.
"""

import math

import numpy as np
from scipy import special

from .basis import HareBasis

_SERIES_LIMIT = 0.5
_SERIES_TERMS = 25


def _moment_integrals(b: np.ndarray, length: np.ndarray):
    """I_0, I_1, I_2 elementwise; series expansion when |b L| is small."""
    b = np.asarray(b, dtype=float)
    length = np.asarray(length, dtype=float)
    z = b * length
    small = np.abs(z) < _SERIES_LIMIT
    out = []

    safe_b = np.where(small, 1.0, b)
    growth = np.exp(np.where(small, 0.0, z))
    i0 = (growth - 1.0) / safe_b
    i1 = (length * growth - i0) / safe_b
    i2 = (length ** 2 * growth - 2.0 * i1) / safe_b
    recursion = (i0, i1, i2)

    for m in range(3):
        series = np.zeros_like(z)
        power = np.ones_like(z)
        for n in range(_SERIES_TERMS):
            series = series + power / (math.factorial(n) * (n + m + 1))
            power = power * z
        series = series * length ** (m + 1)
        out.append(np.where(small, series, recursion[m]))
    return out


def segment_integral(intercept: np.ndarray, slope: np.ndarray, length: np.ndarray) -> np.ndarray:
    """int_0^L exp(intercept + slope s) ds, with the slope -> 0 limit handled."""
    return np.exp(intercept) * length * special.exprel(slope * length)


class HareLikelihood:
    """Log-likelihood, score and Hessian for one arm's data under a fixed basis."""

    def __init__(self, basis: HareBasis, time: np.ndarray, event: np.ndarray,
                 covariates: np.ndarray):
        self.basis = basis
        self.time = np.asarray(time, dtype=float)
        self.event = np.asarray(event, dtype=bool)
        covariates = np.asarray(covariates, dtype=float).reshape(len(self.time), -1)
        self.event_design = basis.design(covariates[self.event], self.time[self.event])
        covariate_part = basis.covariate_matrix(covariates)
        bounds = basis.segments()
        self.pieces = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            length = np.clip(np.minimum(self.time, hi) - lo, 0.0, None)
            active = length > 0
            if not active.any():
                continue
            intercepts, slopes = basis.time_lines(lo, hi)
            start = covariate_part[active] * (intercepts + slopes * lo)
            rate = covariate_part[active] * slopes
            self.pieces.append((start, rate, length[active], np.flatnonzero(active)))

    @property
    def n_events(self) -> int:
        return int(self.event.sum())

    def log_likelihood(self, beta: np.ndarray) -> float:
        total = float(self.event_design.sum(axis=0) @ beta)
        with np.errstate(over="ignore", invalid="ignore"):
            for start, rate, length, _ in self.pieces:
                total -= float(segment_integral(start @ beta, rate @ beta, length).sum())
        return total if np.isfinite(total) else -np.inf

    def derivatives(self, beta: np.ndarray):
        """(log-likelihood, score, Hessian) at ``beta``."""
        k = len(beta)
        score = self.event_design.sum(axis=0).astype(float)
        hessian = np.zeros((k, k))
        loglik = float(score @ beta)
        for start, rate, length, _ in self.pieces:
            a = start @ beta
            b = rate @ beta
            level = np.exp(a)
            i0, i1, i2 = _moment_integrals(b, length)
            loglik -= float((level * i0).sum())
            score -= start.T @ (level * i0) + rate.T @ (level * i1)
            cross = (start * (level * i1)[:, None]).T @ rate
            hessian -= ((start * (level * i0)[:, None]).T @ start + cross + cross.T
                        + (rate * (level * i2)[:, None]).T @ rate)
        return loglik, score, hessian

    def cumulative_hazard_at_followup(self, beta: np.ndarray) -> np.ndarray:
        out = np.zeros(len(self.time))
        for start, rate, length, index in self.pieces:
            out[index] += segment_integral(start @ beta, rate @ beta, length)
        return out
