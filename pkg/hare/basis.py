"""Linear-spline basis for the log-hazard: covariate knots, time knots and products."""

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

CovariateFactor = Tuple[int, Optional[float]]


def _fmt(value: float) -> str:
    return f"{value:.6g}"


@dataclass(frozen=True)
class HareTerm:
    """Product of at most two covariate factors and at most one time factor.

    A covariate factor ``(j, None)`` is x_j and ``(j, k)`` is (x_j - k)+. The
    time factor is t when ``time_linear`` is set, (k - t)+ when ``time_knot``
    is k, and absent otherwise. The term with no factors is the constant.
    """
    covariate_factors: Tuple[CovariateFactor, ...] = ()
    time_linear: bool = False
    time_knot: Optional[float] = None

    def __post_init__(self):
        factors = tuple(sorted((int(j), None if k is None else float(k))
                               for j, k in self.covariate_factors))
        object.__setattr__(self, "covariate_factors", factors)
        if len(factors) > 2:
            raise ValueError("a term multiplies at most two covariate factors")
        if self.time_linear and self.time_knot is not None:
            raise ValueError("a term has at most one time factor")
        if factors and self.has_time and len(factors) > 1:
            raise ValueError("time factors multiply a single covariate factor")

    @property
    def has_time(self) -> bool:
        return self.time_linear or self.time_knot is not None

    @property
    def is_constant(self) -> bool:
        return not self.covariate_factors and not self.has_time

    def covariate_value(self, covariates: np.ndarray) -> np.ndarray:
        value = np.ones(covariates.shape[0])
        for j, knot in self.covariate_factors:
            column = covariates[:, j]
            value = value * (column if knot is None else np.maximum(column - knot, 0.0))
        return value

    def time_value(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.time_linear:
            return t
        if self.time_knot is not None:
            return np.maximum(self.time_knot - t, 0.0)
        return np.ones_like(t)

    def time_line(self, segment_start: float, segment_end: float) -> Tuple[float, float]:
        """(intercept, slope) of the time factor on a segment between time knots."""
        if self.time_linear:
            return 0.0, 1.0
        if self.time_knot is not None:
            if segment_end <= self.time_knot:
                return self.time_knot, -1.0
            return 0.0, 0.0
        return 1.0, 0.0

    def name(self, covariate_names: Sequence[str]) -> str:
        parts = []
        for j, knot in self.covariate_factors:
            label = covariate_names[j] if j < len(covariate_names) else f"x{j}"
            parts.append(label if knot is None else f"({label}-{_fmt(knot)})+")
        if self.time_linear:
            parts.append("t")
        elif self.time_knot is not None:
            parts.append(f"({_fmt(self.time_knot)}-t)+")
        return "*".join(parts) if parts else "1"

    def parents(self) -> Tuple["HareTerm", ...]:
        """Terms that must stay in the basis while this one is present."""
        out = []
        if self.has_time and self.covariate_factors:
            out.append(HareTerm(self.covariate_factors))
            out.append(HareTerm((), self.time_linear, self.time_knot))
        elif len(self.covariate_factors) == 2:
            out.extend(HareTerm((factor,)) for factor in self.covariate_factors)
        elif len(self.covariate_factors) == 1 and self.covariate_factors[0][1] is not None:
            out.append(HareTerm(((self.covariate_factors[0][0], None),)))
        elif self.time_knot is not None:
            out.append(HareTerm((), time_linear=True))
        return tuple(out)

    def to_dict(self) -> Dict:
        return {
            "covariate_factors": [[j, k] for j, k in self.covariate_factors],
            "time_linear": self.time_linear,
            "time_knot": self.time_knot,
        }

    @classmethod
    def from_dict(cls, payload: Dict) -> "HareTerm":
        return cls(tuple((j, k) for j, k in payload.get("covariate_factors", [])),
                   bool(payload.get("time_linear", False)), payload.get("time_knot"))


CONSTANT = HareTerm()
TIME = HareTerm(time_linear=True)


@dataclass(frozen=True)
class HareBasis:
    """Ordered distinct terms; the log-hazard is piecewise linear in t between time knots."""
    terms: Tuple[HareTerm, ...]
    covariate_names: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))
        if len(set(self.terms)) != len(self.terms):
            raise ValueError("basis terms must be distinct")

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(term.name(self.covariate_names) for term in self.terms)

    @property
    def time_knots(self) -> np.ndarray:
        return np.unique([term.time_knot for term in self.terms if term.time_knot is not None])

    @property
    def covariate_knots(self) -> Dict[str, list]:
        knots: Dict[str, set] = {}
        for term in self.terms:
            for j, knot in term.covariate_factors:
                if knot is not None:
                    knots.setdefault(self.covariate_names[j], set()).add(knot)
        return {name: sorted(values) for name, values in knots.items()}

    @property
    def has_time_dependence(self) -> bool:
        """True when some term multiplies a covariate by a time factor."""
        return any(term.has_time and term.covariate_factors for term in self.terms)

    def segments(self) -> np.ndarray:
        """Segment boundaries 0 < knots < inf."""
        knots = self.time_knots
        return np.concatenate(([0.0], knots[knots > 0], [np.inf]))

    def covariate_matrix(self, covariates: np.ndarray) -> np.ndarray:
        covariates = np.atleast_2d(np.asarray(covariates, dtype=float))
        return np.column_stack([term.covariate_value(covariates) for term in self.terms])

    def time_lines(self, segment_start: float, segment_end: float) -> Tuple[np.ndarray, np.ndarray]:
        lines = np.array([term.time_line(segment_start, segment_end) for term in self.terms])
        return lines[:, 0], lines[:, 1]

    def design(self, covariates: np.ndarray, t: np.ndarray) -> np.ndarray:
        """B_k(t_i | x_i) for paired rows of ``covariates`` and entries of ``t``."""
        covariate_part = self.covariate_matrix(covariates)
        t = np.broadcast_to(np.asarray(t, dtype=float), (covariate_part.shape[0],))
        time_part = np.column_stack([term.time_value(t) for term in self.terms])
        return covariate_part * time_part

    def with_term(self, term: HareTerm) -> "HareBasis":
        return HareBasis(self.terms + (term,), self.covariate_names)

    def without_term(self, term: HareTerm) -> "HareBasis":
        return HareBasis(tuple(t for t in self.terms if t != term), self.covariate_names)

    def to_dict(self) -> Dict:
        return {"covariate_names": list(self.covariate_names),
                "terms": [term.to_dict() for term in self.terms]}

    @classmethod
    def from_dict(cls, payload: Dict) -> "HareBasis":
        return cls(tuple(HareTerm.from_dict(t) for t in payload["terms"]),
                   tuple(payload.get("covariate_names", ())))


def start_basis(covariates: np.ndarray, covariate_names: Sequence[str]) -> HareBasis:
    """Constant, linear time and every non-constant covariate's linear main effect."""
    covariates = np.asarray(covariates, dtype=float)
    terms = [CONSTANT, TIME]
    for j in range(covariates.shape[1]):
        if np.ptp(covariates[:, j]) > 0:
            terms.append(HareTerm(((j, None),)))
    return HareBasis(tuple(terms), tuple(covariate_names))
