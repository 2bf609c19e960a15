"""Target average treatment effect at a landmark time."""

from survival.errors import NumericalError
from .curves import SurvivalCurveEstimate, TateEstimate


def estimate_tate(treated: SurvivalCurveEstimate, control: SurvivalCurveEstimate,
                  horizon: float = 24.0) -> TateEstimate:
    """tau = S_1(t*) - S_0(t*), both curves step-interpolated at t*."""
    if treated.estimator_tag != control.estimator_tag:
        raise ValueError(f"curves come from different estimators: "
                         f"{treated.estimator_tag} vs {control.estimator_tag}")
    if treated.arm != 1 or control.arm != 0:
        raise ValueError("estimate_tate expects the arm-1 curve first and the arm-0 curve second")
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    s1 = float(treated.value_at(horizon))
    s0 = float(control.value_at(horizon))
    tau = s1 - s0
    if not -1.0 <= tau <= 1.0:
        raise NumericalError(f"TATE {tau} outside [-1, 1]")
    return TateEstimate(treated.estimator_tag, float(horizon), tau, s1, s0)
