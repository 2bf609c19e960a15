"""Unit tests for the transport estimators and the TATE."""

import unittest
import os
import sys

import numpy as np
from numpy.testing import assert_allclose

# Add parent directory to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from estimators.augmented import acw_components, estimate_acw
from estimators.curves import SurvivalCurveEstimate, evaluation_grid, finalize_curve
from estimators.outcome_regression import estimate_or, estimate_rct_only
from estimators.tate import estimate_tate
from estimators.transport import TransportSettings, run_transport
from estimators.weighting_estimators import estimate_cw
from hare.selection import HareConfig
from survival.errors import NegativeDenominatorError
from survival.records import ExternalSample, TrialSample
from tests.simulated_data import (RUN_SLOW, shifted_true_survival, simulate_external, simulate_shifted_external,
                                  simulate_shifted_trial, simulate_trial, true_survival)
from weighting.calibration import CalibrationResult, CalibrationSpec
from weighting.censoring import fit_censoring_models
from weighting.propensity import known_propensity
from weighting.weight_set import WeightSet


class ConstantHazard:
    """Outcome model with Lambda(t | x) = rate * t for every x."""

    def __init__(self, rate):
        self.rate = rate

    def cumulative_hazard(self, x, times):
        x = np.atleast_2d(x)
        return np.tile(self.rate * np.atleast_1d(np.asarray(times, dtype=float)), (x.shape[0], 1))


def _uncensored_trial():
    time = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 1.5, 2.5, 3.5, 4.5, 5.5])
    arm = np.array([1, 1, 1, 1, 1, 0, 0, 0, 0, 0])
    x = np.array([[0.1], [0.4], [0.2], [0.9], [0.5], [0.3], [0.8], [0.6], [0.7], [0.0]])
    return TrialSample(time, np.ones(10, bool), arm, x, ("x",))


def _uniform_weights(trial):
    calibration = CalibrationResult(np.full(trial.n, 1.0 / trial.n), np.array([]), 0, 0.0)
    return WeightSet(CalibrationSpec((), np.array([])), calibration, known_propensity(trial),
                     fit_censoring_models(trial), arm=trial.arm.copy(),
                     censoring_covariates=trial.covariates)


class TestCurves(unittest.TestCase):
    """Test cases for curve containers and grids."""

    def test_grid_includes_horizon(self):
        """Test that the evaluation grid holds the arm's event times and ends at the horizon."""
        trial = _uncensored_trial()
        assert_allclose(evaluation_grid(trial, 1, 3.5), [0.0, 1.0, 2.0, 3.0, 3.5])
        assert_allclose(evaluation_grid(trial, 1, 4.0), [0.0, 1.0, 2.0, 3.0, 4.0])

    def test_step_interpolation(self):
        """Test right-continuous step evaluation of a curve."""
        curve = SurvivalCurveEstimate("CW", 1, [0.0, 1.0, 3.0], [1.0, 0.8, 0.5])
        assert_allclose(curve.value_at([0.5, 1.0, 2.9, 10.0]), [1.0, 0.8, 0.8, 0.5])

    def test_invalid_curve(self):
        """Test that a curve not starting at time 0 or with an unknown tag is rejected."""
        with self.assertRaises(ValueError):
            SurvivalCurveEstimate("CW", 1, [0.5, 1.0], [1.0, 0.9])
        with self.assertRaises(ValueError):
            SurvivalCurveEstimate("XYZ", 1, [0.0], [1.0])

    def test_finalize_repairs_and_notes(self):
        """Test that finalizing clips and isotonizes a curve and records notes."""
        curve = finalize_curve("CW", 0, np.arange(4.0), np.array([0.9, 0.7, 0.75, -0.1]))
        assert_allclose(curve.values, [1.0, 0.7, 0.7, 0.0])
        self.assertEqual(len(curve.notes), 2)
        raw = finalize_curve("OR_PH", 0, np.arange(3.0), np.array([1.0, 0.6, 0.65]), isotonize=False)
        assert_allclose(raw.values, [1.0, 0.6, 0.65])


class TestTate(unittest.TestCase):
    """Test cases for the landmark contrast."""

    def setUp(self):
        self.treated = SurvivalCurveEstimate("CW", 1, [0.0, 2.0, 5.0], [1.0, 0.8, 0.6])
        self.control = SurvivalCurveEstimate("CW", 0, [0.0, 1.0, 4.0], [1.0, 0.7, 0.4])

    def test_difference_at_horizon(self):
        """Test that tau is the difference of the arm survivals at the horizon."""
        tate = estimate_tate(self.treated, self.control, 4.5)
        self.assertAlmostEqual(tate.tau, 0.8 - 0.4)
        self.assertEqual(tate.survival_treated, 0.8)

    def test_arm_order_checked(self):
        """Test that swapped arms are rejected."""
        with self.assertRaises(ValueError):
            estimate_tate(self.control, self.treated, 4.0)

    def test_estimators_must_match(self):
        """Test that curves of different estimators cannot be combined."""
        other = SurvivalCurveEstimate("IPSW", 0, [0.0], [1.0])
        with self.assertRaises(ValueError):
            estimate_tate(self.treated, other, 4.0)


class TestAugmented(unittest.TestCase):
    """Test cases for the augmented calibration-weighting estimator."""

    def test_uncensored_uniform_weights_give_nelson_aalen(self):
        """Test that without censoring and with uniform weights ACW is the Nelson-Aalen product."""
        trial = _uncensored_trial()
        external = ExternalSample(np.array([[0.2], [0.7], [1.5]]), ("x",))
        weights = _uniform_weights(trial)
        parts = acw_components(trial, external, 5.0, weights, ConstantHazard(0.3), 1)
        assert_allclose(parts.grid, [1.0, 2.0, 3.0, 4.0, 5.0])
        assert_allclose(parts.denom, np.array([5.0, 4.0, 3.0, 2.0, 1.0]) / 5.0, atol=1e-12)
        assert_allclose(parts.num, np.full(5, 0.2), atol=1e-12)

        curves = estimate_acw(trial, external, 5.0, weights, {0: ConstantHazard(0.3), 1: ConstantHazard(0.3)})
        expected = np.exp(-np.cumsum(1.0 / np.array([5.0, 4.0, 3.0, 2.0, 1.0])))
        assert_allclose(curves[1].values, np.concatenate(([1.0], expected)), atol=1e-12)

    def test_negative_denominator_raises(self):
        """Test that a non-positive denominator raises NegativeDenominatorError."""
        trial = _uncensored_trial()
        external = ExternalSample(np.array([[0.2]]), ("x",))
        weights = _uniform_weights(trial)

        class Diverging:
            """Decreasing cumulative hazard on the trial rows only."""

            def cumulative_hazard(self, x, times):
                x = np.atleast_2d(x)
                times = np.atleast_1d(times)
                values = np.tile(0.3 * times, (x.shape[0], 1))
                if x.shape[0] > 1:
                    values = values - 5.0 * times
                return values

        with self.assertRaises(NegativeDenominatorError):
            estimate_acw(trial, external, 5.0, weights, {0: Diverging(), 1: Diverging()})


class LinearInX:
    """Outcome model with Lambda(t | x) = x * t."""

    def cumulative_hazard(self, x, times):
        x = np.atleast_2d(x)
        return x[:, :1] * np.atleast_1d(np.asarray(times, dtype=float))[None, :]


class TestDirectEstimators(unittest.TestCase):
    """Test cases for CW, OR and the trial-only estimator on hand-worked data."""

    def test_cw_uniform_weights_is_empirical_survival(self):
        """Test that CW with uniform weights and no censoring is the empirical survivor function."""
        trial = _uncensored_trial()
        curves = estimate_cw(trial, 5.0, _uniform_weights(trial))
        assert_allclose(curves[1].times, [0.0, 1.0, 2.0, 3.0, 4.0, 5.0])
        assert_allclose(curves[1].values, [1.0, 0.8, 0.6, 0.4, 0.2, 0.0], atol=1e-12)
        assert_allclose(curves[0].value_at([1.5, 4.5]), [0.8, 0.2], atol=1e-12)

    def test_or_uses_design_weights(self):
        """Test that outcome regression averages with the external design weights."""
        trial = _uncensored_trial()
        external = ExternalSample(np.array([[0.2], [0.7]]), ("x",), design_weights=np.array([3.0, 1.0]))
        curves = estimate_or(trial, external, 5.0, {0: LinearInX(), 1: LinearInX()})
        t = curves[1].times
        assert_allclose(curves[1].values, (3 * np.exp(-0.2 * t) + np.exp(-0.7 * t)) / 4, atol=1e-12)
        self.assertEqual(curves[1].notes, [])

    def test_or_notes_extrapolation(self):
        """Test that outcome regression notes external covariates outside the trial range."""
        trial = _uncensored_trial()
        external = ExternalSample(np.array([[0.2], [1.5]]), ("x",))
        curves = estimate_or(trial, external, 5.0, {0: ConstantHazard(0.3), 1: ConstantHazard(0.3)})
        self.assertEqual(len(curves[0].notes), 1)
        self.assertIn("x", curves[0].notes[0])
        assert_allclose(curves[0].values, np.exp(-0.3 * curves[0].times), atol=1e-12)

    def test_or_rejects_mismatched_covariates(self):
        """Test that outcome regression rejects mismatched covariates."""
        trial = _uncensored_trial()
        external = ExternalSample(np.array([[0.2]]), ("z",))
        with self.assertRaises(ValueError):
            estimate_or(trial, external, 5.0, {0: ConstantHazard(0.3), 1: ConstantHazard(0.3)})

    def test_rct_only_averages_over_whole_trial(self):
        """Test that the trial-only estimator averages over the whole trial."""
        trial = _uncensored_trial()
        curves = estimate_rct_only(trial, 5.0, {0: LinearInX(), 1: LinearInX()})
        t = curves[0].times
        expected = np.exp(-trial.covariates[:, :1] * t[None, :]).mean(axis=0)
        assert_allclose(curves[0].values, expected, atol=1e-12)
        self.assertEqual(curves[0].estimator_tag, "RCT_PH")


class TestRunTransport(unittest.TestCase):
    """Test cases for the estimator menu on simulated data."""

    @classmethod
    def setUpClass(cls):
        cls.trial = simulate_trial(n=2000, seed=71)
        cls.external = simulate_external(m=2000, seed=72)
        settings = TransportSettings(horizon=12.0, estimators=("OR_PH", "IPSW", "CW", "ACW_PH", "RCT_PH"))
        cls.result = run_transport(cls.trial, cls.external, settings)
        cls.truth = {a: true_survival(a, 12.0) for a in (0, 1)}

    def test_all_estimators_ran(self):
        """Test that every requested estimator produced an effect."""
        self.assertEqual(self.result.failures, {})
        self.assertEqual(set(self.result.tates), {"OR_PH", "IPSW", "CW", "ACW_PH", "RCT_PH"})
        self.assertIn("cox", self.result.outcome_models)

    def test_transported_curves_near_truth(self):
        """Test that the transported survivals at the horizon are near the truth."""
        for tag in ("OR_PH", "IPSW", "CW", "ACW_PH"):
            for a in (0, 1):
                estimate = float(self.result.curves[tag][a].value_at(12.0))
                self.assertAlmostEqual(estimate, self.truth[a], delta=0.04, msg=f"{tag} arm {a}")

    def test_curves_are_valid(self):
        """Test that curves start at 1, end at the horizon and, apart from ACW, do not increase."""
        for tag, by_arm in self.result.curves.items():
            for a, curve in by_arm.items():
                self.assertEqual(curve.values[0], 1.0)
                self.assertEqual(curve.times[-1], 12.0)
                if tag != "ACW_PH":
                    self.assertTrue(np.all(np.diff(curve.values) <= 1e-12), tag)

    def test_tate_matches_curves(self):
        """Test that every effect equals the difference of its curves."""
        for tag, tate in self.result.tates.items():
            s1 = float(self.result.curves[tag][1].value_at(12.0))
            s0 = float(self.result.curves[tag][0].value_at(12.0))
            self.assertAlmostEqual(tate.tau, s1 - s0, places=12)

    def test_rct_only_without_external(self):
        """Test that without an external sample only the trial-only estimators run."""
        result = run_transport(self.trial, None, TransportSettings(horizon=12.0, estimators=("RCT_PH", "CW")))
        self.assertIn("RCT_PH", result.tates)
        self.assertIn("CW", result.failures)
        self.assertIsNone(result.weights)

    def test_external_equal_to_trial_reduces_to_trial_only(self):
        """Test that transporting to the trial's own covariates gives uniform weights and the trial-only curves."""
        external = ExternalSample(self.trial.covariates, self.trial.covariate_names)
        settings = TransportSettings(horizon=12.0, estimators=("ACW_PH", "RCT_PH"))
        result = run_transport(self.trial, external, settings)
        assert_allclose(result.weights.calibration.weights, 1.0 / self.trial.n, rtol=1e-10)
        assert_allclose(result.weights.calibration.dual_solution, 0.0, atol=1e-10)
        for a in (0, 1):
            acw = float(result.curves["ACW_PH"][a].value_at(12.0))
            rct = float(result.curves["RCT_PH"][a].value_at(12.0))
            self.assertAlmostEqual(acw, rct, delta=0.04, msg=f"arm {a}")

    def test_unknown_tag_rejected(self):
        """Test that an unknown estimator tag is rejected."""
        with self.assertRaises(ValueError):
            TransportSettings(estimators=("CW", "BOGUS"))

    def test_weighting_skipped_when_not_needed(self):
        """Test that weights are not estimated when no estimator needs them."""
        result = run_transport(self.trial, self.external, TransportSettings(horizon=12.0, estimators=("OR_PH",)))
        self.assertIsNone(result.weights)


@unittest.skipUnless(RUN_SLOW, "set RUN_SLOW_TESTS=1 to run the Monte Carlo suite")
class TestMonteCarlo(unittest.TestCase):
    """Average bias over repeated simulated trials."""

    def test_augmented_estimators_unbiased(self):
        """Test that the augmented estimators are unbiased under crossing hazards."""
        settings = TransportSettings(horizon=12.0, estimators=("ACW_PH", "ACW_HARE", "CW"),
                                     hare=HareConfig(max_terms=6))
        truth = true_survival(1, 12.0, crossing=True) - true_survival(0, 12.0, crossing=True)
        taus = {tag: [] for tag in settings.estimators}
        for r in range(40):
            result = run_transport(simulate_trial(n=1000, seed=300 + r, crossing=True),
                                   simulate_external(m=1000, seed=700 + r), settings)
            for tag, tate in result.tates.items():
                taus[tag].append(tate.tau)
        for tag, values in taus.items():
            self.assertEqual(len(values), 40, tag)
            self.assertLess(abs(np.mean(values) - truth), 0.02, tag)


def _mean_bias(settings, reps, seed, time_varying):
    """Mean S_a(horizon) minus the truth per estimator and arm over simulated trials of the second design."""
    truth = {a: shifted_true_survival(a, settings.horizon, time_varying) for a in (0, 1)}
    values = {tag: {0: [], 1: []} for tag in settings.estimators}
    for r in range(reps):
        trial = simulate_shifted_trial(n=1000, seed=seed + r, time_varying=time_varying)
        external = simulate_shifted_external(m=1000, seed=seed + 5000 + r)
        result = run_transport(trial, external, settings)
        for tag, by_arm in result.curves.items():
            for a in (0, 1):
                values[tag][a].append(float(by_arm[a].value_at(settings.horizon)))
    for tag in settings.estimators:
        if len(values[tag][0]) != reps:
            raise AssertionError(f"{tag} failed in {reps - len(values[tag][0])} replicates")
    return {tag: {a: float(np.mean(values[tag][a])) - truth[a] for a in (0, 1)} for tag in values}


@unittest.skipUnless(RUN_SLOW, "set RUN_SLOW_TESTS=1 to run the Monte Carlo suite")
class TestDoubleRobustness(unittest.TestCase):
    """Bias when one of the sampling and outcome models is wrong."""

    def test_wrong_sampling_model(self):
        """Test that dropping age from calibration biases CW but not ACW with a correct Cox model."""
        settings = TransportSettings(horizon=12.0, estimators=("CW", "ACW_PH"), calibration_functions=("cd4_z",))
        bias = _mean_bias(settings, reps=50, seed=4000, time_varying=False)
        self.assertGreater(max(abs(b) for b in bias["CW"].values()), 0.05, bias["CW"])
        for a in (0, 1):
            self.assertLess(abs(bias["ACW_PH"][a]), 0.02, bias["ACW_PH"])

    def test_wrong_outcome_model(self):
        """Test that a time-varying age effect biases OR_PH but not ACW with correct calibration."""
        settings = TransportSettings(horizon=12.0, estimators=("OR_PH", "ACW_PH"))
        bias = _mean_bias(settings, reps=50, seed=4100, time_varying=True)
        self.assertGreater(max(abs(b) for b in bias["OR_PH"].values()), 0.05, bias["OR_PH"])
        for a in (0, 1):
            self.assertLess(abs(bias["ACW_PH"][a]), 0.02, bias["ACW_PH"])

    def test_spline_hazard_repairs_time_varying_effect(self):
        """Test that ACW_HARE halves the ACW_PH bias when calibration and proportional hazards both fail."""
        settings = TransportSettings(horizon=12.0, estimators=("ACW_PH", "ACW_HARE"),
                                     calibration_functions=("cd4_z",), hare=HareConfig(max_terms=8))
        bias = _mean_bias(settings, reps=50, seed=4200, time_varying=True)
        worst = {tag: max(abs(b) for b in bias[tag].values()) for tag in bias}
        self.assertLessEqual(worst["ACW_HARE"], 0.5 * worst["ACW_PH"], bias)


if __name__ == '__main__':
    unittest.main()
