"""Unit tests for Kaplan-Meier, Cox regression and the Schoenfeld PH test."""

import unittest
import os
import sys
from unittest.mock import patch

import numpy as np
from numpy.testing import assert_allclose

# Add parent directory to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from survival.cox import _RiskSets, conditional_survival, fit_cox
from survival.errors import ConvergenceError, SingularDesignError
from survival.kaplan_meier import fit_kaplan_meier, nelson_aalen
from survival.records import ExternalSample, StudyData, SubjectRecord, TrialSample
from survival.schoenfeld import schoenfeld_ph_test
from tests.simulated_data import RUN_SLOW, exponential_sample, simulate_trial


def _sample(time, event, covariates=None, names=()):
    n = len(time)
    if covariates is None:
        covariates = np.empty((n, 0))
    return TrialSample(np.asarray(time, float), np.asarray(event, bool), np.zeros(n, int),
                       covariates, names)


class TestSubjectRecords(unittest.TestCase):
    """Test cases for record validation and sample construction."""

    def test_record_must_belong_to_one_source(self):
        """Test that a record must belong to exactly one source."""
        with self.assertRaises(ValueError):
            SubjectRecord((1.0,), trial_flag=1, external_flag=1, followup_time=1.0, event=True, arm=0)

    def test_negative_time_rejected(self):
        """Test that negative times are rejected."""
        with self.assertRaises(ValueError):
            SubjectRecord((1.0,), 1, 0, followup_time=-1.0, event=True, arm=0)

    def test_samples_from_records(self):
        """Test building trial and external samples from records."""
        records = [SubjectRecord((1.0,), 1, 0, 2.0, True, 1),
                   SubjectRecord((2.0,), 1, 0, 3.0, False, 0),
                   SubjectRecord((5.0,), 0, 1, design_weight=2.0)]
        trial = TrialSample.from_records(records, ("x",))
        external = ExternalSample.from_records(records, ("x",))
        self.assertEqual(trial.n, 2)
        self.assertEqual(trial.n_events, 1)
        self.assertEqual(external.n, 1)
        assert_allclose(external.normalized_weights, [1.0])

    def test_study_data_shared_covariates(self):
        """Test that study data aligns both samples on the shared covariates."""
        trial = TrialSample([1.0, 2.0], [True, False], [0, 1], [[1.0, 2.0], [3.0, 4.0]], ("a", "b"))
        external = ExternalSample([[5.0]], ("b",))
        study = StudyData(trial, external)
        self.assertEqual(study.shared_covariates, ("b",))
        aligned_trial, aligned_external = study.aligned()
        self.assertEqual(aligned_trial.covariate_names, ("b",))
        assert_allclose(aligned_trial.covariates[:, 0], [2.0, 4.0])


class TestKaplanMeier(unittest.TestCase):
    """Test cases for the product-limit estimator."""

    def test_hand_computed_curve(self):
        """Test Kaplan-Meier against a hand-computed curve."""
        curve = fit_kaplan_meier(_sample([1, 2, 3], [1, 1, 0]))
        assert_allclose(curve.survival_at([1, 2, 3]), [2 / 3, 1 / 3, 1 / 3])
        assert_allclose(curve.survival_at(0.5), 1.0)

    def test_left_limit(self):
        """Test the left limit of the Kaplan-Meier curve."""
        curve = fit_kaplan_meier(_sample([1, 2, 3], [1, 1, 0]))
        assert_allclose(curve.survival_before([1, 2]), [1.0, 2 / 3])

    def test_no_events_gives_unit_survival(self):
        """Test that a sample without events has survival 1."""
        curve = fit_kaplan_meier(_sample([1, 2, 3], [0, 0, 0]))
        assert_allclose(curve.survival_at([0.5, 5.0]), [1.0, 1.0])

    def test_integer_weights_match_replication(self):
        """Test that integer weights match replicated records."""
        weighted = fit_kaplan_meier(_sample([1, 2, 3, 4], [1, 0, 1, 1]), weights=np.array([2, 1, 1, 3.0]))
        replicated = fit_kaplan_meier(_sample([1, 1, 2, 3, 4, 4, 4], [1, 1, 0, 1, 1, 1, 1]))
        assert_allclose(weighted.survival_at([1, 2, 3, 4]), replicated.survival_at([1, 2, 3, 4]))

    def test_ties_share_one_step(self):
        """Test that tied event times share one step."""
        curve = fit_kaplan_meier(_sample([2, 2, 3, 5], [1, 1, 1, 0]))
        assert_allclose(curve.event_times, [2, 3])
        assert_allclose(curve.survival_values, [0.5, 0.25])


class TestCox(unittest.TestCase):
    """Test cases for Cox regression with the Breslow baseline."""

    def test_null_model_baseline_is_nelson_aalen(self):
        """Test that the covariate-free Breslow baseline is the Nelson-Aalen estimate."""
        sample = _sample([1, 2, 2, 3, 4, 6], [1, 1, 0, 1, 0, 1])
        fit = fit_cox(sample)
        times, cumhaz = nelson_aalen(sample.time, sample.event)
        assert_allclose(fit.baseline_at(times), cumhaz, atol=1e-12)
        assert_allclose(fit.baseline_at(0.5), 0.0)

    def test_exponential_oracle(self):
        """Test the Cox fit against an exponential model with known coefficient."""
        sample = exponential_sample(4000, rate=0.5, seed=3, beta=1.0, censoring_rate=0.3)
        fit = fit_cox(sample)
        self.assertTrue(fit.converged)
        self.assertAlmostEqual(fit.coefficients[0], 1.0, delta=0.08)
        survival = conditional_survival(fit, np.array([0.2]), 1.0)
        self.assertAlmostEqual(float(survival), np.exp(-0.5 * np.exp(0.2)), delta=0.02)

    def test_constant_covariate_is_singular(self):
        """Test that a constant covariate raises SingularDesignError naming it."""
        sample = _sample([1, 2, 3, 4, 5], [1, 1, 1, 1, 1], np.column_stack([np.ones(5), np.arange(5.0)]),
                         ("const", "x"))
        with self.assertRaises(SingularDesignError) as caught:
            fit_cox(sample)
        self.assertIn("const", caught.exception.columns)

    def test_censoring_response_without_censorings(self):
        """Test that the censoring model without censorings has zero hazard."""
        sample = exponential_sample(50, rate=1.0, seed=4)
        fit = fit_cox(sample, response="censoring")
        assert_allclose(fit.cumulative_hazard(sample.covariates[:3], [1.0, 5.0]), 0.0)

    def test_cumulative_hazard_shape(self):
        """Test the shape of the cumulative hazard matrix."""
        sample = exponential_sample(200, rate=1.0, seed=5, beta=0.5, censoring_rate=0.2)
        fit = fit_cox(sample)
        self.assertEqual(fit.cumulative_hazard(sample.covariates[:7], np.array([0.1, 0.5, 1.0])).shape, (7, 3))
        self.assertEqual(len(fit.standard_errors), 1)

    def test_rescaled_covariate_rescales_coefficient(self):
        """Test that multiplying a covariate by c divides its coefficient by c and keeps the curves."""
        sample = exponential_sample(500, rate=0.5, seed=6, beta=0.7, censoring_rate=0.2)
        scaled = TrialSample(sample.time, sample.event, sample.arm, sample.covariates * 2.5, ("x",))
        fit, scaled_fit = fit_cox(sample), fit_cox(scaled)
        assert_allclose(scaled_fit.coefficients, fit.coefficients / 2.5, rtol=1e-6)
        assert_allclose(scaled_fit.baseline_cumhaz, fit.baseline_cumhaz, rtol=1e-6)
        times = np.array([0.5, 1.0, 2.0])
        assert_allclose(conditional_survival(scaled_fit, np.array([0.5]), times),
                        conditional_survival(fit, np.array([0.2]), times), rtol=1e-6)

    def test_event_and_censoring_jumps_partition_times(self):
        """Test that the event and censoring baselines jump at disjoint times covering every record."""
        sample = exponential_sample(300, rate=0.5, seed=7, beta=0.4, censoring_rate=0.4)
        events = fit_cox(sample, response="event").baseline_times
        censorings = fit_cox(sample, response="censoring").baseline_times
        self.assertEqual(len(np.intersect1d(events, censorings)), 0)
        assert_allclose(np.union1d(events, censorings), np.unique(sample.time))
        assert_allclose(events, np.unique(sample.time[sample.event]))

    def test_failed_step_halving_raises(self):
        """Test that a likelihood that never recovers under step-halving raises ConvergenceError."""
        sample = exponential_sample(200, rate=1.0, seed=8, beta=1.0)
        original = _RiskSets.evaluate
        calls = []

        def falling(self, beta):
            loglik, score, information, s0 = original(self, beta)
            calls.append(beta)
            if len(calls) > 1:
                loglik = -np.inf
            return loglik, score, information, s0

        with patch.object(_RiskSets, "evaluate", falling):
            with self.assertRaises(ConvergenceError) as caught:
                fit_cox(sample)
        self.assertIn("step-halving", str(caught.exception))
        assert_allclose(caught.exception.last_iterate, [0.0])
        self.assertEqual(len(calls), 31)


class TestSchoenfeld(unittest.TestCase):
    """Test cases for the proportional-hazards score test."""

    def _pooled(self, trial):
        return TrialSample(trial.time, trial.event, trial.arm, trial.arm[:, None].astype(float), ("arm",))

    def test_crossing_hazards_rejected(self):
        """Test that crossing hazards fail the proportional-hazards test."""
        sample = self._pooled(simulate_trial(n=1000, seed=11, crossing=True))
        result = schoenfeld_ph_test(fit_cox(sample), sample)
        self.assertLess(result.global_p, 0.05)

    def test_result_rows(self):
        """Test the rows of the proportional-hazards test result."""
        trial = simulate_trial(n=400, seed=12)
        subset = trial.arm_subset(0)
        result = schoenfeld_ph_test(fit_cox(subset), subset)
        rows = result.as_rows()
        self.assertEqual([row[0] for row in rows], ["age", "cd4", "male", "GLOBAL"])
        self.assertEqual(rows[-1][2], 3)
        self.assertTrue(all(0.0 <= row[3] <= 1.0 for row in rows))

    def test_transforms_validated(self):
        """Test that unknown time transforms are rejected."""
        sample = self._pooled(simulate_trial(n=200, seed=13))
        with self.assertRaises(ValueError):
            schoenfeld_ph_test(fit_cox(sample), sample, transform="log")

    @unittest.skipUnless(RUN_SLOW, "set RUN_SLOW_TESTS=1 to run the Monte Carlo suite")
    def test_rejection_rates(self):
        """Test the rejection rates of the proportional-hazards test."""
        crossing = np.mean([schoenfeld_ph_test(fit_cox(s), s).global_p < 0.05
                            for s in (self._pooled(simulate_trial(n=600, seed=100 + r, crossing=True))
                                      for r in range(200))])
        proportional = np.mean([schoenfeld_ph_test(fit_cox(s), s).global_p < 0.05
                                for s in (self._pooled(simulate_trial(n=600, seed=500 + r))
                                          for r in range(200))])
        self.assertGreaterEqual(crossing, 0.8)
        self.assertTrue(0.03 <= proportional <= 0.07)


if __name__ == '__main__':
    unittest.main()
