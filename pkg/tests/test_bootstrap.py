"""Unit tests for the nonparametric bootstrap."""

import unittest
import os
import sys

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

# Add parent directory to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from estimators.bootstrap import bootstrap, resample_indices
from estimators.transport import TransportSettings, run_transport
from tests.simulated_data import (RUN_SLOW, shifted_true_survival, simulate_external, simulate_shifted_external,
                                  simulate_shifted_trial, simulate_trial)


class TestBootstrap(unittest.TestCase):
    """Test cases for replicate resampling and interval construction."""

    @classmethod
    def setUpClass(cls):
        cls.trial = simulate_trial(n=300, seed=81)
        cls.external = simulate_external(m=300, seed=82)
        cls.settings = TransportSettings(horizon=12.0, estimators=("OR_PH", "CW"))
        cls.point = run_transport(cls.trial, cls.external, cls.settings)
        cls.result, cls.summary = bootstrap(cls.trial, cls.external, cls.settings, 20, seed=5,
                                            point=cls.point)

    def test_resampling_keeps_arm_sizes(self):
        """Test that a replicate draws each arm to its original size and the external sample in full."""
        rng = np.random.default_rng(0)
        trial_rows, external_rows = resample_indices(rng, self.trial, self.external)
        self.assertEqual(np.sum(self.trial.arm[trial_rows] == 1), np.sum(self.trial.arm == 1))
        self.assertEqual(len(external_rows), self.external.n)

    def test_same_seed_same_draws(self):
        """Test that one seed reproduces the replicate effects exactly."""
        _, again = bootstrap(self.trial, self.external, self.settings, 20, seed=5, point=self.point)
        for tag in ("OR_PH", "CW"):
            assert_array_equal(again.tau_draws[tag], self.summary.tau_draws[tag])

    def test_threads_match_serial(self):
        """Test that threaded replicates match the serial run."""
        _, threaded = bootstrap(self.trial, self.external, self.settings, 20, seed=5,
                                point=self.point, n_jobs=3)
        for tag in ("OR_PH", "CW"):
            assert_allclose(threaded.tau_draws[tag], self.summary.tau_draws[tag])

    def test_intervals_contain_estimate(self):
        """Test that every interval contains its point estimate and carries a positive standard error."""
        self.assertEqual(self.summary.n_failed, 0)
        for tag, tate in self.result.tates.items():
            self.assertLessEqual(tate.ci_95[0], tate.tau)
            self.assertGreaterEqual(tate.ci_95[1], tate.tau)
            self.assertGreater(tate.std_error, 0.0)
            self.assertEqual(tate.tau, self.point.tates[tag].tau)

    def test_curve_bands_attached(self):
        """Test that pointwise bands are attached to every curve in order."""
        for by_arm in self.result.curves.values():
            for curve in by_arm.values():
                self.assertEqual(curve.lower.shape, curve.times.shape)
                self.assertTrue(np.all(curve.lower <= curve.upper))

    def test_too_few_replicates(self):
        """Test that fewer than two replicates are rejected."""
        with self.assertRaises(ValueError):
            bootstrap(self.trial, self.external, self.settings, 1, seed=5, point=self.point)


@unittest.skipUnless(RUN_SLOW, "set RUN_SLOW_TESTS=1 to run the Monte Carlo suite")
class TestBootstrapCoverage(unittest.TestCase):
    """Coverage of the percentile intervals over repeated simulated trials."""

    def test_tate_interval_coverage(self):
        """Test that the 95% CW interval covers the true effect in 90-99% of simulated trials."""
        settings = TransportSettings(horizon=12.0, estimators=("CW",))
        truth = shifted_true_survival(1, 12.0) - shifted_true_survival(0, 12.0)
        reps, covered = 200, 0
        for r in range(reps):
            trial = simulate_shifted_trial(n=400, seed=6000 + r)
            external = simulate_shifted_external(m=400, seed=8000 + r)
            result, _ = bootstrap(trial, external, settings, 100, seed=r, n_jobs=4)
            lower, upper = result.tates["CW"].ci_95
            covered += lower <= truth <= upper
        self.assertGreaterEqual(covered / reps, 0.90)
        self.assertLessEqual(covered / reps, 0.99)


if __name__ == '__main__':
    unittest.main()
