"""Tests for ingestion, configuration, the run pipeline and the command line."""

import unittest
import os
import sys
import json
import shutil
import tempfile
from unittest.mock import patch

import numpy as np
import pandas as pd

# Add parent directory to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from main import EXIT_INPUT, EXIT_OK, main
from pipeline.config import OUTPUT_DIR_ENV, DataSchema, ExternalConfig, RunConfig, load_run_config
from pipeline.ingest import ingest_csv
from pipeline.outputs import read_curve_file
from pipeline.pipeline_runner import emulate_command, load_samples, run_pipeline
from survival.errors import ConfigError, IngestError
from tests.simulated_data import simulate_external, simulate_trial

SCHEMA = {"time": "days", "event": "status", "arm": "treatment",
          "covariates": {"age": "continuous", "cd4": "continuous", "male": {"type": "binary", "column": "sex"}}}


def _write(path, text):
    with open(path, 'w', encoding='utf-8') as f:
        f.write(text)
    return path


class TestIngest(unittest.TestCase):
    """Test cases for reading subject records from CSV."""

    def setUp(self):
        self.tmp = tempfile.mkdtemp()
        self.schema = DataSchema.from_dict(SCHEMA)

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def test_three_rows(self):
        """Test ingestion of three rows with a zero time flagged."""
        path = _write(os.path.join(self.tmp, "t.csv"),
                      "days,status,treatment,age,cd4,sex\n"
                      "10,1,1,30,200,1\n20,0,0,40,300,0\n0,1,1,50,400,1\n")
        result = ingest_csv(path, self.schema)
        self.assertEqual(result.report.n_records, 3)
        self.assertEqual(result.report.flagged, {"zero_time": 1})
        self.assertEqual(result.covariate_names, ("age", "cd4", "male"))
        first = result.records[0]
        self.assertEqual((first.followup_time, first.event, first.arm), (10.0, True, 1))

    def test_negative_time_cites_row(self):
        """Test that a negative time cites its row."""
        path = _write(os.path.join(self.tmp, "t.csv"),
                      "days,status,treatment,age,cd4,sex\n"
                      "10,1,1,30,200,1\n-1,0,0,40,300,0\n5,1,1,50,400,1\n")
        with self.assertRaises(IngestError) as caught:
            ingest_csv(path, self.schema)
        self.assertEqual(caught.exception.row, 2)
        self.assertIn("row 2", str(caught.exception))

    def test_bad_cells(self):
        """Test that unparsable cells are reported with their rows."""
        header = "days,status,treatment,age,cd4,sex\n"
        cases = ["10,2,1,30,200,1\n", "10,1,1,abc,200,1\n", "10,1,1,30,200,3\n", "10,1,7,30,200,1\n"]
        for body in cases:
            path = _write(os.path.join(self.tmp, "t.csv"), header + body)
            with self.assertRaises(IngestError, msg=body):
                ingest_csv(path, self.schema)

    def test_missing_column(self):
        """Test that a missing schema column is an ingestion error."""
        path = _write(os.path.join(self.tmp, "t.csv"), "days,status,treatment,age,cd4\n1,1,1,30,200\n")
        with self.assertRaises(IngestError) as caught:
            ingest_csv(path, self.schema)
        self.assertIn("sex", str(caught.exception))

    def test_arm_filter_and_categories(self):
        """Test the arm filter and categorical expansion."""
        schema = DataSchema.from_dict({
            "time": "days", "event": "status", "arm": "treatment", "time_scale": 0.5,
            "covariates": {"stage": {"type": "categorical", "levels": ["I", "II", "III"]}}})
        path = _write(os.path.join(self.tmp, "t.csv"),
                      "days,status,treatment,stage\n"
                      "10,1,ZDV,I\n20,0,ddI,III\n30,1,ZDV+ddI,II\n40,0,ddI,II\n")
        result = ingest_csv(path, schema, arms=("ZDV", "ddI"))
        self.assertEqual(result.covariate_names, ("stage[II]", "stage[III]"))
        self.assertEqual(result.report.dropped, {"arm_not_selected": 1})
        self.assertEqual([r.arm for r in result.records], [1, 0, 0])
        self.assertEqual([r.followup_time for r in result.records], [5.0, 10.0, 20.0])
        self.assertEqual(result.records[1].covariates, (0.0, 1.0))

    def test_unknown_level(self):
        """Test that an unknown categorical level is rejected."""
        schema = DataSchema.from_dict({
            "time": "days", "event": "status", "arm": "treatment",
            "covariates": {"stage": {"type": "categorical", "levels": ["I", "II"]}}})
        path = _write(os.path.join(self.tmp, "t.csv"), "days,status,treatment,stage\n1,1,1,I\n2,1,0,IV\n")
        with self.assertRaises(IngestError) as caught:
            ingest_csv(path, schema)
        self.assertEqual(caught.exception.row, 2)

    def test_source_column_splits_samples(self):
        """Test that a source column splits one file into trial and external samples."""
        schema = DataSchema.from_dict(dict(SCHEMA, source="study", design_weight="w"))
        path = _write(os.path.join(self.tmp, "t.csv"),
                      "study,days,status,treatment,age,cd4,sex,w\n"
                      "trial,10,1,1,30,200,1,\nregistry,,,,45,500,0,2.5\n")
        result = ingest_csv(path, schema)
        self.assertEqual((result.report.n_trial, result.report.n_external), (1, 1))
        self.assertEqual(result.records[1].design_weight, 2.5)


class TestRunConfig(unittest.TestCase):
    """Test cases for configuration parsing and overrides."""

    def _payload(self, **extra):
        payload = {"trial": {"path": "trial.csv", "schema": SCHEMA}}
        payload.update(extra)
        return payload

    def test_defaults(self):
        """Test the configuration defaults."""
        config = RunConfig.from_dict(self._payload(), base_dir="/data")
        self.assertEqual(config.horizon, 24.0)
        self.assertEqual(config.resolve("trial.csv"), os.path.normpath("/data/trial.csv"))
        self.assertIsNone(config.external)

    def test_invalid_values(self):
        """Test that invalid configuration values are rejected."""
        with self.assertRaises(ConfigError):
            RunConfig.from_dict(self._payload(bootstrap={"replicates": 1}))
        with self.assertRaises(ConfigError):
            RunConfig.from_dict(self._payload(estimators=["CW", "KM"]))
        with self.assertRaises(ConfigError):
            ExternalConfig.from_dict({"path": "x.csv", "summary": "thailand"})
        with self.assertRaises(ConfigError):
            ExternalConfig.from_dict({"summary": "thailand", "overrides": [{"pair": ["age"]}]})

    def test_overrides(self):
        """Test that copula overrides are parsed from the external block."""
        external = ExternalConfig.from_dict({"summary": "thailand", "size": 50,
                                             "overrides": [{"pair": ["age", "male"], "rank_correlation": -0.3}]})
        self.assertEqual(external.overrides, (("age", "male", -0.3),))
        self.assertTrue(external.emulated)
        self.assertEqual(external.override_scale, "rank")

    def test_override_scale(self):
        """Test that the override scale is parsed and checked."""
        external = ExternalConfig.from_dict({"summary": "thailand", "override_scale": "latent",
                                             "overrides": [{"pair": ["age", "cd4_category"],
                                                            "correlation": -0.95}]})
        self.assertEqual(external.override_scale, "latent")
        self.assertEqual(external.overrides, (("age", "cd4_category", -0.95),))
        with self.assertRaises(ConfigError):
            ExternalConfig.from_dict({"summary": "thailand", "override_scale": "kendall"})

    def test_environment_sets_output_dir(self):
        """Test that the environment sets the output directory unless the command line does."""
        config = RunConfig.from_dict(self._payload())
        with patch.dict(os.environ, {OUTPUT_DIR_ENV: "/tmp/from-env"}):
            self.assertEqual(config.with_overrides().output_dir, os.path.abspath("/tmp/from-env"))
            self.assertEqual(config.with_overrides(out="cli").output_dir, os.path.abspath("cli"))
        with patch.dict(os.environ, {OUTPUT_DIR_ENV: ""}):
            self.assertEqual(config.with_overrides().output_dir, "output")


class TestPipeline(unittest.TestCase):
    """End-to-end runs on simulated data files."""

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.mkdtemp()
        trial = simulate_trial(n=400, seed=101)
        rng = np.random.default_rng(102)
        labels = np.where(trial.arm == 1, "T", "C")
        labels[rng.random(trial.n) < 0.05] = "X"
        pd.DataFrame({"days": trial.time, "status": trial.event.astype(int), "treatment": labels,
                      "age": trial.covariates[:, 0], "cd4": trial.covariates[:, 1],
                      "sex": trial.covariates[:, 2].astype(int)}).to_csv(
            os.path.join(cls.tmp, "trial.csv"), index=False)
        external = simulate_external(m=400, seed=103)
        pd.DataFrame({"age": external.covariates[:, 0], "cd4": external.covariates[:, 1],
                      "sex": external.covariates[:, 2].astype(int)}).to_csv(
            os.path.join(cls.tmp, "external.csv"), index=False)
        cls.payload = {
            "trial": {"path": "trial.csv", "schema": SCHEMA},
            "external": {"path": "external.csv",
                         "schema": {"covariates": SCHEMA["covariates"]}},
            "arms": {"treated": "T", "control": "C"},
            "horizon": 12,
            "estimators": ["RCT_PH", "OR_PH", "CW"],
            "output_dir": "out",
        }
        cls.config_path = _write(os.path.join(cls.tmp, "run.json"), json.dumps(cls.payload))
        cls.outcome = run_pipeline(load_run_config(cls.config_path))

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tmp)

    def test_files_written(self):
        """Test that a run writes every result file."""
        names = sorted(os.path.basename(f) for f in self.outcome.files)
        self.assertEqual(names, ["curves_CW.csv", "curves_OR_PH.csv", "curves_RCT_PH.csv",
                                 "diagnostics.json", "manifest.json", "tate_table.csv"])
        self.assertEqual(self.outcome.output_dir, os.path.normpath(os.path.join(self.tmp, "out")))

    def test_arm_filter_reported(self):
        """Test that the arm filter is reported in the diagnostics."""
        ingest = self.outcome.diagnostics["trial_ingest"]
        self.assertGreater(ingest["dropped"]["arm_not_selected"], 0)
        self.assertIn("arm_1", self.outcome.diagnostics["ph_tests"])

    def test_rerun_is_byte_identical(self):
        """Test that a rerun writes byte-identical files."""
        config = load_run_config(self.config_path)
        first = run_pipeline(config.with_overrides(out=os.path.join(self.tmp, "a")))
        second = run_pipeline(config.with_overrides(out=os.path.join(self.tmp, "b")))
        for left, right in zip(sorted(first.files), sorted(second.files)):
            with open(left, 'rb') as f, open(right, 'rb') as g:
                self.assertEqual(f.read(), g.read(), os.path.basename(left))

    def test_tate_table_matches_curve_files(self):
        """Test that the effect table agrees with the curve files."""
        out = os.path.dirname(self.outcome.files[0])
        table = pd.read_csv(os.path.join(out, "tate_table.csv"))
        self.assertEqual(list(table["status"]), ["ok", "ok", "ok"])
        for row in table.itertuples():
            curves = read_curve_file(os.path.join(out, f"curves_{row.estimator}.csv"), row.estimator)
            self.assertAlmostEqual(float(curves[1].value_at(12.0)), row.survival_treated, places=9)
            self.assertAlmostEqual(float(curves[0].value_at(12.0)), row.survival_control, places=9)
            self.assertAlmostEqual(row.tau, row.survival_treated - row.survival_control, places=9)

    def test_curve_file_round_trip(self):
        """Test reading back a curve file."""
        out = os.path.dirname(self.outcome.files[0])
        curves = read_curve_file(os.path.join(out, "curves_CW.csv"), "CW")
        original = self.outcome.result.curves["CW"]
        for a in (0, 1):
            np.testing.assert_allclose(curves[a].value_at(original[a].times), original[a].values, atol=1e-9)
            self.assertIsNone(curves[a].lower)

    def test_horizon_beyond_followup(self):
        """Test that a horizon beyond the follow-up is rejected."""
        config = load_run_config(self.config_path).with_overrides(horizon=1000.0)
        with self.assertRaises(ConfigError):
            run_pipeline(config)

    def test_emulated_external(self):
        """Test a run against an emulated external sample."""
        payload = dict(self.payload, external={"summary": "us_early", "copula": "trial", "size": 300, "seed": 7},
                       estimators=["OR_PH", "CW"])
        config = RunConfig.from_dict(payload, base_dir=self.tmp)
        trial, external, info = load_samples(config)
        self.assertEqual(external.n, 300)
        self.assertEqual(external.covariate_names, ("age", "cd4", "male"))
        self.assertEqual(info["emulation"]["summary"], "us_early")

    def test_emulate_command(self):
        """Test the header-only file and seeded reproducibility of the emulate command."""
        empty = emulate_command("thailand", "identity", 0, 1, os.path.join(self.tmp, "empty.csv"),
                                trial=simulate_trial(n=50, seed=1))
        with open(empty, 'r', encoding='utf-8') as f:
            self.assertEqual(f.read().strip(), "male,age,cd4_category")
        paths = [emulate_command("thailand", "identity", 30, 5, os.path.join(self.tmp, f"e{k}.csv"),
                                 trial=simulate_trial(n=50, seed=1)) for k in range(2)]
        with open(paths[0], 'rb') as f, open(paths[1], 'rb') as g:
            self.assertEqual(f.read(), g.read())


class TestMain(unittest.TestCase):
    """Test cases for command-line exit codes."""

    def setUp(self):
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def test_missing_config_is_input_error(self):
        """Test that a missing config file exits with the input error code."""
        self.assertEqual(main(["transport", "--config", os.path.join(self.tmp, "none.json")]), EXIT_INPUT)

    def test_bootstrap_needs_two_replicates(self):
        """Test that bootstrap with one replicate exits with the input error code."""
        self.assertEqual(main(["bootstrap", "--config", "x.json", "--boot", "1"]), EXIT_INPUT)

    def test_emulate_without_range_source(self):
        """Test that emulating without a range source exits with the input error code."""
        # thailand gives no age range and no trial is configured to supply one
        code = main(["emulate", "--summary", "thailand", "--copula", "identity", "--m", "20",
                     "--out", os.path.join(self.tmp, "sample.csv")])
        self.assertEqual(code, EXIT_INPUT)

    def test_emulate(self):
        """Test the emulate command line end to end."""
        out = os.path.join(self.tmp, "sample.csv")
        summary = _write(os.path.join(self.tmp, "toy.json"), json.dumps({
            "name": "toy", "size": 20,
            "variables": {"age": {"type": "continuous", "mean": 30, "sd": 5, "range": [18, 60]},
                          "male": {"type": "binary", "proportion": 0.6}}}))
        code = main(["emulate", "--summary", summary, "--copula", "identity", "--m", "20",
                     "--seed", "3", "--out", out, "--override", "age,male,0.4",
                     "--override-scale", "latent"])
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(len(pd.read_csv(out)), 20)


if __name__ == '__main__':
    unittest.main()
