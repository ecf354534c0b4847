import contextlib
import filecmp
import io
import json
import shutil
import tempfile
import unittest
from pathlib import Path

import numpy as np

from ahumpc import Direction
from ahumpc.cli import main
from ahumpc.dataset import SampleSet

FIXTURE = Path(__file__).parent / "fixtures" / "fos_curve.csv"
TINY_SURROGATE = {
    "hidden_widths": [4, 4, 4, 4, 4],
    "k_folds": 2,
    "max_epochs": 3,
    "patience": 2,
    "max_train_samples": 400,
}


class TestCli(unittest.TestCase):
    """Test suite for the ahumpc command line."""

    def setUp(self):
        self.tmp_dir = Path(tempfile.mkdtemp())

    def tearDown(self):
        shutil.rmtree(self.tmp_dir)

    def _run(self, *argv: str) -> tuple[int, str, str]:
        stdout, stderr = io.StringIO(), io.StringIO()
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            code = main([str(a) for a in argv])
        return code, stdout.getvalue(), stderr.getvalue()

    def _scenario(self, **values) -> Path:
        path = self.tmp_dir / "scenario.json"
        content = {
            "schema_version": 1,
            "start_date": "2023-01-02",
            "end_date": "2023-01-02",
            "warmup_days": 0,
            "controller": "manual",
            "surrogate": TINY_SURROGATE,
        } | values
        path.write_text(json.dumps(content), encoding="utf-8")
        return path

    def test_extract_fos(self):
        """Test extracting first-order parameters from the fixture curve."""
        code, out, _ = self._run("extract-fos", "--curve", FIXTURE, "--direction", "increasing")
        self.assertEqual(code, 0)
        params = json.loads(out)
        self.assertAlmostEqual(params["kp"], 5.0, delta=0.02)
        self.assertAlmostEqual(params["tau"], 60.0, delta=1.0)
        self.assertEqual(params["theta"], 13.0)

    def test_extract_fos_wrong_direction(self):
        """Test a rising curve cannot be read as a decreasing one."""
        code, out, err = self._run("extract-fos", "--curve", FIXTURE, "--direction", "decreasing")
        self.assertEqual(code, 2)
        self.assertEqual(out, "")
        self.assertIn("extract-fos", err)

    def test_extract_fos_bad_columns(self):
        """Test a curve without minute and temperature columns is rejected."""
        curve = self.tmp_dir / "curve.csv"
        curve.write_text("t,value\n0,20.0\n1,20.5\n", encoding="utf-8")
        code, _, err = self._run("extract-fos", "--curve", curve, "--direction", "increasing")
        self.assertEqual(code, 2)
        self.assertIn("minute and temperature", err)

    def test_extract_fos_missing_file(self):
        """Test a missing curve file is an input error."""
        code, _, _ = self._run("extract-fos", "--curve", self.tmp_dir / "nope.csv", "--direction", "increasing")
        self.assertEqual(code, 2)

    def test_map_extremes(self):
        """Test the output mapping of full and zero actions."""
        fos = ["--inc", "10", "150", "13", "--dec", "-10", "150", "13", "--t-init", "21"]
        code, out, _ = self._run("map", "--u", "1", *fos)
        self.assertEqual(code, 0)
        self.assertEqual(json.loads(out)["on_minutes"], 30)

        code, out, _ = self._run("map", "--u", "0", *fos)
        self.assertEqual(code, 0)
        record = json.loads(out)
        self.assertEqual(record["t_star"], 0)
        self.assertEqual(record["on_minutes"], 0)

    def test_map_invalid_action(self):
        """Test an action outside [0, 1] is an input error."""
        code, _, _ = self._run("map", "--u", "1.5", "--inc", "10", "150", "13", "--dec", "-10", "150", "13",
                               "--t-init", "21")
        self.assertEqual(code, 2)

    def test_missing_subcommand(self):
        """Test that argparse rejects a call without subcommand."""
        with contextlib.redirect_stderr(io.StringIO()), self.assertRaises(SystemExit) as context:
            main([])
        self.assertEqual(context.exception.code, 2)

    def test_train(self):
        """Test training a checkpoint from an exported sample file."""
        rng = np.random.default_rng(0)
        n = 120
        X = np.column_stack(
            [
                rng.uniform(18.0, 24.0, n),
                rng.choice(np.arange(5.0, 305.0, 5.0), n),
                np.ones(n),
                rng.uniform(0.0, 10.0, n),
                rng.uniform(40.0, 80.0, n),
                rng.uniform(0.0, 5.0, n),
                rng.uniform(0.0, 500.0, n),
                rng.uniform(0.0, 2000.0, n),
            ]
        )
        dataset = self.tmp_dir / "samples.jsonl"
        SampleSet(X, 0.01 * X[:, 1], Direction.INCREASING).export_ndjson(dataset)
        model = self.tmp_dir / "models" / "increasing.json"

        code, out, _ = self._run("train", "--dataset", dataset, "--out", model, "--scenario", self._scenario())
        self.assertEqual(code, 0)
        self.assertTrue(model.is_file())
        report = json.loads(out)
        self.assertEqual(report["direction"], "increasing")
        self.assertEqual(report["train"] + report["val"] + report["test"], n)

    def test_train_missing_dataset(self):
        """Test a missing sample file is an input error."""
        code, _, _ = self._run("train", "--dataset", self.tmp_dir / "none.jsonl", "--out", self.tmp_dir / "m.json")
        self.assertEqual(code, 2)

    def test_simulate_report_and_compare(self):
        """Test a manual day end to end through simulate, report and compare."""
        run_dir = self.tmp_dir / "manual"
        scenario = self._scenario()
        code, out, _ = self._run("simulate", "--scenario", scenario, "--out", run_dir)
        self.assertEqual(code, 0)
        self.assertEqual(out.strip(), str(run_dir))
        self.assertTrue((run_dir / "run.json").is_file())
        self.assertTrue((run_dir / "mpc-movements.jsonl").is_file())

        code, _, err = self._run("simulate", "--scenario", scenario, "--out", run_dir)
        self.assertEqual(code, 2)
        self.assertIn("already holds a run", err)

        code, out, _ = self._run("report", run_dir)
        self.assertEqual(code, 0)
        self.assertTrue((run_dir / "report" / "movements.csv").is_file())
        self.assertTrue((run_dir / "report" / "metrics_table.txt").is_file())

        comparison = self.tmp_dir / "comparison.txt"
        code, out, _ = self._run("compare", run_dir, run_dir, "--out", comparison)
        self.assertEqual(code, 0)
        self.assertIn("Savings:      0.00 %", out)
        self.assertEqual(comparison.read_text(encoding="utf-8"), out)

    def test_train_on_simulated_dataset(self):
        """Test that a simulated MPC run leaves datasets the train command accepts."""
        run_dir = self.tmp_dir / "mpc"
        scenario = self._scenario(controller="mpc", warmup_days=1)
        code, _, _ = self._run("simulate", "--scenario", scenario, "--out", run_dir)
        self.assertEqual(code, 0)
        for direction in Direction:
            self.assertTrue((run_dir / "datasets" / f"{direction}.jsonl").is_file(), direction)

        dataset = run_dir / "datasets" / "increasing.jsonl"
        model = self.tmp_dir / "increasing.json"
        code, out, _ = self._run("train", "--dataset", dataset, "--out", model, "--scenario", scenario)
        self.assertEqual(code, 0)
        report = json.loads(out)
        self.assertEqual(report["direction"], "increasing")
        n = len(SampleSet.from_ndjson(dataset))
        n_train = int(round(0.7 * n))
        self.assertEqual(report["train"], min(n_train, TINY_SURROGATE["max_train_samples"]))
        self.assertEqual(report["val"] + report["test"], n - n_train)

    def test_simulate_twice_gives_identical_directories(self):
        """Test that the same scenario and seed write byte-identical run directories."""
        scenario = self._scenario(controller="mpc", warmup_days=1)
        dir_a, dir_b = self.tmp_dir / "a", self.tmp_dir / "b"
        for run_dir in (dir_a, dir_b):
            code, _, _ = self._run("simulate", "--scenario", scenario, "--out", run_dir)
            self.assertEqual(code, 0)

        files_a = sorted(p.relative_to(dir_a) for p in dir_a.rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(dir_b) for p in dir_b.rglob("*") if p.is_file())
        self.assertEqual(files_a, files_b)
        self.assertIn(Path("datasets") / "increasing.jsonl", files_a)
        for name in files_a:
            self.assertTrue(filecmp.cmp(dir_a / name, dir_b / name, shallow=False), name)

    def test_simulate_invalid_scenario(self):
        """Test an invalid scenario file is a configuration error."""
        code, _, err = self._run("simulate", "--scenario", self._scenario(mpc={"horizn": 48}))
        self.assertEqual(code, 2)
        self.assertIn("horizn", err)

    def test_report_without_run(self):
        """Test reporting on a directory that holds no run."""
        code, _, _ = self._run("report", self.tmp_dir)
        self.assertEqual(code, 2)


if __name__ == "__main__":
    unittest.main()
