import json
import shutil
import tempfile
import unittest
from pathlib import Path

import pandas as pd

from ahumpc import ValidationError
from ahumpc.report import (
    MOVEMENT_COLUMNS,
    compare,
    energy_kwh,
    export_run,
    load_run,
    metrics_table,
    movement_frame,
    savings_percent,
    tracking_error,
)
from ahumpc.ahu_data import ZONE_COUNT

MOTOR = (380.0, 15.4, 0.82)


def _movement(stamp: str, on_minutes: int, ait: float = 22.0, setpoint: float = 22.0) -> dict:
    return {
        "date": stamp,
        "ait": ait,
        "setpoint": setpoint,
        "u": on_minutes / 30.0,
        "on_minutes": on_minutes,
        "controller": "mpc",
    }


def _metrics(stamp: str, direction: str, mse: float, sizes: tuple[int, int, int]) -> dict:
    return {
        "date": stamp,
        "direction": direction,
        "mse": mse,
        "scaled_mae": 0.1,
        "explained_variance": 0.9,
        "r_squared": 0.9,
        "cv_mse": mse,
        "train": sizes[0],
        "val": sizes[1],
        "test": sizes[2],
    }


class TestEnergy(unittest.TestCase):
    """Test suite for the energy helpers."""

    def test_one_hour_of_the_reference_motor(self):
        """Test the reference motor draws about 8.31 kWh per hour."""
        self.assertAlmostEqual(energy_kwh(1.0, *MOTOR), 8.3114, places=3)
        self.assertAlmostEqual(energy_kwh(10.0, *MOTOR), 83.114, places=2)
        self.assertEqual(energy_kwh(0.0, *MOTOR), 0.0)

    def test_invalid_energy_inputs(self):
        """Test negative hours and bad motor data are rejected."""
        with self.assertRaises(ValidationError):
            energy_kwh(-1.0, *MOTOR)
        with self.assertRaises(ValidationError):
            energy_kwh(1.0, 0.0, 15.4, 0.82)
        with self.assertRaises(ValidationError):
            energy_kwh(1.0, 380.0, 15.4, 1.2)

    def test_savings_percent(self):
        """Test savings relative to the manual baseline."""
        self.assertAlmostEqual(savings_percent(11660.0, 4920.0), 57.80, places=2)
        self.assertAlmostEqual(savings_percent(100.0, 120.0), -20.0)
        self.assertEqual(savings_percent(100.0, 100.0), 0.0)

    def test_savings_without_baseline_energy(self):
        """Test a baseline without energy use is rejected."""
        with self.assertRaises(ValidationError):
            savings_percent(0.0, 10.0)
        with self.assertRaises(ValidationError):
            savings_percent(-5.0, 10.0)


class TestRunReports(unittest.TestCase):
    """Test suite for reading, comparing and exporting run directories."""

    def setUp(self):
        self.tmp_dir = Path(tempfile.mkdtemp())

    def tearDown(self):
        shutil.rmtree(self.tmp_dir)

    def _write_run(self, name: str, stores: dict[str, list[dict]], seed: int = 42, end: str = "2023-01-03") -> Path:
        run_dir = self.tmp_dir / name
        run_dir.mkdir()
        manifest = {
            "schema_version": 1,
            "seed": seed,
            "warmup_start": "2023-01-01",
            "start": "2023-01-02",
            "end": end,
            "occupancy": {"start": "08:00", "stop": "18:00", "level": 0.7, "workdays": [0, 1, 2, 3, 4]},
            "electrical": {"voltage": MOTOR[0], "current": MOTOR[1], "cos_phi": MOTOR[2]},
        }
        (run_dir / "run.json").write_text(json.dumps(manifest), encoding="utf-8")
        for store, records in stores.items():
            lines = "".join(json.dumps(r) + "\n" for r in records)
            (run_dir / f"{store}.jsonl").write_text(lines, encoding="utf-8")
        return run_dir

    def _mpc_run(self, **kwargs) -> Path:
        movements = [
            _movement("2023-01-01T12:00", 30),  # warm-up, not evaluated
            _movement("2023-01-02T07:00", 30, ait=18.0),
            _movement("2023-01-02T09:00", 30, ait=21.5),
            _movement("2023-01-02T10:00", 0, ait=22.5),
            _movement("2023-01-03T09:00", 30, ait=22.0),
        ]
        return self._write_run("mpc", {"mpc-movements": movements}, **kwargs)

    def _manual_run(self, **kwargs) -> Path:
        movements = [_movement(f"2023-01-02T{h:02d}:00", 30, ait=23.0) for h in range(6, 10)]
        movements += [_movement(f"2023-01-03T{h:02d}:00", 30, ait=23.0) for h in range(6, 8)]
        return self._write_run("manual", {"mpc-movements": movements}, **kwargs)

    def test_load_run(self):
        """Test a run directory is read with its manifest and stores."""
        run = load_run(self._mpc_run())
        self.assertEqual(run.start.isoformat(), "2023-01-02")
        self.assertEqual(run.end.isoformat(), "2023-01-03")
        self.assertAlmostEqual(run.electrical.power_kw, 8.3114, places=3)
        self.assertEqual(len(run.stores["mpc-movements"]), 5)
        self.assertEqual(len(run.records("mpc-movements")), 4)
        self.assertEqual(run.records("ait-db"), [])

    def test_load_run_without_manifest(self):
        """Test a directory without run.json is not a run."""
        with self.assertRaises(FileNotFoundError):
            load_run(self.tmp_dir)

    def test_movement_frame_excludes_warmup(self):
        """Test the movement frame covers the evaluation range and carries kWh."""
        frame = movement_frame(load_run(self._mpc_run()))
        self.assertEqual(list(frame.columns), MOVEMENT_COLUMNS)
        self.assertEqual(len(frame), 4)
        self.assertAlmostEqual(frame["kwh"].sum(), energy_kwh(1.5, *MOTOR))

    def test_compare(self):
        """Test totals, daily rows and savings of an MPC run against a manual run."""
        report = compare(load_run(self._mpc_run()), load_run(self._manual_run()))
        self.assertAlmostEqual(report.total_kwh_mpc, energy_kwh(1.5, *MOTOR))
        self.assertAlmostEqual(report.total_kwh_manual, energy_kwh(3.0, *MOTOR))
        self.assertAlmostEqual(report.savings_percent, 50.0)
        self.assertEqual(list(report.daily["day"]), ["2023-01-02", "2023-01-03"])
        self.assertEqual(list(report.daily["on_hours_mpc"]), [1.0, 0.5])
        self.assertEqual(list(report.daily["on_hours_manual"]), [2.0, 1.0])
        text = report.to_text()
        self.assertIn("Savings:      50.00 %", text)

    def test_compare_writes_report(self):
        """Test the comparison report is written to a file."""
        report = compare(load_run(self._mpc_run()), load_run(self._manual_run()))
        path = self.tmp_dir / "out" / "comparison.txt"
        report.write(path)
        self.assertEqual(path.read_text(encoding="utf-8"), report.to_text())

    def test_compare_mismatched_runs(self):
        """Test runs over different ranges or seeds are not compared."""
        run_mpc = load_run(self._mpc_run())
        with self.assertRaises(ValidationError):
            compare(run_mpc, load_run(self._manual_run(end="2023-01-04")))
        shutil.rmtree(self.tmp_dir / "manual")
        with self.assertRaises(ValidationError):
            compare(run_mpc, load_run(self._manual_run(seed=7)))

    def test_tracking_error_counts_occupied_decisions(self):
        """Test only decisions within occupied hours enter the tracking error."""
        # 09:00 Monday: 0.5, 10:00 Monday: 0.5, 09:00 Tuesday: 0.0
        self.assertAlmostEqual(tracking_error(load_run(self._mpc_run())), 1.0 / 3.0)

    def test_tracking_error_without_occupied_decisions(self):
        """Test a run with no occupied decisions has no tracking error."""
        run_dir = self._write_run("night", {"mpc-movements": [_movement("2023-01-02T02:00", 0, ait=15.0)]})
        self.assertIsNone(tracking_error(load_run(run_dir)))

    def test_metrics_table(self):
        """Test monthly and overall rows with increasing and decreasing cells."""
        records = [
            _metrics("2023-01-03T06:00", "increasing", 0.02, (700, 150, 150)),
            _metrics("2023-01-03T06:00", "decreasing", 0.04, (500, 100, 100)),
            _metrics("2023-02-01T06:00", "increasing", 0.04, (1400, 300, 300)),
        ]
        lines = metrics_table(records).splitlines()
        self.assertEqual(len(lines), 4)
        self.assertTrue(lines[0].startswith("Months"))
        self.assertTrue(lines[1].startswith("2023-01"))
        self.assertIn("1000 / 700", lines[1])
        self.assertIn("0.0200 / 0.0400", lines[1])
        self.assertIn("2000 / -", lines[2])
        self.assertTrue(lines[3].startswith("Entire run"))
        self.assertIn("1500 / 700", lines[3])
        self.assertIn("0.0300 / 0.0400", lines[3])

    def test_export_run(self):
        """Test every export file is written with evaluation range data."""
        feedback = [
            {"user_id": "room-1", "value": 23.0, "date": "2023-01-02T09:00", "accepted": True},
            {"user_id": "room-2", "value": 35.0, "date": "2023-01-02T09:30", "accepted": False},
            {"user_id": "room-1", "value": 22.0, "date": "2023-01-02T11:00", "accepted": True},
        ]
        sensors = [
            {"sensor_id": 1, "temperature": 21.0, "humidity": 40.0, "date": f"2023-01-02T00:{m:02d}"}
            for m in (0, 5, 10)
        ]
        ait = [{"date": "2023-01-02T00:00", "ait": 21.0, "humidity_avg": 40.0, "reporting_count": 1}]
        fos = [
            {"date": "2023-01-02T06:00", "direction": "increasing", "kp": 10.0, "tau": 150.0, "theta": 13.0,
             "y_init": 18.0, "source": "edf"},
        ]
        stores = {
            "mpc-movements": [_movement("2023-01-02T09:00", 30), _movement("2023-01-03T09:00", 15)],
            "feedback-db": feedback,
            "sensor-db": sensors,
            "ait-db": ait,
            "fos-params": fos,
            "training-metrics": [_metrics("2023-01-02T06:00", "increasing", 0.02, (70, 15, 15))],
        }
        run = load_run(self._write_run("export", stores))
        out_dir = self.tmp_dir / "report"
        written = export_run(run, out_dir)

        names = sorted(p.name for p in written)
        expected = [
            "ait.csv",
            "energy_daily.csv",
            "feedback.csv",
            "fos_trends.csv",
            "gaps.csv",
            "metrics_table.txt",
            "movements.csv",
        ]
        self.assertEqual(names, expected)
        self.assertTrue(all(p.is_file() for p in written))

        movements = pd.read_csv(out_dir / "movements.csv")
        self.assertEqual(list(movements.columns), MOVEMENT_COLUMNS)
        self.assertEqual(list(movements["on_minutes"]), [30, 15])

        daily = pd.read_csv(out_dir / "energy_daily.csv")
        self.assertEqual(list(daily["on_hours_run"]), [0.5, 0.25])

        gaps = pd.read_csv(out_dir / "gaps.csv")
        self.assertEqual(len(gaps), ZONE_COUNT * 2 * 288 - 3)

        feedback_frame = pd.read_csv(out_dir / "feedback.csv")
        self.assertEqual(len(feedback_frame), 1)
        self.assertEqual(int(feedback_frame.loc[0, "accepted"]), 2)
        self.assertEqual(int(feedback_frame.loc[0, "rejected"]), 1)
        self.assertEqual(int(feedback_frame.loc[0, "participants"]), 2)
        self.assertAlmostEqual(feedback_frame.loc[0, "participation_percent"], 2 / 24 * 100)

        self.assertIn("Entire run", (out_dir / "metrics_table.txt").read_text(encoding="utf-8"))

    def test_export_is_reproducible(self):
        """Test identical stores give identical export files."""
        run = load_run(self._mpc_run())
        first = export_run(run, self.tmp_dir / "first")
        second = export_run(run, self.tmp_dir / "second")
        for a, b in zip(first, second):
            self.assertEqual(a.read_bytes(), b.read_bytes())


if __name__ == "__main__":
    unittest.main()
