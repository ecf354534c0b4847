import shutil
import tempfile
import unittest
from datetime import date, datetime, timedelta
from pathlib import Path

import numpy as np

from ahumpc import ActuatorMode, ControllerKind, Direction, TemperatureTrace, ValidationError
from ahumpc.dataset import (
    RunLogs,
    SampleSet,
    Session,
    build_daily,
    expand_pairs,
    extract_sessions,
    split_samples,
)
from ahumpc.telemetry import AitRecord, MpcMovement, WeatherRecord, format_date

DAY = datetime(2023, 1, 2)


def _movements(on_until: int = 9 * 60, stop: int = 12 * 60, on_minutes: float = 30.0) -> list[MpcMovement]:
    """Decisions every 30 minutes from 06:00, running the AHU until ``on_until`` and idle afterwards."""
    movements = []
    for minute in range(6 * 60, stop, 30):
        on = on_minutes if minute < on_until else 0.0
        moment = DAY + timedelta(minutes=minute)
        movements.append(MpcMovement(format_date(moment), 20.0, 22.0, on / 30.0, on, ControllerKind.MPC))
    return movements


def _ait(start: int = 6 * 60, stop: int = 12 * 60, skip: tuple[int, ...] = ()) -> list[AitRecord]:
    """AIT every 5 minutes on [start, stop], rising while heated and falling afterwards."""
    records = []
    for minute in range(start, stop + 1, 5):
        if minute in skip:
            continue
        temp = 18.0 + 0.02 * min(minute - start, 180) - 0.01 * max(minute - start - 180, 0)
        records.append(AitRecord(format_date(DAY + timedelta(minutes=minute)), temp, 40.0, 24))
    return records


def _weather(start: int = 6 * 60, stop: int = 12 * 60) -> list[WeatherRecord]:
    return [
        WeatherRecord(format_date(DAY + timedelta(minutes=m)), 5.0 + m / 600, 60.0, 2.0, 100.0, 10.0, 0.0)
        for m in range(start, stop + 1, 5)
    ]


def _session(n: int, direction: Direction = Direction.INCREASING) -> Session:
    times = np.arange(n) * 5.0
    temps = 20.0 + direction.sign * 0.01 * times
    gain = 1.0 if direction == Direction.INCREASING else 0.0
    return Session(DAY, DAY + timedelta(minutes=5 * (n - 1)), direction, TemperatureTrace(times, temps, 5.0), gain,
                   np.zeros((n, 5)))


class TestExtractSessions(unittest.TestCase):
    """Test suite for extract_sessions."""

    def test_on_then_off_gives_two_sessions(self):
        """Test that three hours ON followed by three hours OFF yields one session per direction."""
        sessions = extract_sessions(_movements(), _ait())
        self.assertEqual([s.direction for s in sessions], [Direction.INCREASING, Direction.DECREASING])
        self.assertEqual([len(s) for s in sessions], [37, 37])
        self.assertEqual(sessions[0].end, sessions[1].start)

    def test_missing_ait_point_breaks_the_session(self):
        """Test that a missing AIT point ends the current session."""
        sessions = extract_sessions(_movements(on_until=12 * 60), _ait(skip=(7 * 60,)))
        self.assertEqual(len(sessions), 2)
        self.assertEqual(sessions[0].end, DAY + timedelta(hours=6, minutes=55))
        self.assertEqual(sessions[1].start, DAY + timedelta(hours=7, minutes=5))

    def test_switching_slot_is_excluded(self):
        """Test that a slot the AHU switches within belongs to no session."""
        sessions = extract_sessions(_movements(on_until=6 * 60 + 30, on_minutes=12.0), _ait())
        # ON 06:00-06:10, switching slot 06:10-06:15, OFF from 06:15
        self.assertEqual(sessions[0].direction, Direction.INCREASING)
        self.assertEqual(sessions[0].end, DAY + timedelta(hours=6, minutes=10))
        self.assertEqual(sessions[1].direction, Direction.DECREASING)
        self.assertEqual(sessions[1].start, DAY + timedelta(hours=6, minutes=15))

    def test_analog_movements_keep_their_gain(self):
        """Test that analog sessions carry the applied gain."""
        movements = [
            MpcMovement(format_date(DAY + timedelta(minutes=m)), 20.0, 22.0, 0.4, 30.0, ControllerKind.MPC)
            for m in range(6 * 60, 8 * 60, 30)
        ]
        sessions = extract_sessions(movements, _ait(stop=8 * 60), mode=ActuatorMode.ANALOG)
        self.assertEqual(len(sessions), 1)
        self.assertEqual(sessions[0].mean_gain, 0.4)

    def test_weather_is_attached_per_point(self):
        """Test that each session point carries the weather logged at its time."""
        sessions = extract_sessions(_movements(), _ait(), _weather())
        self.assertEqual(sessions[0].disturbances.shape, (37, 5))
        self.assertAlmostEqual(sessions[0].disturbances[0, 0], 5.0 + 360 / 600)

    def test_no_movements_gives_no_sessions(self):
        """Test that an empty control log yields nothing."""
        self.assertEqual(extract_sessions([], _ait()), [])


class TestExpandPairs(unittest.TestCase):
    """Test suite for expand_pairs."""

    def test_pair_count(self):
        """Test that n points within the span limit give n(n-1)/2 samples."""
        for n in range(2, 62):
            self.assertEqual(len(expand_pairs(_session(n))), n * (n - 1) // 2)

    def test_span_limit(self):
        """Test that no sample spans more than the limit."""
        samples = expand_pairs(_session(100), max_span=300)
        self.assertLessEqual(float(np.max(samples.X[:, 1])), 300.0)
        self.assertLess(len(samples), 100 * 99 // 2)

    def test_sample_contents(self):
        """Test the first sample's inputs and target."""
        samples = expand_pairs(_session(3, Direction.DECREASING))
        first = next(iter(samples))
        self.assertEqual((first.t_init, first.delta_t, first.i_ahu), (20.0, 5.0, 0.0))
        self.assertAlmostEqual(first.target, -0.05)
        self.assertEqual(samples.direction, Direction.DECREASING)

    def test_session_gain_must_match_direction(self):
        """Test that an increasing session cannot have zero gain."""
        with self.assertRaises(ValidationError):
            Session(DAY, DAY, Direction.INCREASING, TemperatureTrace([0.0, 5.0], [20.0, 21.0], 5.0), 0.0,
                    np.zeros((2, 5)))


class TestSplitSamples(unittest.TestCase):
    """Test suite for split_samples."""

    def setUp(self):
        self.samples = SampleSet(np.random.default_rng(0).normal(size=(1000, 8)), np.arange(1000.0),
                                 Direction.INCREASING)

    def test_split_sizes(self):
        """Test that 1000 samples split into 700 / 150 / 150."""
        split = split_samples(self.samples, seed=1)
        self.assertEqual(split.sizes, {"train": 700, "val": 150, "test": 150})

    def test_split_is_a_partition(self):
        """Test that every sample ends up in exactly one set."""
        split = split_samples(self.samples, seed=1)
        targets = np.concatenate([split.train.y, split.val.y, split.test.y])
        np.testing.assert_array_equal(np.sort(targets), np.arange(1000.0))

    def test_split_is_seeded(self):
        """Test that the same seed gives the same split."""
        a = split_samples(self.samples, seed=5)
        b = split_samples(self.samples, seed=5)
        np.testing.assert_array_equal(a.train.y, b.train.y)


class TestBuildDaily(unittest.TestCase):
    """Test suite for build_daily."""

    def setUp(self):
        self.logs = RunLogs(_movements(), _ait(), _weather())

    def test_builds_both_directions(self):
        """Test that both directions receive samples from the window."""
        splits = build_daily(date(2023, 1, 2), self.logs, window_days=1, seed=0)
        for direction in Direction:
            self.assertEqual(splits[direction].direction, direction)
            self.assertEqual(sum(splits[direction].sizes.values()), 37 * 36 // 2)

    def test_window_excludes_later_days(self):
        """Test that a window ending the day before sees no movements."""
        with self.assertRaises(ValidationError):
            build_daily(date(2023, 1, 1), self.logs, window_days=60)

    def test_empty_log_raises(self):
        """Test that an empty control log is rejected."""
        with self.assertRaises(ValidationError):
            build_daily(date(2023, 1, 2), RunLogs(), window_days=60)

    def test_direction_without_sessions_is_empty(self):
        """Test that a day without heating gives an empty increasing split."""
        logs = RunLogs(_movements(on_until=6 * 60), _ait(), _weather())
        splits = build_daily(date(2023, 1, 2), logs, window_days=1)
        self.assertEqual(sum(splits[Direction.INCREASING].sizes.values()), 0)
        self.assertGreater(len(splits[Direction.DECREASING].train), 0)


class TestSampleSetFiles(unittest.TestCase):
    """Test suite for the NDJSON sample export."""

    def setUp(self):
        self.tmp_dir = tempfile.mkdtemp()
        self.path = Path(self.tmp_dir) / "samples.ndjson"

    def tearDown(self):
        shutil.rmtree(self.tmp_dir)

    def test_export_and_reload(self):
        """Test that an exported set reads back with its direction."""
        samples = expand_pairs(_session(5, Direction.DECREASING))
        samples.export_ndjson(self.path)
        loaded = SampleSet.from_ndjson(self.path)
        self.assertEqual(loaded.direction, Direction.DECREASING)
        np.testing.assert_allclose(loaded.X, samples.X)

    def test_mixed_directions_raise(self):
        """Test that a file mixing directions is rejected."""
        other = Path(self.tmp_dir) / "other.ndjson"
        expand_pairs(_session(3)).export_ndjson(self.path)
        expand_pairs(_session(3, Direction.DECREASING)).export_ndjson(other)
        with open(self.path, "a", encoding="utf-8") as file:
            file.write(other.read_text(encoding="utf-8"))
        with self.assertRaises(ValidationError):
            SampleSet.from_ndjson(self.path)

    def test_malformed_line_raises(self):
        """Test that a broken line is reported."""
        self.path.write_text("{not json}\n", encoding="utf-8")
        with self.assertRaises(ValidationError):
            SampleSet.from_ndjson(self.path)


if __name__ == "__main__":
    unittest.main()
