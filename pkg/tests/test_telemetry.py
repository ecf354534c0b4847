import unittest
from datetime import datetime

import numpy as np

from ahumpc import ControllerKind, ValidationError
from ahumpc.plant import PlantState
from ahumpc.telemetry import (
    SENSOR_TOPIC,
    AitRecord,
    Dropout,
    MessageBus,
    MpcMovement,
    SensorConfig,
    SensorReading,
    aggregate_ait,
    detect_gaps,
    format_date,
    parse_date,
    sample_sensors,
)

NOW = datetime(2023, 1, 3, 10, 0)


class TestSampleSensors(unittest.TestCase):
    """Test suite for sample_sensors."""

    def setUp(self):
        self.state = PlantState(np.linspace(19.0, 23.0, 24), 20.0, 45.0)

    def test_one_reading_per_zone(self):
        """Test that all 24 nodes report in id order."""
        readings = sample_sensors(self.state, NOW, seed=42)
        self.assertEqual([r.sensor_id for r in readings], list(range(1, 25)))
        self.assertTrue(all(r.date == "2023-01-03T10:00" for r in readings))

    def test_noise_and_quantization(self):
        """Test that readings stay within the noise band and on the 1 °C grid."""
        readings = sample_sensors(self.state, NOW, seed=42)
        for reading, zone in zip(readings, self.state.zone_temps):
            self.assertLessEqual(abs(reading.temperature - zone), 2.5)
            self.assertEqual(reading.temperature, round(reading.temperature))
            self.assertTrue(0.0 <= reading.humidity <= 100.0)

    def test_exact_sensors_report_zone_values(self):
        """Test that noise-free sensors report the zone temperatures unchanged."""
        readings = sample_sensors(self.state, NOW, seed=42, config=SensorConfig.exact())
        np.testing.assert_allclose([r.temperature for r in readings], self.state.zone_temps)
        self.assertTrue(all(r.humidity == 45.0 for r in readings))

    def test_deterministic_per_seed(self):
        """Test that identical seeds give identical readings and other seeds do not."""
        a = sample_sensors(self.state, NOW, seed=1)
        b = sample_sensors(self.state, NOW, seed=1)
        c = sample_sensors(self.state, NOW, seed=2)
        self.assertEqual(a, b)
        self.assertNotEqual(a, c)

    def test_dropout_silences_one_node_without_changing_the_others(self):
        """Test that a dropout removes only its node and leaves the other readings unchanged."""
        dropout = Dropout(7, datetime(2023, 1, 3, 10, 0), datetime(2023, 1, 3, 10, 15))
        full = sample_sensors(self.state, NOW, seed=3)
        partial = sample_sensors(self.state, NOW, seed=3, config=SensorConfig(dropouts=(dropout,)))
        self.assertEqual(len(partial), 23)
        self.assertNotIn(7, [r.sensor_id for r in partial])
        self.assertEqual([r for r in full if r.sensor_id != 7], partial)

    def test_off_grid_timestamp_raises(self):
        """Test that timestamps off the 5-minute grid are rejected."""
        with self.assertRaises(ValidationError):
            sample_sensors(self.state, datetime(2023, 1, 3, 10, 2), seed=0)

    def test_negative_noise_is_rejected(self):
        """Test that SensorConfig refuses negative settings."""
        with self.assertRaises(ValidationError):
            SensorConfig(temperature_noise=-1.0)


class TestAggregateAit(unittest.TestCase):
    """Test suite for aggregate_ait."""

    def setUp(self):
        self.date = "2023-01-03T10:00"

    def test_mean_of_two_readings(self):
        """Test the AIT and humidity means of two nodes."""
        record = aggregate_ait([SensorReading(1, 20.0, 40.0, self.date), SensorReading(2, 22.0, 50.0, self.date)])
        self.assertEqual(record, AitRecord(self.date, 21.0, 45.0, 2))

    def test_order_and_duplicates_do_not_matter(self):
        """Test that permutations and duplicate deliveries give the same record."""
        readings = [SensorReading(i, 19.0 + 0.1 * i, 40.0 + i, self.date) for i in range(1, 25)]
        forward = aggregate_ait(readings)
        shuffled = list(reversed(readings)) + readings[:5]
        self.assertEqual(aggregate_ait(shuffled), forward)
        self.assertEqual(forward.reporting_count, 24)

    def test_no_readings_gives_none_and_logs(self):
        """Test that an empty window writes no record and logs a connectivity event."""
        with self.assertLogs("ahumpc.telemetry", level="WARNING"):
            self.assertIsNone(aggregate_ait([]))

    def test_mixed_windows_raise(self):
        """Test that readings from two windows cannot be averaged together."""
        with self.assertRaises(ValidationError):
            aggregate_ait([SensorReading(1, 20.0, 40.0, self.date), SensorReading(2, 20.0, 40.0, "2023-01-03T10:05")])


class TestDetectGaps(unittest.TestCase):
    """Test suite for detect_gaps."""

    def test_scripted_dropout_is_reported(self):
        """Test that a 15-minute outage of node 7 shows up as three missed slots."""
        state = PlantState.uniform(21.0)
        dropout = Dropout(7, datetime(2023, 1, 3, 10, 0), datetime(2023, 1, 3, 10, 15))
        config = SensorConfig(dropouts=(dropout,))
        log = []
        for minute in range(0, 30, 5):
            log.extend(sample_sensors(state, datetime(2023, 1, 3, 10, minute), 0, config))
        gaps = detect_gaps(log, datetime(2023, 1, 3, 10, 0), datetime(2023, 1, 3, 10, 30))
        self.assertEqual(gaps, [(7, ["2023-01-03T10:00", "2023-01-03T10:05", "2023-01-03T10:10"])])

    def test_complete_log_has_no_gaps(self):
        """Test that a log with every node reporting yields nothing."""
        log = sample_sensors(PlantState.uniform(21.0), NOW, 0)
        self.assertEqual(detect_gaps(log, NOW, datetime(2023, 1, 3, 10, 5)), [])


class TestRecords(unittest.TestCase):
    """Test suite for the record types and date helpers."""

    def test_date_format(self):
        """Test that timestamps use minute precision."""
        self.assertEqual(format_date(NOW), "2023-01-03T10:00")
        self.assertEqual(parse_date("2023-01-03T10:00"), NOW)
        with self.assertRaises(ValidationError):
            parse_date("03.01.2023")

    def test_movement_validates_its_action(self):
        """Test that movements reject actions outside [0, 1] and negative ON times."""
        with self.assertRaises(ValidationError):
            MpcMovement("2023-01-03T10:00", 21.0, 22.0, 1.2, 30.0, ControllerKind.MPC)
        with self.assertRaises(ValidationError):
            MpcMovement("2023-01-03T10:00", 21.0, 22.0, 0.5, -1.0, ControllerKind.MPC)

    def test_movement_record_keys(self):
        """Test the stored form of a movement."""
        movement = MpcMovement("2023-01-03T10:00", 21.0, 22.0, 0.5, 15.0, "mpc")
        self.assertEqual(
            movement.to_record(),
            {
                "date": "2023-01-03T10:00",
                "ait": 21.0,
                "setpoint": 22.0,
                "u": 0.5,
                "on_minutes": 15.0,
                "controller": "mpc",
            },
        )
        self.assertEqual(MpcMovement.from_record(movement.to_record()), movement)


class TestMessageBus(unittest.TestCase):
    """Test suite for MessageBus."""

    def setUp(self):
        self.bus = MessageBus("ahumpc")

    def test_messages_arrive_in_publish_order(self):
        """Test per-topic ordered delivery."""
        for i in range(5):
            self.bus.publish(SENSOR_TOPIC, {"n": i})
        self.assertEqual(self.bus.pending(SENSOR_TOPIC), 5)
        self.assertEqual([m["n"] for m in self.bus.drain(SENSOR_TOPIC)], list(range(5)))
        self.assertEqual(self.bus.pending(SENSOR_TOPIC), 0)

    def test_topics_are_independent(self):
        """Test that draining one topic leaves the other queued."""
        self.bus.publish("a", {"x": 1})
        self.bus.publish("b", {"x": 2})
        self.assertEqual(self.bus.drain("a"), [{"x": 1}])
        self.assertEqual(self.bus.pending("b"), 1)

    def test_unknown_topic_is_empty(self):
        """Test that draining an unused topic returns nothing."""
        self.assertEqual(self.bus.drain("nothing"), [])

    def test_readings_survive_the_wire(self):
        """Test that a reading published as JSON decodes back unchanged."""
        reading = SensorReading(3, 21.0, 44.0, "2023-01-03T10:00")
        self.bus.publish(SENSOR_TOPIC, reading.to_record())
        self.assertEqual(SensorReading.from_record(self.bus.drain(SENSOR_TOPIC)[0]), reading)


if __name__ == "__main__":
    unittest.main()
