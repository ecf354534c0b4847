"""
Sensor-node, gateway and central-server data path.

Every 5 minutes each of the 24 sensor nodes reports a noisy, quantized reading of its zone. Readings travel as JSON
messages over an in-process topic bus, are averaged into the Average Indoor Temperature (AIT), and are checked for
connectivity gaps. The record classes here also define the wire and store format of every persisted record.

This module provides:

- :class:`SensorReading`, :class:`AitRecord`, :class:`MpcMovement`, :class:`WeatherRecord`: records and their
  store format
- :class:`SensorConfig` and :class:`Dropout`: sensor noise and scripted outages
- :class:`MessageBus`: per-topic ordered delivery of JSON messages
- :func:`sample_sensors`, :func:`aggregate_ait` and :func:`detect_gaps`

Example:
    ::

        bus = MessageBus()
        for reading in sample_sensors(plant.state, now, seed=42):
            bus.publish(SENSOR_TOPIC, reading.to_record())
        readings = [SensorReading.from_record(r) for r in bus.drain(SENSOR_TOPIC)]
        record = aggregate_ait(readings)
"""

import json
import math
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from logging import getLogger
from typing import Any, Iterable, Sequence

import numpy as np

from .ahu_data import (
    ControllerKind,
    DATE_FORMAT,
    SENSOR_PERIOD,
    ValidationError,
    ZONE_COUNT,
)
from .plant import Disturbances, PlantState

_log = getLogger(__name__)

#: Topic carrying sensor readings from the gateway to the central server.
SENSOR_TOPIC = "sensors"

_EPOCH = datetime(1970, 1, 1)


def format_date(moment: datetime) -> str:
    return moment.strftime(DATE_FORMAT)


def parse_date(text: str) -> datetime:
    try:
        return datetime.strptime(text, DATE_FORMAT)
    except (TypeError, ValueError):
        raise ValidationError(f"Expected a timestamp as YYYY-MM-DDTHH:MM, got {text!r}") from None


def minute_index(moment: datetime) -> int:
    """Whole minutes since 1970-01-01 00:00 (naive clock)."""
    return int((moment - _EPOCH) // timedelta(minutes=1))


def on_grid(moment: datetime, period: int) -> bool:
    return moment.second == 0 and moment.microsecond == 0 and minute_index(moment) % period == 0


@dataclass(frozen=True)
class SensorReading:
    """
    One transmission of a sensor node.

    Attributes:
        sensor_id: Node id, 1 to 24.
        temperature: Reported temperature in °C.
        humidity: Reported humidity in %RH.
        date: Timestamp on the 5-minute grid, ``YYYY-MM-DDTHH:MM``.
    """

    sensor_id: int
    temperature: float
    humidity: float
    date: str

    def to_record(self) -> dict[str, Any]:
        return {
            "sensor_id": self.sensor_id,
            "temperature": self.temperature,
            "humidity": self.humidity,
            "date": self.date,
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "SensorReading":
        return cls(
            int(record["sensor_id"]),
            float(record["temperature"]),
            float(record["humidity"]),
            str(record["date"]),
        )


@dataclass(frozen=True)
class AitRecord:
    """
    Average Indoor Temperature of one 5-minute window.

    Attributes:
        date: Window timestamp.
        ait: Mean temperature over the reporting sensors in °C.
        humidity_avg: Mean humidity over the reporting sensors in %RH.
        reporting_count: Number of sensors that reported, at least 1.
    """

    date: str
    ait: float
    humidity_avg: float
    reporting_count: int

    def to_record(self) -> dict[str, Any]:
        return {
            "date": self.date,
            "ait": self.ait,
            "humidity_avg": self.humidity_avg,
            "reporting_count": self.reporting_count,
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "AitRecord":
        return cls(
            str(record["date"]),
            float(record["ait"]),
            float(record["humidity_avg"]),
            int(record["reporting_count"]),
        )


@dataclass(frozen=True)
class MpcMovement:
    """
    One logged control decision.

    Attributes:
        date: Decision timestamp on the control grid.
        ait: AIT the decision was based on in °C.
        setpoint: Setpoint in force in °C.
        u: Optimal (or clock) control action in [0, 1].
        on_minutes: Minutes the AHU runs within the sampling interval.
        controller: Which controller decided.

    Raises:
        ValidationError: If ``u`` leaves [0, 1] or ``on_minutes`` is negative.
    """

    date: str
    ait: float
    setpoint: float
    u: float
    on_minutes: float
    controller: ControllerKind

    def __post_init__(self):
        if not 0.0 <= self.u <= 1.0:
            raise ValidationError(f"u must be within [0, 1], got {self.u}")
        if self.on_minutes < 0:
            raise ValidationError(f"on_minutes must not be negative, got {self.on_minutes}")
        object.__setattr__(self, "controller", ControllerKind(self.controller))

    def to_record(self) -> dict[str, Any]:
        return {
            "date": self.date,
            "ait": self.ait,
            "setpoint": self.setpoint,
            "u": self.u,
            "on_minutes": self.on_minutes,
            "controller": str(self.controller),
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "MpcMovement":
        return cls(
            str(record["date"]),
            float(record["ait"]),
            float(record["setpoint"]),
            float(record["u"]),
            float(record["on_minutes"]),
            ControllerKind(record["controller"]),
        )


@dataclass(frozen=True)
class WeatherRecord:
    """Disturbances logged on the 5-minute grid, the server-side copy of the downloaded weather."""

    date: str
    t_out: float
    h_out: float
    w_speed: float
    s_rad: float
    s_energy: float
    occupancy: float

    @classmethod
    def from_disturbances(cls, moment: datetime, dist: Disturbances) -> "WeatherRecord":
        return cls(
            format_date(moment),
            round(dist.t_out, 4),
            round(dist.h_out, 4),
            round(dist.w_speed, 4),
            round(dist.s_rad, 4),
            round(dist.s_energy, 4),
            dist.occupancy,
        )

    def features(self) -> list[float]:
        return [self.t_out, self.h_out, self.w_speed, self.s_rad, self.s_energy]

    def to_record(self) -> dict[str, Any]:
        return {
            "date": self.date,
            "t_out": self.t_out,
            "h_out": self.h_out,
            "w_speed": self.w_speed,
            "s_rad": self.s_rad,
            "s_energy": self.s_energy,
            "occupancy": self.occupancy,
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "WeatherRecord":
        return cls(
            str(record["date"]),
            float(record["t_out"]),
            float(record["h_out"]),
            float(record["w_speed"]),
            float(record["s_rad"]),
            float(record["s_energy"]),
            float(record["occupancy"]),
        )


@dataclass(frozen=True)
class Dropout:
    """A sensor node that stays silent from ``start`` (inclusive) to ``stop`` (exclusive)."""

    sensor_id: int
    start: datetime
    stop: datetime

    def covers(self, sensor_id: int, moment: datetime) -> bool:
        return sensor_id == self.sensor_id and self.start <= moment < self.stop


@dataclass(frozen=True)
class SensorConfig:
    """
    Sensor emulation settings.

    Noise is uniform within ``±temperature_noise`` / ``±humidity_noise``. Readings are then rounded to multiples of
    ``temperature_step`` / ``humidity_step``. A zero step disables rounding, so an all-zero configuration reports the
    zone values exactly.

    Attributes:
        temperature_noise: Half-width of the temperature noise in °C.
        humidity_noise: Half-width of the humidity noise in %RH.
        temperature_step: Temperature resolution in °C.
        humidity_step: Humidity resolution in %RH.
        dropouts: Scripted outages.
    """

    temperature_noise: float = 2.0
    humidity_noise: float = 5.0
    temperature_step: float = 1.0
    humidity_step: float = 1.0
    dropouts: tuple[Dropout, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "dropouts", tuple(self.dropouts))
        for name in ("temperature_noise", "humidity_noise", "temperature_step", "humidity_step"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must not be negative")

    @classmethod
    def exact(cls, dropouts: Sequence[Dropout] = ()) -> "SensorConfig":
        """Noise-free sensors reporting the zone values unchanged."""
        return cls(0.0, 0.0, 0.0, 0.0, tuple(dropouts))


def _quantize(value: float, step: float) -> float:
    if step <= 0:
        return float(value)
    return round(round(value / step) * step, 6)


def sample_sensors(
    plant_state: PlantState,
    timestamp: datetime,
    seed: int,
    config: SensorConfig | None = None,
) -> list[SensorReading]:
    """
    Emulate one transmission round of all sensor nodes.

    The noise of each node is drawn from a generator seeded with ``(seed, minute index, ...)``, so the reading of a
    node depends only on the seed, the timestamp and the node, never on which other nodes drop out.

    Args:
        plant_state: State to read the zone temperatures from. All zones share the indoor humidity.
        timestamp: Transmission time on the 5-minute grid.
        seed: Non-negative noise seed.
        config: Sensor settings. Defaults to :class:`SensorConfig` ().

    Returns:
        list[SensorReading]: One reading per zone in id order, minus the nodes in a scripted dropout.

    Raises:
        ValidationError: If ``timestamp`` is not on the 5-minute grid.
    """
    if not on_grid(timestamp, SENSOR_PERIOD):
        raise ValidationError(f"{timestamp} is not on the {SENSOR_PERIOD}-minute grid")
    config = config or SensorConfig()
    rng = np.random.default_rng([seed, minute_index(timestamp)])
    noise = rng.uniform(-1.0, 1.0, (ZONE_COUNT, 2))
    date_text = format_date(timestamp)

    readings = []
    for index, zone_temp in enumerate(plant_state.zone_temps):
        sensor_id = index + 1
        if any(d.covers(sensor_id, timestamp) for d in config.dropouts):
            _log.debug(f"Sensor {sensor_id} silent at {date_text}")
            continue
        temperature = zone_temp + config.temperature_noise * noise[index, 0]
        humidity = plant_state.indoor_humidity + config.humidity_noise * noise[index, 1]
        readings.append(
            SensorReading(
                sensor_id,
                _quantize(float(temperature), config.temperature_step),
                _quantize(float(np.clip(humidity, 0.0, 100.0)), config.humidity_step),
                date_text,
            )
        )
    return readings


def aggregate_ait(readings: Iterable[SensorReading]) -> AitRecord | None:
    """
    Average the readings of one window into an :class:`AitRecord`.

    Duplicate deliveries of the same node are counted once. The sums are exactly rounded, so the result does not
    depend on the order of the readings.

    Returns:
        AitRecord | None: The aggregate, or None (with a logged connectivity event) when no node reported.

    Raises:
        ValidationError: If the readings belong to different windows.

    Example::

        aggregate_ait([SensorReading(1, 20.0, 40.0, d), SensorReading(2, 22.0, 50.0, d)]).ait  # 21.0
    """
    unique: dict[int, SensorReading] = {}
    for reading in readings:
        unique.setdefault(reading.sensor_id, reading)
    if not unique:
        _log.warning("No sensor reported in this window, no AIT record written")
        return None
    dates = {r.date for r in unique.values()}
    if len(dates) > 1:
        raise ValidationError(f"Readings span several windows: {sorted(dates)}")
    ordered = [unique[k] for k in sorted(unique)]
    count = len(ordered)
    return AitRecord(
        date=dates.pop(),
        ait=math.fsum(r.temperature for r in ordered) / count,
        humidity_avg=math.fsum(r.humidity for r in ordered) / count,
        reporting_count=count,
    )


def detect_gaps(
    readings: Iterable[SensorReading],
    start: datetime,
    stop: datetime,
    sensor_ids: Iterable[int] = range(1, ZONE_COUNT + 1),
) -> list[tuple[int, list[str]]]:
    """
    List every grid slot in ``[start, stop)`` a node did not report.

    Args:
        readings: Reading log to check.
        start: First grid slot.
        stop: End of the window, exclusive.
        sensor_ids: Nodes expected to report.

    Returns:
        list[tuple[int, list[str]]]: ``(sensor_id, missed timestamps)`` for each node with misses, by id.

    Example::

        # node 7 silent from 10:00 to 10:15
        detect_gaps(log, start, stop)  # [(7, ["...T10:00", "...T10:05", "...T10:10"])]
    """
    seen = {(r.sensor_id, r.date) for r in readings}
    slots = []
    moment = start
    while moment < stop:
        slots.append(format_date(moment))
        moment += timedelta(minutes=SENSOR_PERIOD)
    gaps = []
    for sensor_id in sorted(sensor_ids):
        missed = [slot for slot in slots if (sensor_id, slot) not in seen]
        if missed:
            gaps.append((sensor_id, missed))
    return gaps


class MessageBus:
    """
    In-process stand-in for the publish/subscribe broker between gateway and server.

    Messages are serialized to JSON bytes on publish, exactly as they would travel to a broker, and are delivered per
    topic in publish order. A message stays queued until a consumer drains it.

    Args:
        logger_name: Name of the logger to use. Use empty string for root logger.

    Example::

        bus = MessageBus("ahumpc")
        bus.publish("sensors", {"sensor_id": 1, "temperature": 21.0, "humidity": 40.0, "date": "2023-01-02T06:00"})
        bus.drain("sensors")  # [{"sensor_id": 1, ...}]
    """

    def __init__(self, logger_name: str = ""):
        self._queues: dict[str, deque[bytes]] = {}
        self._log = getLogger(logger_name)

    def publish(self, topic: str, message: dict[str, Any]) -> None:
        self._queues.setdefault(topic, deque()).append(json.dumps(message).encode("utf-8"))

    def pending(self, topic: str) -> int:
        return len(self._queues.get(topic, ()))

    def drain(self, topic: str) -> list[dict[str, Any]]:
        """Remove and decode every queued message of ``topic`` in publish order. Undecodable messages are dropped."""
        queue = self._queues.get(topic)
        messages = []
        while queue:
            payload = queue.popleft()
            try:
                messages.append(json.loads(payload))
            except ValueError:
                self._log.warning(f"Dropped undecodable message on {topic}: {payload!r}")
        return messages
