"""
Training data for the surrogate.

AHU operating sessions are cut out of the control log, and every session is expanded into all two-point samples
whose interval stays inside the session and spans at most 300 minutes. A sample holds the eight surrogate inputs
(start temperature, interval, AHU gain and the weather at the start) and the temperature change over the interval.

This module provides:

- :class:`Session`, :class:`TrainingSample`, :class:`SampleSet` and :class:`DatasetSplit`
- :class:`RunLogs`, the slice of a run's stores a dataset is built from
- :func:`extract_sessions`, :func:`expand_pairs`, :func:`split_samples` and :func:`build_daily`

Example:
    ::

        logs = RunLogs.from_stores(movement_store, ait_store, weather_store)
        splits = build_daily(date(2023, 1, 14), logs, window_days=60, seed=42)
        splits[Direction.INCREASING].train.X.shape  # (n, 8)
"""

import json
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from logging import getLogger
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .ahu_data import (
    ActuatorMode,
    CONTROL_SAMPLING,
    Direction,
    FEATURE_NAMES,
    MAX_PAIR_SPAN,
    SENSOR_PERIOD,
    TemperatureTrace,
    ValidationError,
    WEATHER_FEATURES,
)
from .record_store import RecordStore
from .telemetry import AitRecord, MpcMovement, WeatherRecord, format_date, parse_date

_log = getLogger(__name__)

#: Default length of the trailing training window in days.
WINDOW_DAYS = 60

#: Default train / validation / test shares.
SPLIT_SHARES = (0.70, 0.15, 0.15)


@dataclass(frozen=True, eq=False)
class Session:
    """
    A stretch of constant AHU input with an uninterrupted AIT record.

    Attributes:
        start: Timestamp of the first AIT point.
        end: Timestamp of the last AIT point.
        direction: Increasing while the AHU runs, decreasing while it is off.
        ait_trace: AIT on the 5-minute grid, times in minutes since ``start``.
        mean_gain: AHU gain during the session (0 for decreasing sessions).
        disturbances: Weather at each point, shape ``(len(ait_trace), 5)`` in ``WEATHER_FEATURES`` order.
    """

    start: datetime
    end: datetime
    direction: Direction
    ait_trace: TemperatureTrace
    mean_gain: float
    disturbances: np.ndarray

    def __post_init__(self):
        if (self.direction == Direction.INCREASING) != (self.mean_gain > 0):
            raise ValidationError("Increasing sessions need a positive gain, decreasing ones zero")
        if self.disturbances.shape != (len(self.ait_trace), len(WEATHER_FEATURES)):
            raise ValidationError("One row of disturbances is needed per AIT point")

    def __len__(self) -> int:
        return len(self.ait_trace)


@dataclass(frozen=True)
class TrainingSample:
    """One surrogate sample: the eight inputs and the temperature change ``target`` in °C."""

    t_init: float
    delta_t: float
    i_ahu: float
    t_out: float
    h_out: float
    w_speed: float
    s_rad: float
    s_energy: float
    target: float

    def inputs(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_NAMES])

    def to_record(self) -> dict[str, float]:
        record = {name: getattr(self, name) for name in FEATURE_NAMES}
        record["target"] = self.target
        return record


@dataclass(frozen=True, eq=False)
class SampleSet:
    """
    Samples of one direction as arrays.

    Attributes:
        X: Inputs, shape ``(n, 8)`` in ``FEATURE_NAMES`` order.
        y: Targets, shape ``(n,)``.
        direction: Direction all samples belong to.
    """

    X: np.ndarray
    y: np.ndarray
    direction: Direction

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float).reshape(-1, len(FEATURE_NAMES))
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise ValidationError(f"{X.shape[0]} inputs but {y.shape[0]} targets")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "direction", Direction(self.direction))

    @classmethod
    def empty(cls, direction: Direction) -> "SampleSet":
        return cls(np.empty((0, len(FEATURE_NAMES))), np.empty(0), direction)

    @classmethod
    def concat(cls, direction: Direction, sets: Sequence["SampleSet"]) -> "SampleSet":
        if any(s.direction != direction for s in sets):
            raise ValidationError("Cannot mix directions in one sample set")
        if not sets:
            return cls.empty(direction)
        return cls(np.vstack([s.X for s in sets]), np.concatenate([s.y for s in sets]), direction)

    def subset(self, indices: np.ndarray) -> "SampleSet":
        return SampleSet(self.X[indices], self.y[indices], self.direction)

    def __len__(self) -> int:
        return int(self.y.size)

    def __iter__(self) -> Iterator[TrainingSample]:
        for row, target in zip(self.X.tolist(), self.y.tolist()):
            yield TrainingSample(*row, target)

    def export_ndjson(self, path: Path) -> None:
        """Write one JSON object per sample (eight inputs, target and direction)."""
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as file:
            for sample in self:
                record = sample.to_record()
                record["direction"] = str(self.direction)
                file.write(json.dumps(record) + "\n")

    @classmethod
    def from_ndjson(cls, path: Path) -> "SampleSet":
        """
        Read a file written by :meth:`export_ndjson`.

        Raises:
            ValidationError: If the file is empty, a line is malformed or the lines mix directions.
        """
        rows, targets, directions = [], [], set()
        with open(path, "r", encoding="utf-8") as file:
            for number, line in enumerate(file, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    rows.append([float(record[name]) for name in FEATURE_NAMES])
                    targets.append(float(record["target"]))
                    directions.add(record["direction"])
                except (ValueError, KeyError, TypeError):
                    raise ValidationError(f"Malformed sample on line {number} of {path}") from None
        if not rows:
            raise ValidationError(f"{path} holds no samples")
        if len(directions) != 1:
            raise ValidationError(f"{path} mixes directions {sorted(directions)}")
        return cls(np.array(rows), np.array(targets), Direction(directions.pop()))


@dataclass(frozen=True)
class DatasetSplit:
    """Train, validation and test sets of one direction."""

    train: SampleSet
    val: SampleSet
    test: SampleSet

    @property
    def direction(self) -> Direction:
        return self.train.direction

    @property
    def sizes(self) -> dict[str, int]:
        return {"train": len(self.train), "val": len(self.val), "test": len(self.test)}

    def combined(self) -> SampleSet:
        """All samples of the split in train, validation, test order."""
        return SampleSet.concat(self.direction, [self.train, self.val, self.test])


@dataclass
class RunLogs:
    """Control, AIT and weather logs of a run, the raw material of a dataset."""

    movements: list[MpcMovement] = field(default_factory=list)
    ait: list[AitRecord] = field(default_factory=list)
    weather: list[WeatherRecord] = field(default_factory=list)

    @classmethod
    def from_stores(
        cls,
        movement_store: RecordStore,
        ait_store: RecordStore,
        weather_store: RecordStore,
        start: str | None = None,
        stop: str | None = None,
    ) -> "RunLogs":
        """Load the records dated within ``[start, stop]`` from the three stores."""
        return cls(
            [MpcMovement.from_record(r) for r in movement_store.read_range(start, stop)],
            [AitRecord.from_record(r) for r in ait_store.read_range(start, stop)],
            [WeatherRecord.from_record(r) for r in weather_store.read_range(start, stop)],
        )


def _slot_states(
    movements: Sequence[MpcMovement], sampling: int, mode: ActuatorMode
) -> dict[str, float | None]:
    """Gain of every 5-minute slot covered by a movement, None for slots the AHU switched within."""
    states: dict[str, float | None] = {}
    for movement in movements:
        start = parse_date(movement.date)
        for offset in range(0, sampling, SENSOR_PERIOD):
            slot = format_date(start + timedelta(minutes=offset))
            if mode == ActuatorMode.ANALOG:
                states[slot] = movement.u if movement.on_minutes > 0 else 0.0
            elif offset + SENSOR_PERIOD <= movement.on_minutes:
                states[slot] = 1.0
            elif offset >= movement.on_minutes:
                states[slot] = 0.0
            else:
                states[slot] = None
    return states


def _make_session(
    points: list[datetime],
    gain: float,
    ait: dict[str, float],
    weather: dict[str, list[float]] | None,
) -> Session:
    start = points[0]
    times = np.array([(p - start) / timedelta(minutes=1) for p in points])
    temps = np.array([ait[format_date(p)] for p in points])
    if weather is None:
        disturbances = np.zeros((len(points), len(WEATHER_FEATURES)))
    else:
        rows = [weather[format_date(p)] for p in points[:-1]]
        rows.append(weather.get(format_date(points[-1]), rows[-1]))
        disturbances = np.array(rows)
    direction = Direction.INCREASING if gain > 0 else Direction.DECREASING
    return Session(
        start,
        points[-1],
        direction,
        TemperatureTrace(times, temps, SENSOR_PERIOD),
        gain,
        disturbances,
    )


def extract_sessions(
    mpc_movements: Sequence[MpcMovement],
    ait_log: Sequence[AitRecord],
    weather_log: Sequence[WeatherRecord] | None = None,
    sampling: int = CONTROL_SAMPLING,
    mode: ActuatorMode = ActuatorMode.BINARY,
) -> list[Session]:
    """
    Cut the control log into sessions of constant AHU input.

    A 5-minute slot belongs to a session when the AHU ran at one gain (or stayed off) for the whole slot and the AIT
    is known at both slot ends. Slots the AHU switched within, slots without a movement and missing AIT points end
    the current session. Consecutive sessions share their boundary point.

    Args:
        mpc_movements: Control decisions, in any order.
        ait_log: AIT records on the 5-minute grid.
        weather_log: Weather records. When given, a slot also needs weather at its start. When omitted, the
            disturbance columns are zero.
        sampling: Minutes each movement covers.
        mode: Binary movements run the AHU for ``on_minutes`` from the decision; analog movements apply gain ``u``
            for the whole interval.

    Returns:
        list[Session]: Sessions in chronological order, each with at least two AIT points.

    Example::

        # ON 06:00-09:00 then OFF 09:00-12:00
        [s.direction for s in extract_sessions(movements, ait)]  # [INCREASING, DECREASING]
    """
    states = _slot_states(sorted(mpc_movements, key=lambda m: m.date), sampling, mode)
    ait = {r.date: r.ait for r in ait_log}
    weather = None if weather_log is None else {r.date: r.features() for r in weather_log}

    sessions: list[Session] = []
    points: list[datetime] = []
    current_gain: float | None = None
    for slot in sorted(states):
        gain = states[slot]
        start = parse_date(slot)
        end = start + timedelta(minutes=SENSOR_PERIOD)
        valid = (
            gain is not None
            and slot in ait
            and format_date(end) in ait
            and (weather is None or slot in weather)
        )
        if valid and points and gain == current_gain and points[-1] == start:
            points.append(end)
            continue
        if len(points) >= 2:
            sessions.append(_make_session(points, current_gain, ait, weather))
        points, current_gain = ([start, end], gain) if valid else ([], None)
    if len(points) >= 2:
        sessions.append(_make_session(points, current_gain, ait, weather))
    _log.debug(f"Extracted {len(sessions)} sessions from {len(mpc_movements)} movements")
    return sessions


def expand_pairs(session: Session, max_span: float = MAX_PAIR_SPAN) -> SampleSet:
    """
    Expand a session into every two-point sample spanning at most ``max_span`` minutes.

    For each pair of points ``i < j`` the sample starts at ``AIT[i]``, lasts ``t_j - t_i`` and reads the weather at
    ``t_i``. A session of ``n`` points no longer than ``max_span`` yields ``n * (n - 1) / 2`` samples.

    Returns:
        SampleSet: Samples ordered by start point, then by end point.
    """
    times = session.ait_trace.times
    temps = session.ait_trace.temperatures
    i, j = np.triu_indices(len(times), k=1)
    span = times[j] - times[i]
    keep = span <= max_span + 1e-9
    i, j, span = i[keep], j[keep], span[keep]
    X = np.column_stack(
        [
            temps[i],
            span,
            np.full(i.size, session.mean_gain),
            session.disturbances[i],
        ]
    )
    return SampleSet(X, temps[j] - temps[i], session.direction)


def split_samples(
    samples: SampleSet, seed: int, shares: tuple[float, float, float] = SPLIT_SHARES
) -> DatasetSplit:
    """
    Shuffle with a seeded generator and split into train, validation and test sets.

    The train and validation sizes are rounded, the test set takes the rest (1000 samples give 700 / 150 / 150).
    """
    n = len(samples)
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(round(shares[0] * n))
    n_val = int(round(shares[1] * n))
    return DatasetSplit(
        samples.subset(order[:n_train]),
        samples.subset(order[n_train : n_train + n_val]),
        samples.subset(order[n_train + n_val :]),
    )


def build_daily(
    window_end_day: date,
    logs: RunLogs,
    window_days: int = WINDOW_DAYS,
    seed: int = 0,
    sampling: int = CONTROL_SAMPLING,
    mode: ActuatorMode = ActuatorMode.BINARY,
    max_span: float = MAX_PAIR_SPAN,
) -> dict[Direction, DatasetSplit]:
    """
    Build the nightly training data from the trailing window of days ending with ``window_end_day``.

    Args:
        window_end_day: Last day (inclusive) of the window.
        logs: Logs to draw from. Records outside the window are ignored.
        window_days: Window length in days.
        seed: Shuffle seed.
        sampling: Minutes covered by each movement.
        mode: Actuator mode of the logged run.
        max_span: Longest sample interval in minutes.

    Returns:
        dict[Direction, DatasetSplit]: One 70/15/15 split per direction. A direction without sessions gets empty sets.

    Raises:
        ValidationError: If no movement falls inside the window.

    Example::

        splits = build_daily(date(2023, 3, 1), logs, window_days=60, seed=7)
        splits[Direction.DECREASING].sizes  # {"train": ..., "val": ..., "test": ...}
    """
    if window_days < 1:
        raise ValidationError(f"window_days must be positive, got {window_days}")
    first = datetime.combine(window_end_day - timedelta(days=window_days - 1), datetime.min.time())
    stop = datetime.combine(window_end_day + timedelta(days=1), datetime.min.time())
    first_text, stop_text = format_date(first), format_date(stop)

    movements = [m for m in logs.movements if first_text <= m.date < stop_text]
    if not movements:
        raise ValidationError(f"No control log between {first_text} and {stop_text}")
    ait = [r for r in logs.ait if first_text <= r.date <= stop_text]
    weather = [r for r in logs.weather if first_text <= r.date < stop_text]

    sessions = extract_sessions(movements, ait, weather, sampling, mode)
    splits = {}
    for direction in Direction:
        sets = [expand_pairs(s, max_span) for s in sessions if s.direction == direction]
        samples = SampleSet.concat(direction, sets)
        splits[direction] = split_samples(samples, seed)
        _log.debug(f"{direction} window ending {window_end_day}: {len(samples)} samples")
    return splits
