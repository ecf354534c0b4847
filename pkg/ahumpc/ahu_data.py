"""
Data structures, exceptions and constants shared by every ahumpc module.

This module defines the vocabulary the rest of the package speaks. It provides:

- Exception classes for invalid input (:class:`ValidationError` and its refinements) and for solver failures
- :class:`FosParams`, the gain / time constant / dead time triple of a first-order thermal response
- :class:`TemperatureTrace`, an evenly sampled temperature curve
- Enumerations for the curve direction, the actuator mode and the controller kind
- Constants describing the monitored building and the control grid

Constants:
    ZONE_COUNT (int): Number of rooms, each carrying one sensor node.
    SENSOR_PERIOD (int): Minutes between two sensor transmissions.
    CONTROL_SAMPLING (int): Default minutes between two control decisions.
    DEFAULT_DELAY (float): Default dead time of the AHU response in minutes.
    COMFORT_BAND (tuple[float, float]): Default comfort band in °C.
    MAX_PAIR_SPAN (int): Longest interval in minutes covered by one training sample.
    FEATURE_NAMES (tuple[str, ...]): Order of the eight surrogate inputs.
    DATE_FORMAT (str): strftime format of every timestamp written to a store.
"""

import math
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Any

import numpy as np


class ValidationError(Exception):
    """
    Exception raised when an input violates a documented precondition.

    Raised by the numeric modules for out-of-range parameters, malformed traces and degenerate datasets, and by the
    stores when a record would break their ordering.

    Example:
        ::

            try:
                step_response(params, u=1.5, t=10.0)
            except ValidationError as e:
                print(f"Invalid input: {e}")
    """

    pass


class UnsettledCurveError(ValidationError):
    """
    Raised when a curve is too short or still moving, so no time constant can be read from it.

    Example:
        ::

            try:
                params = extract_params(curve, Direction.INCREASING, delay=13.0)
            except UnsettledCurveError:
                params = previous_params
    """

    pass


class ConfigError(ValidationError):
    """
    Raised when a scenario file does not match the expected schema.

    Attributes:
        key_path: Dotted path of the offending key (e.g. ``"mpc.horizon"``). Empty for file-level problems.
    """

    def __init__(self, message: str, key_path: str = ""):
        self.key_path = key_path
        super().__init__(f"{key_path}: {message}" if key_path else message)


class SolverError(Exception):
    """
    Raised when the MPC solver does not reach its tolerance within the iteration cap.

    Attributes:
        best_plan: The best iterate found before giving up. Callers may still apply it.
    """

    def __init__(self, message: str, best_plan: Any = None):
        self.best_plan = best_plan
        super().__init__(message)


class Direction(StrEnum):
    """Direction of a thermal response: heating up with the AHU on, or cooling down with it off."""

    INCREASING = "increasing"
    DECREASING = "decreasing"

    @property
    def sign(self) -> int:
        return 1 if self is Direction.INCREASING else -1


class ActuatorMode(StrEnum):
    """Binary AHUs are switched ON/OFF, analog AHUs accept a fractional gain."""

    BINARY = "binary"
    ANALOG = "analog"


class ControllerKind(StrEnum):
    MPC = "mpc"
    MANUAL = "manual"


def clock_minutes(text: str) -> int:
    """
    Convert an ``"HH:MM"`` wall-clock string to minutes after midnight. ``"24:00"`` is accepted as 1440.

    Raises:
        ValidationError: If the string is not a valid time of day.
    """
    try:
        hours, minutes = text.split(":")
        value = int(hours) * 60 + int(minutes)
        valid = len(minutes) == 2 and 0 <= int(minutes) < 60
    except (AttributeError, ValueError):
        raise ValidationError(f"Expected a time of day as HH:MM, got {text!r}") from None
    if not valid or not 0 <= value <= 1440:
        raise ValidationError(f"Expected a time of day as HH:MM, got {text!r}")
    return value


def _require_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise ValidationError(f"{name} must be finite, got {value}")


@dataclass(frozen=True)
class FosParams:
    """
    Parameters of a first-order system with dead time.

    The response to a constant input gain ``u`` applied at ``t = 0`` is
    ``y(t) = y_init + u * kp * (1 - exp(-(t - theta) / tau))`` for ``t >= theta`` and ``y_init`` before.

    Attributes:
        kp: Steady-state temperature change per unit input gain in °C. Positive for increasing curves, negative for
            decreasing ones.
        tau: Time constant in minutes.
        theta: Dead time in minutes.
        y_init: Temperature at the start of the response in °C.

    Raises:
        ValidationError: If any field is non-finite, ``tau <= 0``, ``theta < 0`` or ``kp == 0``.

    Example:
        ::

            params = FosParams(kp=5.0, tau=60.0, theta=13.0, y_init=20.0)
            print(params.direction)  # Direction.INCREASING
    """

    kp: float
    tau: float
    theta: float = 13.0
    y_init: float = 0.0

    def __post_init__(self):
        _require_finite(kp=self.kp, tau=self.tau, theta=self.theta, y_init=self.y_init)
        if self.tau <= 0:
            raise ValidationError(f"tau must be positive, got {self.tau}")
        if self.theta < 0:
            raise ValidationError(f"theta must not be negative, got {self.theta}")
        if self.kp == 0:
            raise ValidationError("kp must not be zero")

    @property
    def direction(self) -> Direction:
        return Direction.INCREASING if self.kp > 0 else Direction.DECREASING

    def to_record(self) -> dict[str, float]:
        return {
            "kp": self.kp,
            "tau": self.tau,
            "theta": self.theta,
            "y_init": self.y_init,
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "FosParams":
        return cls(
            kp=float(record["kp"]),
            tau=float(record["tau"]),
            theta=float(record.get("theta", DEFAULT_DELAY)),
            y_init=float(record.get("y_init", 0.0)),
        )


@dataclass(frozen=True, eq=False)
class TemperatureTrace:
    """
    Evenly sampled temperature curve.

    Times are minutes on an arbitrary origin. Both arrays are copied to read-only float arrays on construction.

    Attributes:
        times: Sample times in minutes, strictly increasing with constant spacing ``resolution``.
        temperatures: Temperature at each sample time in °C.
        resolution: Minutes between two samples.

    Raises:
        ValidationError: If the trace is empty, the arrays differ in length, a value is non-finite or the spacing is
            not uniform.

    Example:
        ::

            trace = TemperatureTrace.from_samples([(0, 20.0), (5, 20.4), (10, 20.7)], resolution=5)
            print(trace.end_value)  # 20.7
    """

    times: np.ndarray
    temperatures: np.ndarray
    resolution: float = field(default=1.0)

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        temps = np.array(self.temperatures, dtype=float)
        if times.ndim != 1 or times.size == 0:
            raise ValidationError("A temperature trace needs at least one sample")
        if times.shape != temps.shape:
            raise ValidationError(
                f"times and temperatures differ in length ({times.size} != {temps.size})"
            )
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(temps))):
            raise ValidationError("A temperature trace must only contain finite values")
        if not math.isfinite(self.resolution) or self.resolution <= 0:
            raise ValidationError(f"resolution must be positive, got {self.resolution}")
        if times.size > 1:
            steps = np.diff(times)
            tolerance = 1e-9 * max(1.0, float(np.max(np.abs(times))))
            if np.any(np.abs(steps - self.resolution) > tolerance):
                raise ValidationError(
                    f"Samples must be spaced by exactly {self.resolution} minutes"
                )
        times.setflags(write=False)
        temps.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "temperatures", temps)
        object.__setattr__(self, "resolution", float(self.resolution))

    @classmethod
    def from_samples(
        cls, samples: list[tuple[float, float]], resolution: float
    ) -> "TemperatureTrace":
        if not samples:
            raise ValidationError("A temperature trace needs at least one sample")
        times, temps = zip(*samples)
        return cls(np.asarray(times), np.asarray(temps), resolution)

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.times.tolist(), self.temperatures.tolist()))

    @property
    def start_value(self) -> float:
        return float(self.temperatures[0])

    @property
    def end_value(self) -> float:
        return float(self.temperatures[-1])

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def shifted(self, offset: float) -> "TemperatureTrace":
        """Return the same curve with every timestamp moved by ``offset`` minutes."""
        return TemperatureTrace(self.times + offset, self.temperatures, self.resolution)

    def __len__(self) -> int:
        return int(self.times.size)


#: Number of rooms in the monitored building side, each with one sensor node.
ZONE_COUNT = 24

#: Minutes between two transmissions of a sensor node.
SENSOR_PERIOD = 5

#: Default minutes between two control decisions.
CONTROL_SAMPLING = 30

#: Default dead time of the AHU in minutes.
DEFAULT_DELAY = 13.0

#: Default comfort band in °C. Its midpoint is the setpoint when no occupant feedback is valid.
COMFORT_BAND = (20.0, 25.0)

#: Longest interval in minutes covered by a single training sample.
MAX_PAIR_SPAN = 300

#: Order of the eight surrogate inputs.
#:
#: Type:
#:     tuple[str, ...]
#:
#: Example:
#:     ::
#:
#:         column = FEATURE_NAMES.index("delta_t")
FEATURE_NAMES = (
    "t_init",
    "delta_t",
    "i_ahu",
    "t_out",
    "h_out",
    "w_speed",
    "s_rad",
    "s_energy",
)

#: Order of the weather columns inside disturbance arrays (a suffix of FEATURE_NAMES).
WEATHER_FEATURES = FEATURE_NAMES[3:]

#: Timestamp format used by every store and wire record (minute precision).
DATE_FORMAT = "%Y-%m-%dT%H:%M"
