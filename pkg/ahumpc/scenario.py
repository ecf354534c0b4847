"""
Scenario files: the full description of one simulated experiment.

A scenario is a JSON object with ``"schema_version": 1``. Every section is optional and falls back to the reference
defaults (48-step horizon, 30-minute sampling, 13-minute delay, 20-25 °C comfort band, 380 V / 15.4 A / 0.82 motor).
Unknown keys are rejected so typos do not silently fall back to a default.

This module provides:

- :class:`ElectricalParams`: motor data for the energy formula
- :class:`FallbackFos`: first-order models used until the first surrogate is trained
- :class:`ScenarioConfig`: the complete, validated experiment description
- :func:`load_scenario` and :func:`scenario_from_dict`

Example:
    ::

        scenario = load_scenario(Path("scenarios/reference.json"))
        scenario = scenario.with_overrides(seed=7, controller="manual", days=3)
        print(scenario.evaluation_days[0], scenario.electrical.power_kw)

Scenario file::

    {
        "schema_version": 1,
        "name": "reference",
        "seed": 42,
        "start_date": "2023-01-02",
        "end_date": "2023-01-15",
        "controller": "mpc",
        "manual_schedule": [["06:00", "21:00"]],
        "mpc": {"horizon": 48, "sampling": 30},
        "electrical": {"voltage": 380.0, "current": 15.4, "cos_phi": 0.82}
    }
"""

import json
import math
from dataclasses import dataclass, field, fields, replace
from datetime import date, timedelta
from pathlib import Path
from typing import Any, Callable

from .ahu_data import (
    ActuatorMode,
    ConfigError,
    ControllerKind,
    FosParams,
    ValidationError,
    clock_minutes,
)
from .dataset import WINDOW_DAYS
from .mapper import EPSILON, ProtectionPolicy
from .mpc import MpcConfig
from .plant import (
    ClimateConfig,
    OccupancyProfile,
    PlantCoefficients,
    PlantState,
    validate_windows,
)
from .surrogate import SurrogateConfig
from .telemetry import Dropout, SensorConfig, parse_date

#: Schema version this module reads and writes.
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ElectricalParams:
    """
    Three-phase motor data of the AHU.

    Attributes:
        voltage: Line voltage in volts.
        current: Line current in amperes.
        cos_phi: Power factor within (0, 1].
    """

    voltage: float = 380.0
    current: float = 15.4
    cos_phi: float = 0.82

    def __post_init__(self):
        if not self.voltage > 0 or not self.current > 0:
            raise ValidationError("voltage and current must be positive")
        if not 0.0 < self.cos_phi <= 1.0:
            raise ValidationError(f"cos_phi must be within (0, 1], got {self.cos_phi}")

    @property
    def power_kw(self) -> float:
        """Electrical power of the running motor in kW."""
        return self.voltage * self.current * self.cos_phi * math.sqrt(3) / 1000.0


def _default_increasing() -> FosParams:
    return FosParams(kp=10.0, tau=150.0, theta=13.0, y_init=18.0)


def _default_decreasing() -> FosParams:
    return FosParams(kp=-10.0, tau=150.0, theta=13.0, y_init=24.0)


@dataclass(frozen=True)
class FallbackFos:
    """First-order models the MPC uses before any surrogate produced usable ones."""

    increasing: FosParams = field(default_factory=_default_increasing)
    decreasing: FosParams = field(default_factory=_default_decreasing)

    def __post_init__(self):
        if self.increasing.kp <= 0 or self.decreasing.kp >= 0:
            raise ValidationError("The increasing model needs a positive gain and the decreasing one a negative gain")


@dataclass(frozen=True)
class ScenarioConfig:
    """
    Validated description of one experiment.

    The run covers ``warmup_days`` clock-controlled days before ``start_date`` followed by the evaluation range
    ``start_date`` to ``end_date`` (both inclusive). Only the evaluation range counts in energy comparisons.

    Attributes:
        name: Free-form scenario name.
        seed: Seed of the weather, the sensors and the surrogate training.
        start_date: First evaluation day.
        end_date: Last evaluation day.
        warmup_days: Clock-controlled days before ``start_date``.
        controller: ``mpc`` or ``manual``.
        actuator: ``binary`` or ``analog``.
        manual_schedule: ON windows of the clock controller in minutes after midnight.
        active_window: Period in which the MPC tracks the setpoint. Outside it the MPC idles.
        retrain_time: Time of the nightly dataset build and retraining.
        edf_time: Time of the daily EDF generation and FOS refresh.
        plant: Building model coefficients.
        initial_temperature: Uniform building temperature at the start of the run in °C.
        initial_humidity: Indoor humidity at the start of the run in %RH.
        climate: Weather generator settings.
        occupancy: Occupied hours.
        sensors: Sensor emulation settings.
        mpc: Controller settings.
        surrogate: Surrogate architecture and training settings.
        electrical: Motor data for the energy formula.
        protection_threshold: Motor protection threshold in minutes, None to disable.
        epsilon: Output mapping tolerance in °C.
        fallback_fos: Models used before the first successful training.
        feedback_path: Occupant feedback script (NDJSON), None for no feedback.
        training_window_days: Days of history every nightly training uses.
        output_dir: Directory receiving the run's stores.
    """

    name: str = "reference"
    seed: int = 42
    start_date: date = date(2023, 1, 2)
    end_date: date = date(2023, 1, 15)
    warmup_days: int = 1
    controller: ControllerKind = ControllerKind.MPC
    actuator: ActuatorMode = ActuatorMode.BINARY
    manual_schedule: tuple[tuple[int, int], ...] = ((6 * 60, 21 * 60),)
    active_window: tuple[int, int] = (6 * 60, 21 * 60)
    retrain_time: int = 30
    edf_time: int = 6 * 60
    plant: PlantCoefficients = field(default_factory=PlantCoefficients)
    initial_temperature: float = 18.0
    initial_humidity: float = 40.0
    climate: ClimateConfig = field(default_factory=ClimateConfig)
    occupancy: OccupancyProfile = field(default_factory=OccupancyProfile)
    sensors: SensorConfig = field(default_factory=SensorConfig)
    mpc: MpcConfig = field(default_factory=MpcConfig)
    surrogate: SurrogateConfig = field(default_factory=SurrogateConfig)
    electrical: ElectricalParams = field(default_factory=ElectricalParams)
    protection_threshold: float | None = 5.0
    epsilon: float = EPSILON
    fallback_fos: FallbackFos = field(default_factory=FallbackFos)
    feedback_path: Path | None = None
    training_window_days: int = WINDOW_DAYS
    output_dir: Path = Path("runs/reference")

    def __post_init__(self):
        object.__setattr__(self, "controller", ControllerKind(self.controller))
        object.__setattr__(self, "actuator", ActuatorMode(self.actuator))
        object.__setattr__(self, "manual_schedule", tuple(validate_windows(self.manual_schedule)))
        if self.end_date < self.start_date:
            raise ValidationError("end_date must not precede start_date")
        if self.warmup_days < 0:
            raise ValidationError(f"warmup_days must not be negative, got {self.warmup_days}")
        validate_windows([self.active_window])
        for name in ("retrain_time", "edf_time"):
            if not 0 <= getattr(self, name) < 1440:
                raise ValidationError(f"{name} must lie within the day")
        if self.retrain_time >= self.edf_time:
            raise ValidationError("Retraining must finish before the EDF refresh")
        if not self.epsilon > 0:
            raise ValidationError(f"epsilon must be positive, got {self.epsilon}")
        if self.training_window_days < 1:
            raise ValidationError("training_window_days must be at least 1")
        self.protection.validate(self.mpc.sampling)
        if 1440 % self.mpc.sampling:
            raise ValidationError("The sampling time must divide the day")
        if self.mpc.sampling <= self.fallback_fos.increasing.theta:
            raise ValidationError("The fallback dead time must be shorter than the sampling time")
        PlantState.uniform(self.initial_temperature, self.initial_humidity)

    @property
    def protection(self) -> ProtectionPolicy:
        return ProtectionPolicy(self.protection_threshold)

    @property
    def warmup_start(self) -> date:
        return self.start_date - timedelta(days=self.warmup_days)

    @property
    def evaluation_days(self) -> list[date]:
        count = (self.end_date - self.start_date).days + 1
        return [self.start_date + timedelta(days=i) for i in range(count)]

    @property
    def all_days(self) -> list[date]:
        """Warm-up days followed by the evaluation days."""
        return [self.warmup_start + timedelta(days=i) for i in range(self.warmup_days)] + self.evaluation_days

    def with_overrides(
        self,
        seed: int | None = None,
        controller: str | None = None,
        days: int | None = None,
        output_dir: Path | None = None,
    ) -> "ScenarioConfig":
        """
        Copy of the scenario with command-line overrides applied. ``days`` shortens or extends the evaluation range.

        Raises:
            ValidationError: If an override is invalid.
        """
        changes: dict[str, Any] = {}
        if seed is not None:
            changes["seed"] = seed
        if controller is not None:
            try:
                changes["controller"] = ControllerKind(controller)
            except ValueError:
                raise ValidationError(f"Unknown controller {controller!r}") from None
        if days is not None:
            if days < 1:
                raise ValidationError(f"days must be at least 1, got {days}")
            changes["end_date"] = self.start_date + timedelta(days=days - 1)
        if output_dir is not None:
            changes["output_dir"] = output_dir
        return replace(self, **changes)


def load_scenario(path: Path) -> ScenarioConfig:
    """
    Read and validate a scenario file.

    Relative paths inside the file are resolved against the file's directory.

    Raises:
        FileNotFoundError: If the file does not exist.
        ConfigError: If the file is not valid JSON or does not match the schema. ``key_path`` names the offending key.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path} is not valid JSON ({e})") from None
    return scenario_from_dict(data, path.parent)


def scenario_from_dict(data: Any, base_dir: Path = Path(".")) -> ScenarioConfig:
    """
    Build a :class:`ScenarioConfig` from parsed JSON.

    Raises:
        ConfigError: If the data does not match the schema.
    """
    if not isinstance(data, dict):
        raise ConfigError("A scenario must be a JSON object")
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"Expected {SCHEMA_VERSION}, got {data.get('schema_version')!r}", "schema_version")

    values: dict[str, Any] = {}
    for key, raw in data.items():
        if key == "schema_version":
            continue
        if key not in _FIELDS:
            raise ConfigError("Unknown key", key)
        values[key] = _convert(key, raw, base_dir)

    try:
        return ScenarioConfig(**values)
    except (ValidationError, TypeError, ValueError) as e:
        raise ConfigError(str(e), _blame(str(e))) from None


# ----------------------------------------------------------------------------------------------------------------------
# Private Methods
# ----------------------------------------------------------------------------------------------------------------------


def _section(cls: type, raw: Any, key_path: str, converters: dict[str, Callable[[Any], Any]] | None = None) -> Any:
    """Instantiate a config dataclass from a JSON object, rejecting unknown keys."""
    if not isinstance(raw, dict):
        raise ConfigError("Expected an object", key_path)
    known = {f.name for f in fields(cls)}
    converters = converters or {}
    kwargs = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError("Unknown key", f"{key_path}.{key}")
        try:
            kwargs[key] = converters[key](value) if key in converters else value
        except ConfigError:
            raise
        except (ValidationError, TypeError, ValueError, KeyError) as e:
            raise ConfigError(str(e), f"{key_path}.{key}") from None
    try:
        return cls(**kwargs)
    except (ValidationError, TypeError, ValueError) as e:
        raise ConfigError(str(e), key_path) from None


def _window(raw: Any) -> tuple[int, int]:
    start, stop = raw
    return clock_minutes(start), clock_minutes(stop)


def _date(raw: Any) -> date:
    try:
        return date.fromisoformat(raw)
    except (TypeError, ValueError):
        raise ValidationError(f"Expected a date as YYYY-MM-DD, got {raw!r}") from None


def _dropout(raw: dict[str, Any]) -> Dropout:
    start, stop = parse_date(raw["start"]), parse_date(raw["stop"])
    if stop <= start:
        raise ValidationError("A dropout must stop after it starts")
    return Dropout(int(raw["sensor_id"]), start, stop)


def _fos(raw: dict[str, Any]) -> FosParams:
    if not isinstance(raw, dict):
        raise ValidationError("Expected an object with kp, tau, theta and y_init")
    return FosParams.from_record(raw)


def _convert(key: str, raw: Any, base_dir: Path) -> Any:
    try:
        match key:
            case "start_date" | "end_date":
                return _date(raw)
            case "manual_schedule":
                return tuple(_window(w) for w in raw)
            case "active_window":
                return _window(raw)
            case "retrain_time" | "edf_time":
                return clock_minutes(raw)
            case "plant":
                return _section(PlantCoefficients, raw, key)
            case "climate":
                return _section(ClimateConfig, raw, key)
            case "occupancy":
                return _section(OccupancyProfile, raw, key)
            case "sensors":
                return _section(SensorConfig, raw, key, {"dropouts": lambda d: tuple(_dropout(x) for x in d)})
            case "mpc":
                return _section(MpcConfig, raw, key)
            case "surrogate":
                return _section(SurrogateConfig, raw, key)
            case "electrical":
                return _section(ElectricalParams, raw, key)
            case "fallback_fos":
                return _section(FallbackFos, raw, key, {"increasing": _fos, "decreasing": _fos})
            case "feedback_path":
                return None if raw is None else base_dir / raw
            case "output_dir":
                return base_dir / raw
            case "seed" | "warmup_days" | "training_window_days":
                if not isinstance(raw, int) or isinstance(raw, bool):
                    raise ValidationError(f"Expected an integer, got {raw!r}")
                return raw
            case "controller":
                return ControllerKind(raw)
            case "actuator":
                return ActuatorMode(raw)
            case _:
                return raw
    except ConfigError:
        raise
    except (ValidationError, TypeError, ValueError, KeyError) as e:
        raise ConfigError(str(e), key) from None


def _blame(message: str) -> str:
    """Best guess of the key a cross-field check complained about."""
    for name in _FIELDS:
        if name in message:
            return name
    if "window" in message.lower():
        return "manual_schedule"
    return ""


_FIELDS = tuple(f.name for f in fields(ScenarioConfig))
