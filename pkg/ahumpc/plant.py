"""
Ground-truth building and AHU simulator standing in for the real testbed.

Each of the 24 zones is a thermal node coupled to one lumped envelope node. The AHU heats the zones through a coil
that lags the command, the sun heats the south-facing half of the zones, wind raises infiltration and occupants add
internal gains. Indoor humidity relaxes toward the outdoor humidity and is raised by the AHU's spray. The model is
richer than a first-order system, so a surrogate trained on it has something to learn, yet its equilibrium is a
linear solve.

This module provides:

- :class:`PlantState`, :class:`Disturbances` and :class:`AhuCommand`
- :class:`PlantCoefficients`, :class:`ClimateConfig` and :class:`OccupancyProfile` (scenario configuration)
- :func:`step_plant` and :func:`equilibrium` for the plant model itself
- :func:`generate_weather`, a deterministic seeded weather and occupancy generator
- :func:`clock_controller`, the fixed-window baseline
- :class:`Plant` (abstract) and :class:`BuildingPlant`, the stateful wrapper the orchestrator drives

Example:
    ::

        plant = BuildingPlant(PlantCoefficients(), PlantState.uniform(18.0))
        weather = generate_weather(seed=42, day_index=date(2023, 1, 2).toordinal())
        plant.step(AhuCommand(1.0), weather.at(6 * 60), dt=5.0)
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from datetime import date
from typing import Iterator, Sequence

import numpy as np

from .ahu_data import (
    ActuatorMode,
    SENSOR_PERIOD,
    ValidationError,
    ZONE_COUNT,
    clock_minutes,
)

#: Inclusive range of physically sensible temperatures in °C.
TEMPERATURE_LIMITS = (-30.0, 60.0)

#: Longest internal integration step in minutes.
MAX_SUBSTEP = 1.0

_SLOTS_PER_DAY = 24 * 60 // SENSOR_PERIOD


def _default_shares() -> tuple[float, ...]:
    # zone-dependent share of the AHU heat, mean 1.0, between 0.8 and 1.2
    return tuple(
        round(1.0 + 0.2 * math.sin(2.0 * math.pi * (i + 0.5) / ZONE_COUNT), 6)
        for i in range(ZONE_COUNT)
    )


@dataclass(frozen=True)
class PlantCoefficients:
    """
    Coefficients of the zone/envelope model. Rates are per minute, heat inputs are °C per minute.

    Attributes:
        zone_envelope: Coupling of each zone to the envelope node.
        infiltration: Coupling of each zone to the outdoor air in still weather.
        wind_infiltration: Additional outdoor coupling per m/s of wind.
        envelope_zone: Coupling of the envelope to the mean zone temperature.
        envelope_outdoor: Coupling of the envelope to the outdoor air.
        ahu_heat: Heat input into an average zone with the coil fully on.
        coil_tau: Time constant of the coil following the command, in minutes.
        zone_shares: Per-zone multiplier on ``ahu_heat``. Must hold one entry per zone.
        occupancy_heat: Internal gain at full occupancy.
        solar_gain: Gain per W/m² of solar radiation on south-facing zones.
        south_zones: 1-based ids of the zones facing south.
        humidity_rate: Relaxation rate of indoor humidity toward outdoor humidity.
        spray_humidity: Humidity added per minute with the coil fully on, in %RH.
    """

    zone_envelope: float = 1 / 150
    infiltration: float = 1 / 900
    wind_infiltration: float = 1 / 3000
    envelope_zone: float = 1 / 900
    envelope_outdoor: float = 1 / 400
    ahu_heat: float = 0.143
    coil_tau: float = 6.0
    zone_shares: tuple[float, ...] = field(default_factory=_default_shares)
    occupancy_heat: float = 0.015
    solar_gain: float = 5e-5
    south_zones: tuple[int, ...] = tuple(range(1, ZONE_COUNT + 1, 2))
    humidity_rate: float = 1 / 120
    spray_humidity: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "zone_shares", tuple(self.zone_shares))
        object.__setattr__(self, "south_zones", tuple(self.south_zones))
        for name in (
            "zone_envelope",
            "infiltration",
            "wind_infiltration",
            "envelope_zone",
            "envelope_outdoor",
            "ahu_heat",
            "occupancy_heat",
            "solar_gain",
            "humidity_rate",
            "spray_humidity",
        ):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValidationError(f"{name} must be finite and non-negative, got {value}")
        if not self.coil_tau > 0:
            raise ValidationError(f"coil_tau must be positive, got {self.coil_tau}")
        if len(self.zone_shares) != ZONE_COUNT:
            raise ValidationError(f"zone_shares needs {ZONE_COUNT} entries")
        if any(not 1 <= z <= ZONE_COUNT for z in self.south_zones):
            raise ValidationError(f"south_zones must be zone ids in 1..{ZONE_COUNT}")

    @property
    def south_mask(self) -> np.ndarray:
        mask = np.zeros(ZONE_COUNT)
        mask[[z - 1 for z in self.south_zones]] = 1.0
        return mask


@dataclass(frozen=True)
class ClimateConfig:
    """
    Shape of the generated weather. Temperatures in °C, humidity in %RH, wind in m/s, radiation in W/m², clock values
    in minutes after midnight and calendar values in day-of-year.
    """

    mean_temp: float = 8.0
    seasonal_amplitude: float = 6.0
    coldest_day: int = 15
    diurnal_amplitude: float = 4.0
    warmest_minute: int = 15 * 60
    day_to_day_std: float = 2.0
    noise_std: float = 0.3
    humidity_mean: float = 55.0
    humidity_diurnal: float = 12.0
    wind_mean: float = 2.5
    peak_radiation: float = 550.0
    solar_noon: int = 12 * 60 + 30
    day_length_swing: float = 120.0
    min_clearness: float = 0.3


@dataclass(frozen=True)
class OccupancyProfile:
    """
    Occupied hours of the building.

    Attributes:
        start: Start of the occupied period (``"HH:MM"``).
        stop: End of the occupied period (``"HH:MM"``), exclusive.
        level: Occupancy fraction during the occupied period.
        workdays: Occupied weekdays, Monday = 0.
    """

    start: str = "08:00"
    stop: str = "18:00"
    level: float = 0.7
    workdays: tuple[int, ...] = (0, 1, 2, 3, 4)

    def __post_init__(self):
        object.__setattr__(self, "workdays", tuple(self.workdays))
        if clock_minutes(self.start) >= clock_minutes(self.stop):
            raise ValidationError("Occupancy must start before it stops")
        if not 0.0 <= self.level <= 1.0:
            raise ValidationError(f"Occupancy level must be within [0, 1], got {self.level}")

    def fraction(self, day: date, minute: int) -> float:
        """Occupancy fraction on ``day`` at ``minute`` after midnight."""
        if day.weekday() not in self.workdays:
            return 0.0
        if clock_minutes(self.start) <= minute < clock_minutes(self.stop):
            return self.level
        return 0.0


@dataclass(frozen=True, eq=False)
class PlantState:
    """
    Thermal state of the building side.

    Attributes:
        zone_temps: Temperature of each of the 24 zones in °C.
        envelope_temp: Lumped wall temperature in °C.
        indoor_humidity: Indoor relative humidity in %RH.
        coil_output: Fraction of full heat the coil currently delivers.

    Raises:
        ValidationError: If the zone count is wrong, a value is non-finite or a temperature leaves [-30, 60] °C.
    """

    zone_temps: np.ndarray
    envelope_temp: float
    indoor_humidity: float = 40.0
    coil_output: float = 0.0

    def __post_init__(self):
        zones = np.array(self.zone_temps, dtype=float)
        if zones.shape != (ZONE_COUNT,):
            raise ValidationError(f"Expected {ZONE_COUNT} zone temperatures, got {zones.shape}")
        values = np.append(zones, [self.envelope_temp, self.indoor_humidity, self.coil_output])
        if not np.all(np.isfinite(values)):
            raise ValidationError("Plant state became non-finite")
        low, high = TEMPERATURE_LIMITS
        if np.any(zones < low) or np.any(zones > high) or not low <= self.envelope_temp <= high:
            raise ValidationError(f"Plant temperatures left [{low}, {high}] °C")
        zones.setflags(write=False)
        object.__setattr__(self, "zone_temps", zones)

    @classmethod
    def uniform(cls, temperature: float, humidity: float = 40.0) -> "PlantState":
        """A building resting at one temperature, envelope included."""
        return cls(np.full(ZONE_COUNT, temperature), temperature, humidity)

    @property
    def mean_temp(self) -> float:
        return float(np.mean(self.zone_temps))

    def as_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.zone_temps, [self.envelope_temp, self.coil_output, self.indoor_humidity]]
        )

    @classmethod
    def from_vector(cls, vector: np.ndarray) -> "PlantState":
        return cls(
            vector[:ZONE_COUNT],
            float(vector[ZONE_COUNT]),
            float(np.clip(vector[ZONE_COUNT + 2], 0.0, 100.0)),
            float(vector[ZONE_COUNT + 1]),
        )


@dataclass(frozen=True)
class Disturbances:
    """
    Outdoor conditions and occupancy acting on the building.

    Attributes:
        t_out: Outdoor temperature in °C.
        h_out: Outdoor humidity in %RH, within [0, 100].
        w_speed: Wind speed in m/s.
        s_rad: Solar radiation in W/m², never negative.
        s_energy: Solar energy accumulated since midnight in Wh/m².
        occupancy: Occupancy fraction in [0, 1].
    """

    t_out: float
    h_out: float
    w_speed: float = 0.0
    s_rad: float = 0.0
    s_energy: float = 0.0
    occupancy: float = 0.0

    def __post_init__(self):
        if self.s_rad < 0:
            raise ValidationError(f"Solar radiation must not be negative, got {self.s_rad}")
        if not 0.0 <= self.h_out <= 100.0:
            raise ValidationError(f"Outdoor humidity must be within [0, 100], got {self.h_out}")
        if not 0.0 <= self.occupancy <= 1.0:
            raise ValidationError(f"Occupancy must be within [0, 1], got {self.occupancy}")

    def features(self) -> np.ndarray:
        """Weather values in surrogate input order (``WEATHER_FEATURES``)."""
        return np.array([self.t_out, self.h_out, self.w_speed, self.s_rad, self.s_energy])


@dataclass(frozen=True)
class AhuCommand:
    """
    Command sent to the AHU.

    Attributes:
        gain: 0 or 1 in binary mode, any value in [0, 1] in analog mode.
        mode: Actuator mode.
    """

    gain: float
    mode: ActuatorMode = ActuatorMode.BINARY

    def __post_init__(self):
        if not math.isfinite(self.gain) or not 0.0 <= self.gain <= 1.0:
            raise ValidationError(f"AHU gain must be within [0, 1], got {self.gain}")
        if self.mode == ActuatorMode.BINARY and self.gain not in (0.0, 1.0):
            raise ValidationError(f"A binary AHU only accepts 0 or 1, got {self.gain}")


@dataclass(frozen=True, eq=False)
class WeatherDay:
    """
    One day of disturbances on the 5-minute grid (288 slots starting at midnight).

    Indexing returns the :class:`Disturbances` of one slot.
    """

    day: date
    t_out: np.ndarray
    h_out: np.ndarray
    w_speed: np.ndarray
    s_rad: np.ndarray
    s_energy: np.ndarray
    occupancy: np.ndarray

    def __len__(self) -> int:
        return int(self.t_out.size)

    def __getitem__(self, slot: int) -> Disturbances:
        return Disturbances(
            t_out=float(self.t_out[slot]),
            h_out=float(self.h_out[slot]),
            w_speed=float(self.w_speed[slot]),
            s_rad=float(self.s_rad[slot]),
            s_energy=float(self.s_energy[slot]),
            occupancy=float(self.occupancy[slot]),
        )

    def __iter__(self) -> Iterator[Disturbances]:
        return (self[i] for i in range(len(self)))

    def at(self, minute: int) -> Disturbances:
        """Disturbances holding at ``minute`` after midnight."""
        return self[min(int(minute) // SENSOR_PERIOD, len(self) - 1)]

    def features(self) -> np.ndarray:
        """Array of shape (288, 5) with the weather columns in surrogate input order."""
        return np.column_stack([self.t_out, self.h_out, self.w_speed, self.s_rad, self.s_energy])


def _derivative(
    vector: np.ndarray,
    gain: float,
    dist: Disturbances,
    coeffs: PlantCoefficients,
    shares: np.ndarray,
    south: np.ndarray,
) -> np.ndarray:
    zones = vector[:ZONE_COUNT]
    envelope, coil, humidity = vector[ZONE_COUNT:]
    outdoor = coeffs.infiltration + coeffs.wind_infiltration * dist.w_speed
    heat = (
        coeffs.ahu_heat * shares * coil
        + coeffs.occupancy_heat * dist.occupancy
        + coeffs.solar_gain * dist.s_rad * south
    )
    d_zones = (
        coeffs.zone_envelope * (envelope - zones) + outdoor * (dist.t_out - zones) + heat
    )
    d_envelope = coeffs.envelope_zone * (np.mean(zones) - envelope) + coeffs.envelope_outdoor * (
        dist.t_out - envelope
    )
    d_coil = (gain - coil) / coeffs.coil_tau
    d_humidity = coeffs.humidity_rate * (dist.h_out - humidity) + coeffs.spray_humidity * coil
    return np.concatenate([d_zones, [d_envelope, d_coil, d_humidity]])


def step_plant(
    state: PlantState,
    cmd: AhuCommand,
    dist: Disturbances,
    dt: float,
    coefficients: PlantCoefficients | None = None,
) -> PlantState:
    """
    Advance the building by ``dt`` minutes with constant command and disturbances.

    Integrates the zone/envelope model with classical Runge-Kutta steps of at most one minute.

    Args:
        state: Current state.
        cmd: AHU command held over the step.
        dist: Disturbances held over the step.
        dt: Step length in minutes, within (0, 5].
        coefficients: Model coefficients. Defaults to :class:`PlantCoefficients` ().

    Returns:
        PlantState: The advanced state.

    Raises:
        ValidationError: If ``dt`` is out of range or the state becomes non-finite or implausible.
    """
    if not math.isfinite(dt) or not 0.0 < dt <= SENSOR_PERIOD:
        raise ValidationError(f"Plant step must be within (0, {SENSOR_PERIOD}] minutes, got {dt}")
    coeffs = coefficients or PlantCoefficients()
    shares = np.asarray(coeffs.zone_shares)
    south = coeffs.south_mask
    substeps = max(1, math.ceil(dt / MAX_SUBSTEP - 1e-12))
    h = dt / substeps
    v = state.as_vector()
    for _ in range(substeps):
        k1 = _derivative(v, cmd.gain, dist, coeffs, shares, south)
        k2 = _derivative(v + 0.5 * h * k1, cmd.gain, dist, coeffs, shares, south)
        k3 = _derivative(v + 0.5 * h * k2, cmd.gain, dist, coeffs, shares, south)
        k4 = _derivative(v + h * k3, cmd.gain, dist, coeffs, shares, south)
        v = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return PlantState.from_vector(v)


def equilibrium(
    cmd: AhuCommand, dist: Disturbances, coefficients: PlantCoefficients | None = None
) -> PlantState:
    """
    Analytic steady state under constant command and disturbances.

    The coil settles at the commanded gain, which leaves a linear system in the zone and envelope temperatures.
    """
    coeffs = coefficients or PlantCoefficients()
    n = ZONE_COUNT
    outdoor = coeffs.infiltration + coeffs.wind_infiltration * dist.w_speed
    heat = (
        coeffs.ahu_heat * np.asarray(coeffs.zone_shares) * cmd.gain
        + coeffs.occupancy_heat * dist.occupancy
        + coeffs.solar_gain * dist.s_rad * coeffs.south_mask
    )
    matrix = np.zeros((n + 1, n + 1))
    rhs = np.zeros(n + 1)
    matrix[:n, :n] = -(coeffs.zone_envelope + outdoor) * np.eye(n)
    matrix[:n, n] = coeffs.zone_envelope
    rhs[:n] = -(outdoor * dist.t_out + heat)
    matrix[n, :n] = coeffs.envelope_zone / n
    matrix[n, n] = -(coeffs.envelope_zone + coeffs.envelope_outdoor)
    rhs[n] = -coeffs.envelope_outdoor * dist.t_out
    solution = np.linalg.solve(matrix, rhs)
    if coeffs.humidity_rate > 0:
        humidity = dist.h_out + coeffs.spray_humidity * cmd.gain / coeffs.humidity_rate
    else:
        humidity = dist.h_out
    return PlantState(solution[:n], float(solution[n]), float(min(humidity, 100.0)), cmd.gain)


def _daily_offsets(seed: int, day_index: int, climate: ClimateConfig) -> tuple[float, ...]:
    rng = np.random.default_rng([seed, day_index])
    return (
        float(rng.normal(0.0, climate.day_to_day_std)),
        float(rng.normal(0.0, 8.0)),
        float(rng.uniform(0.5, 1.5)),
        float(rng.uniform(climate.min_clearness, 1.0)),
    )


def generate_weather(
    seed: int,
    day_index: int,
    climate: ClimateConfig | None = None,
    occupancy: OccupancyProfile | None = None,
) -> WeatherDay:
    """
    Generate one day of disturbances on the 5-minute grid.

    Outdoor temperature combines a seasonal cosine, a diurnal cosine, a day-to-day offset that is interpolated toward
    the next day's offset (so consecutive days join at midnight) and seeded noise that fades out at midnight. Solar
    radiation is a half-sine between sunrise and sunset scaled by a daily clearness, and solar energy is its running
    integral since midnight.

    Args:
        seed: Non-negative weather seed.
        day_index: Proleptic Gregorian ordinal of the day (``date.toordinal()``).
        climate: Weather shape. Defaults to :class:`ClimateConfig` ().
        occupancy: Occupancy profile. Defaults to :class:`OccupancyProfile` ().

    Returns:
        WeatherDay: 288 slots starting at midnight. Identical for identical ``(seed, day_index)``.

    Example::

        weather = generate_weather(42, date(2023, 1, 2).toordinal())
        weather.at(0).s_energy  # 0.0
    """
    if seed < 0 or day_index < 1:
        raise ValidationError("seed must be non-negative and day_index a positive day ordinal")
    climate = climate or ClimateConfig()
    occupancy = occupancy or OccupancyProfile()
    day = date.fromordinal(day_index)
    minutes = np.arange(_SLOTS_PER_DAY) * SENSOR_PERIOD
    frac = minutes / 1440.0
    doy = day.timetuple().tm_yday + frac

    today = _daily_offsets(seed, day_index, climate)
    tomorrow = _daily_offsets(seed, day_index + 1, climate)
    blend = [(1.0 - frac) * a + frac * b for a, b in zip(today, tomorrow)]
    temp_offset, humidity_offset, wind_factor, clearness = blend

    noise = np.random.default_rng([seed, day_index, 1]).normal(0.0, 1.0, (3, minutes.size))
    taper = np.sin(np.pi * frac)
    diurnal = np.cos(2.0 * np.pi * (minutes - climate.warmest_minute) / 1440.0)

    seasonal = climate.mean_temp - climate.seasonal_amplitude * np.cos(
        2.0 * np.pi * (doy - climate.coldest_day) / 365.25
    )
    t_out = (
        seasonal
        + temp_offset
        + climate.diurnal_amplitude * diurnal
        + climate.noise_std * taper * noise[0]
    )
    h_out = np.clip(
        climate.humidity_mean
        + humidity_offset
        - climate.humidity_diurnal * diurnal
        + 2.0 * taper * noise[1],
        5.0,
        100.0,
    )
    w_speed = np.clip(climate.wind_mean * wind_factor + 0.5 * taper * noise[2], 0.0, None)

    summer = np.cos(2.0 * np.pi * (doy - 172) / 365.25)
    day_length = 720.0 + climate.day_length_swing * summer
    sunrise = climate.solar_noon - day_length / 2.0
    phase = (minutes - sunrise) / day_length
    daylight = (phase > 0.0) & (phase < 1.0)
    s_rad = np.where(
        daylight,
        climate.peak_radiation * (0.8 + 0.2 * summer) * clearness * np.sin(np.pi * phase),
        0.0,
    )
    s_rad = np.maximum(s_rad, 0.0)
    s_energy = np.concatenate([[0.0], np.cumsum(s_rad[:-1] * SENSOR_PERIOD / 60.0)])

    occupied = np.array([occupancy.fraction(day, int(m)) for m in minutes])
    return WeatherDay(day, t_out, h_out, w_speed, s_rad, s_energy, occupied)


def validate_windows(schedule: Sequence[tuple[int, int]]) -> list[tuple[int, int]]:
    """
    Sort clock windows given in minutes after midnight and check that they do not overlap.

    Raises:
        ValidationError: If a window is empty, leaves the day or overlaps another one.
    """
    windows = sorted((int(a), int(b)) for a, b in schedule)
    previous_stop = 0
    for start, stop in windows:
        if not 0 <= start < stop <= 1440:
            raise ValidationError(f"Invalid clock window ({start}, {stop})")
        if start < previous_stop:
            raise ValidationError("Clock windows must not overlap")
        previous_stop = stop
    return windows


def clock_controller(
    time_of_day: int, schedule: Sequence[tuple[int, int]]
) -> AhuCommand:
    """
    Fixed-window baseline: full gain inside any ``[start, stop)`` window, off otherwise.

    Args:
        time_of_day: Minutes after midnight.
        schedule: Windows as ``(start, stop)`` minutes after midnight.

    Example::

        clock_controller(7 * 60, [(6 * 60, 21 * 60)]).gain  # 1.0
    """
    for start, stop in validate_windows(schedule):
        if start <= time_of_day < stop:
            return AhuCommand(1.0)
    return AhuCommand(0.0)


class Plant(ABC):
    """
    Abstract building the orchestrator steps through a simulated day.

    Implementations hold their own state, so one instance must not be shared between scenario runs.
    """

    @property
    @abstractmethod
    def state(self) -> PlantState:
        """Current plant state."""
        pass

    @abstractmethod
    def step(self, cmd: AhuCommand, dist: Disturbances, dt: float) -> PlantState:
        """
        Advance the plant by ``dt`` minutes.

        Args:
            cmd: AHU command held over the step.
            dist: Disturbances held over the step.
            dt: Step length in minutes, within (0, 5].

        Returns:
            PlantState: The advanced state, also available via :attr:`state` afterwards.
        """
        pass


class BuildingPlant(Plant):
    """
    The zone/envelope building model of :func:`step_plant` with its state attached.

    Args:
        coefficients: Model coefficients.
        initial_state: State at the start of the run.
    """

    def __init__(self, coefficients: PlantCoefficients, initial_state: PlantState):
        self._coefficients = coefficients
        self._state = initial_state

    @property
    def state(self) -> PlantState:
        return self._state

    def step(self, cmd: AhuCommand, dist: Disturbances, dt: float) -> PlantState:
        self._state = step_plant(self._state, cmd, dist, dt, self._coefficients)
        return self._state
