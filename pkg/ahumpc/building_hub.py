"""
Runs a scenario on the simulated building, day by day, on the scenario clock.

This module provides the BuildingHub class, the entry point for closed-loop experiments. The BuildingHub manages:

- **Telemetry**: every 5 minutes it samples the sensors, ships the readings over the message bus, aggregates the AIT
  and persists readings, AIT and weather
- **Control**: on every sampling instant it computes the setpoint from occupant feedback, asks the controller for a
  decision, logs the movement and plays the decision's gain pattern into the plant
- **Nightly retraining**: at 00:30 it builds the datasets of the trailing window and trains the increasing and
  decreasing surrogates in parallel
- **Model refresh**: at 06:00 it generates the day's EDF curves and installs the first-order models they yield
- **Fallbacks**: failed training or extraction keeps the previous models, missing AIT holds the previous command

Example:
    ::

        # Basic
        scenario = load_scenario(Path("scenarios/reference.json"))
        hub = BuildingHub(scenario, out_dir=scenario.output_dir)
        hub.run()
        hub.shutdown()

        # With callbacks
        def on_error(exc, context, tb):
            print(f"Error {exc} while {context}. Traceback:{tb}")

        hub = BuildingHub(
            scenario,
            on_error=on_error,
            on_movement=lambda movement: print(movement.date, movement.on_minutes),
            logger_name="my_app",
        )
"""

import json
import traceback
from dataclasses import replace
from datetime import date, datetime, time, timedelta
from functools import partial
from logging import getLogger
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from .ahu_controller import AhuController, ClockController, ControlDecision, MpcController
from .ahu_data import (
    SENSOR_PERIOD,
    ControllerKind,
    Direction,
    FosParams,
    ValidationError,
)
from .dataset import RunLogs, build_daily
from .mpc import SetpointFeedback, effective_setpoint, is_plausible
from .plant import (
    AhuCommand,
    BuildingPlant,
    Disturbances,
    Plant,
    PlantState,
    WeatherDay,
    generate_weather,
)
from .record_store import RecordStore
from .scenario import SCHEMA_VERSION, ScenarioConfig
from .surrogate import MlpModel, edf_to_fos, generate_edf, train
from .telemetry import (
    SENSOR_TOPIC,
    MessageBus,
    SensorReading,
    WeatherRecord,
    aggregate_ait,
    format_date,
    sample_sensors,
)
from .utils.async_runner import AsyncRunner

#: Stores of a run, written as ``<name>.jsonl`` below the output directory.
STORE_NAMES = (
    "sensor-db",
    "ait-db",
    "weather-db",
    "mpc-movements",
    "fos-params",
    "training-metrics",
    "feedback-db",
)

_SLOTS_PER_DAY = 24 * 60 // SENSOR_PERIOD


class BuildingHub:
    """
    Orchestrates one scenario run: plant, telemetry, controller, nightly training and logging.

    Args:
        scenario: The experiment to run.
        out_dir: Directory receiving the stores, ``run.json``, the model checkpoints and the nightly datasets
            (``datasets/<direction>.jsonl``). If the path is empty (=``Path()``), the run is kept in memory only.
        plant: Building to control. Defaults to the scenario's zone/envelope model.
        logger_name: Name of the logger to use for logging messages.
        on_error: Callback invoked when a recoverable step fails. Receives (exception, context_message,
            traceback_string). The run continues with the fallback.
        on_movement: Callback invoked with every logged :class:`~ahumpc.telemetry.MpcMovement`.
        fixed_fos: Increasing and decreasing models to use throughout instead of training surrogates.

    Attributes:
        MAX_GAIN (float): AHU gain of the increasing EDF rollout.
    """

    MAX_GAIN = 1.0

    def __init__(
        self,
        scenario: ScenarioConfig,
        out_dir: Path = Path(),
        plant: Optional[Plant] = None,
        logger_name: str = "ahumpc",
        on_error: Optional[Callable[[Exception, str, str], Any]] = None,
        on_movement: Optional[Callable[[Any], Any]] = None,
        fixed_fos: Optional[tuple[FosParams, FosParams]] = None,
    ):
        self._scenario = scenario
        self._out_dir = out_dir
        self._persist = out_dir != Path()
        self._logger_name = logger_name
        self._log = getLogger(logger_name)
        self._error_callback = on_error
        self._movement_callback = on_movement
        self._fixed_fos = fixed_fos

        self._plant = plant or BuildingPlant(
            scenario.plant,
            PlantState.uniform(scenario.initial_temperature, scenario.initial_humidity),
        )
        self._stores = {
            name: RecordStore(out_dir / f"{name}.jsonl" if self._persist else Path(), logger_name)
            for name in STORE_NAMES
        }
        self._bus = MessageBus(logger_name)
        self._runner = AsyncRunner()
        self._logs = RunLogs()
        self._weather: dict[date, WeatherDay] = {}
        self._models: dict[Direction, MlpModel] = {}
        self._feedback_script = self._load_feedback(scenario.feedback_path)
        self._feedbacks: list[SetpointFeedback] = []
        self._last_ait: float | None = None

        fos_inc, fos_dec = fixed_fos or (scenario.fallback_fos.increasing, scenario.fallback_fos.decreasing)
        self._clock = ClockController(scenario.manual_schedule, scenario.mpc.sampling, logger_name)
        self._mpc: MpcController | None = None
        if scenario.controller == ControllerKind.MPC:
            self._mpc = MpcController(
                scenario.mpc,
                fos_inc,
                fos_dec,
                scenario.actuator,
                scenario.epsilon,
                scenario.protection,
                logger_name,
            )
        self._fos = (fos_inc, fos_dec)
        self._log.info(
            f"BuildingHub initialized for scenario {scenario.name!r} ({scenario.controller}, {scenario.actuator}, "
            f"seed {scenario.seed}, output {out_dir if self._persist else 'in memory'})"
        )

    @property
    def scenario(self) -> ScenarioConfig:
        return self._scenario

    @property
    def plant(self) -> Plant:
        return self._plant

    @property
    def stores(self) -> dict[str, RecordStore]:
        """The run's stores by name (see :data:`STORE_NAMES`)."""
        return self._stores

    @property
    def logs(self) -> RunLogs:
        """In-memory history the nightly datasets are built from, pruned to the training window."""
        return self._logs

    @property
    def models(self) -> dict[Direction, MlpModel]:
        return dict(self._models)

    @property
    def active_feedbacks(self) -> tuple[SetpointFeedback, ...]:
        """Accepted setpoint requests that have not expired yet."""
        return tuple(self._feedbacks)

    @property
    def fos(self) -> tuple[FosParams, FosParams]:
        """Increasing and decreasing models currently in use."""
        return self._fos

    def error_callback(self, callback: Optional[Callable[[Exception, str, str], Any]]) -> None:
        """
        Set or update the error callback.

        Args:
            callback: New callback function or None to disable.
        """
        self._error_callback = callback

    def movement_callback(self, callback: Optional[Callable[[Any], Any]]) -> None:
        """
        Set or update the movement callback.

        Args:
            callback: New callback function or None to disable.
        """
        self._movement_callback = callback

    def run(self) -> None:
        """
        Run the whole scenario: the warm-up days under the clock controller, then the evaluation days.

        Writes ``run.json`` describing the run before the first day.

        Raises:
            ValidationError: If the plant leaves its physical limits.
        """
        scenario = self._scenario
        self._write_manifest()
        for day in scenario.all_days:
            self.run_day(day, warmup=day < scenario.start_date)
        self._log.info(
            f"Run {scenario.name!r} complete: {len(scenario.evaluation_days)} days after {scenario.warmup_days} "
            f"warm-up day(s)"
        )

    def run_day(self, day: date, warmup: bool = False) -> list[ControlDecision]:
        """
        Simulate one day from midnight to midnight.

        Args:
            day: The day to simulate. Days must be run in order.
            warmup: Run the clock controller and skip retraining and the model refresh.

        Returns:
            list[ControlDecision]: The day's decisions, one per sampling instant.
        """
        scenario = self._scenario
        sampling = scenario.mpc.sampling
        controller = self._controller_for(warmup)
        use_models = controller is self._mpc
        weather = self._weather_day(day)
        midnight = datetime.combine(day, time())

        decisions: list[ControlDecision] = []
        decision: ControlDecision | None = None
        for slot in range(_SLOTS_PER_DAY):
            minute = slot * SENSOR_PERIOD
            now = midnight + timedelta(minutes=minute)
            dist = weather[slot]

            if use_models and self._fixed_fos is None and minute == scenario.retrain_time:
                self._retrain(day)

            self._record_weather(now, dist)
            ait = self._collect_telemetry(now)
            if ait is not None:
                self._last_ait = ait
            self._deliver_feedback(now)

            if use_models and minute == scenario.edf_time:
                self._refresh_models(now, day)

            if minute % sampling == 0:
                self._expire_feedback(now)
                setpoint = effective_setpoint(
                    self._feedbacks,
                    now,
                    self._fos[0].tau,
                    scenario.mpc.comfort_band,
                    scenario.mpc.outlier_margin,
                )
                start, stop = scenario.active_window
                decision = controller.decide(now, ait, setpoint, idle=not start <= minute < stop)
                decisions.append(decision)
                movement = decision.to_movement(controller.kind)
                self._stores["mpc-movements"].append(movement.to_record())
                self._logs.movements.append(movement)
                if self._movement_callback:
                    self._movement_callback(movement)

            offset = minute % sampling
            for m in range(SENSOR_PERIOD):
                gain = decision.gain_at(offset + m)
                self._plant.step(AhuCommand(gain, scenario.actuator), dist, 1.0)

        self._prune_logs(day)
        self._weather.pop(day, None)
        self._log.info(
            f"Day {day} done ({'warm-up' if warmup else controller.kind}): "
            f"{sum(d.on_minutes for d in decisions):.0f} ON minutes, AIT {self._last_ait}"
        )
        return decisions

    # ------------------------------------------------------------------------------------------------------------------
    # Private Methods
    # ------------------------------------------------------------------------------------------------------------------

    def _controller_for(self, warmup: bool) -> AhuController:
        if warmup or self._mpc is None:
            return self._clock
        return self._mpc

    def _weather_day(self, day: date) -> WeatherDay:
        if day not in self._weather:
            scenario = self._scenario
            self._weather[day] = generate_weather(
                scenario.seed, day.toordinal(), scenario.climate, scenario.occupancy
            )
        return self._weather[day]

    def _record_weather(self, now: datetime, dist: Disturbances) -> None:
        record = WeatherRecord.from_disturbances(now, dist)
        self._stores["weather-db"].append(record.to_record())
        self._logs.weather.append(record)

    def _collect_telemetry(self, now: datetime) -> float | None:
        """Publish one sensor round, drain it from the bus and store readings and AIT."""
        for reading in sample_sensors(self._plant.state, now, self._scenario.seed, self._scenario.sensors):
            self._bus.publish(SENSOR_TOPIC, reading.to_record())
        readings = [SensorReading.from_record(m) for m in self._bus.drain(SENSOR_TOPIC)]
        self._stores["sensor-db"].append_many(r.to_record() for r in readings)
        record = aggregate_ait(readings)
        if record is None:
            self._log.warning(f"No AIT at {format_date(now)}")
            return None
        self._stores["ait-db"].append(record.to_record())
        self._logs.ait.append(record)
        return record.ait

    def _deliver_feedback(self, now: datetime) -> None:
        scenario = self._scenario
        while self._feedback_script and self._feedback_script[0].date <= now:
            feedback = self._feedback_script.pop(0)
            accepted = is_plausible(feedback, scenario.mpc.comfort_band, scenario.mpc.outlier_margin)
            if not accepted:
                self._log.info(f"Rejected emotional feedback {feedback.value} from {feedback.user_id}")
            else:
                self._feedbacks.append(feedback)
            self._stores["feedback-db"].append(feedback.to_record(accepted))

    def _expire_feedback(self, now: datetime) -> None:
        """Drop requests older than four time constants of the current increasing model. They never count again."""
        oldest = now - timedelta(minutes=4.0 * self._fos[0].tau)
        self._feedbacks = [f for f in self._feedbacks if f.date >= oldest]

    def _retrain(self, day: date) -> None:
        """Train both surrogates on the window ending yesterday. Failures keep the previous models."""
        scenario = self._scenario
        window_end = day - timedelta(days=1)
        window_start = window_end - timedelta(days=scenario.training_window_days - 1)
        try:
            splits = build_daily(
                window_end,
                self._logs,
                scenario.training_window_days,
                scenario.seed,
                scenario.mpc.sampling,
                scenario.actuator,
            )
        except ValidationError as e:
            self._report_error(e, f"building the dataset for {window_end}")
            return
        if self._persist:
            for direction, split in splits.items():
                split.combined().export_ndjson(self._out_dir / "datasets" / f"{direction}.jsonl")

        window = (window_start.isoformat(), window_end.isoformat())
        directions = list(Direction)
        jobs = [
            partial(train, splits[direction], scenario.surrogate, self._logger_name, window)
            for direction in directions
        ]
        results = self._runner.run_blocking_parallel(jobs)
        stamp = format_date(datetime.combine(day, time()) + timedelta(minutes=scenario.retrain_time))
        for direction, result in zip(directions, results):
            if isinstance(result, BaseException):
                self._report_error(result, f"training the {direction} surrogate")
                continue
            model, report = result
            self._models[direction] = model
            self._stores["training-metrics"].append(report.to_record(stamp))
            if self._persist:
                model.save(self._out_dir / "models" / f"{direction}.json")
        self._log.info(f"Nightly training for {day} finished with {sorted(self._models)} models available")

    def _refresh_models(self, now: datetime, day: date) -> None:
        """Derive today's first-order models from the EDF curves and hand them to the MPC."""
        scenario = self._scenario
        t_init = self._last_ait if self._last_ait is not None else self._plant.state.mean_temp
        previous = dict(zip(Direction, self._fos))
        fresh: dict[Direction, FosParams] = {}
        sources: dict[Direction, str] = {}

        if self._fixed_fos is not None:
            fresh = dict(zip(Direction, self._fixed_fos))
            sources = dict.fromkeys(Direction, "fixed")
        else:
            forecast = self._forecast(day)
            for direction in Direction:
                model = self._models.get(direction)
                if model is None:
                    fresh[direction] = replace(previous[direction], y_init=t_init)
                    sources[direction] = "fallback"
                    continue
                try:
                    curve = generate_edf(
                        model,
                        direction,
                        t_init,
                        self.MAX_GAIN,
                        forecast,
                        scenario.surrogate.edf_horizon,
                        scenario.surrogate.edf_step,
                    )
                    params = edf_to_fos(curve, previous[direction].theta)
                    if params.theta >= scenario.mpc.sampling:
                        raise ValidationError(f"Dead time {params.theta} does not fit the sampling time")
                    fresh[direction] = params
                    sources[direction] = "edf"
                except ValidationError as e:
                    self._report_error(e, f"extracting the {direction} model on {day}")
                    fresh[direction] = replace(previous[direction], y_init=t_init)
                    sources[direction] = "fallback"

        stamp = format_date(now)
        self._stores["fos-params"].append_many(
            {"date": stamp, "direction": str(d), **fresh[d].to_record(), "source": sources[d]} for d in Direction
        )
        self._fos = (fresh[Direction.INCREASING], fresh[Direction.DECREASING])
        self._mpc.set_models(*self._fos)
        self._log.info(f"Models refreshed for {day}: {sources[Direction.INCREASING]}/{sources[Direction.DECREASING]}")

    def _forecast(self, day: date) -> np.ndarray:
        """Weather from the EDF time today until the same time tomorrow."""
        slot = self._scenario.edf_time // SENSOR_PERIOD
        today = self._weather_day(day).features()
        tomorrow = self._weather_day(day + timedelta(days=1)).features()
        return np.vstack([today[slot:], tomorrow[:slot]])

    def _prune_logs(self, day: date) -> None:
        """Forget history that no future training window reaches."""
        keep = datetime.combine(day - timedelta(days=self._scenario.training_window_days - 1), time())
        cutoff = format_date(keep)
        logs = self._logs
        logs.movements = [m for m in logs.movements if m.date >= cutoff]
        logs.ait = [r for r in logs.ait if r.date >= cutoff]
        logs.weather = [r for r in logs.weather if r.date >= cutoff]

    def _report_error(self, exception: Exception, context: str) -> None:
        if self._error_callback:
            self._error_callback(exception, context, traceback.format_exc())
        self._log.warning(f"Error while {context}: {exception}, keeping the previous models")

    def _load_feedback(self, path: Path | None) -> list[SetpointFeedback]:
        if path is None:
            return []
        feedbacks = []
        with open(path, "r", encoding="utf-8") as f:
            for number, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    feedbacks.append(SetpointFeedback.from_record(json.loads(line)))
                except (ValueError, KeyError, ValidationError):
                    self._log.warning(f"Skipping malformed feedback line {number} of {path}")
        feedbacks.sort(key=lambda f: f.date)
        self._log.info(f"Loaded {len(feedbacks)} feedback record(s) from {path}")
        return feedbacks

    def _write_manifest(self) -> None:
        if not self._persist:
            return
        scenario = self._scenario
        occupancy = scenario.occupancy
        manifest = {
            "schema_version": SCHEMA_VERSION,
            "name": scenario.name,
            "controller": str(scenario.controller),
            "actuator": str(scenario.actuator),
            "seed": scenario.seed,
            "warmup_start": scenario.warmup_start.isoformat(),
            "start": scenario.start_date.isoformat(),
            "end": scenario.end_date.isoformat(),
            "sampling": scenario.mpc.sampling,
            "occupancy": {
                "start": occupancy.start,
                "stop": occupancy.stop,
                "level": occupancy.level,
                "workdays": list(occupancy.workdays),
            },
            "electrical": {
                "voltage": scenario.electrical.voltage,
                "current": scenario.electrical.current,
                "cos_phi": scenario.electrical.cos_phi,
            },
        }
        self._out_dir.mkdir(parents=True, exist_ok=True)
        (self._out_dir / "run.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")

    # ------------------------------------------------------------------------------------------------------------------
    # Shutdown
    # ------------------------------------------------------------------------------------------------------------------

    def shutdown(self) -> None:
        """
        Stop the background runner used for parallel training.

        Note:
            After calling shutdown(), the BuildingHub instance should not be reused.
        """
        self._log.info("Shutting down BuildingHub...")
        self._runner.shutdown()
        self._log.info("BuildingHub shutdown complete")
