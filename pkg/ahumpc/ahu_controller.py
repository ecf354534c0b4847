"""
Controllers deciding the AHU command every sampling interval.

A controller turns the latest AIT and setpoint into a :class:`ControlDecision`: the logged control action plus the
gain pattern the AHU follows until the next decision. When no AIT is available the previous decision is held.

This module provides:

- :class:`ControlDecision`: one decision and its gain pattern
- :class:`AhuController`: Abstract base class defining the controller interface
- :class:`ClockController`: the fixed-window manual baseline
- :class:`MpcController`: MPC solve, nonlinear output mapping and motor protection

Note:
    You don't need to drive controllers yourself. :class:`BuildingHub` creates one for a run and calls
    :meth:`AhuController.decide` on the control grid.
"""

import traceback
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from datetime import datetime
from logging import getLogger
from typing import Sequence

import numpy as np

from .ahu_data import ActuatorMode, ControllerKind, FosParams, SolverError
from .mapper import (
    EPSILON,
    ProtectionPolicy,
    analog_on_minutes,
    apply_protection,
    map_to_on_time,
)
from .mpc import ControlPlan, MpcConfig, discretize_internal_model, solve
from .plant import validate_windows
from .telemetry import MpcMovement, format_date


@dataclass(frozen=True, eq=False)
class ControlDecision:
    """
    One control decision.

    Attributes:
        date: Decision time.
        ait: AIT the decision is based on in °C (the last known AIT for held decisions).
        setpoint: Setpoint in force in °C.
        u: Control action in [0, 1].
        on_minutes: Minutes the AHU runs during the interval.
        pattern: ``(minutes, gain)`` segments covering the interval in order.
        held: True if the previous decision was repeated for lack of an AIT.
        exact: False if the output mapping missed its tolerance.
        plan: MPC plan behind the decision, if any.
    """

    date: datetime
    ait: float
    setpoint: float
    u: float
    on_minutes: float
    pattern: tuple[tuple[float, float], ...]
    held: bool = False
    exact: bool = True
    plan: ControlPlan | None = None

    def gain_at(self, minute: float) -> float:
        """
        AHU gain ``minute`` minutes into the interval.

        Returns the last segment's gain past the end of the pattern.
        """
        elapsed = 0.0
        for duration, gain in self.pattern:
            if minute < elapsed + duration:
                return gain
            elapsed += duration
        return self.pattern[-1][1] if self.pattern else 0.0

    def to_movement(self, controller: ControllerKind) -> MpcMovement:
        return MpcMovement(
            format_date(self.date),
            round(float(self.ait), 4),
            round(float(self.setpoint), 4),
            round(float(self.u), 6),
            round(float(self.on_minutes), 4),
            controller,
        )


def on_off_pattern(on_minutes: float, sampling: float) -> tuple[tuple[float, float], ...]:
    """ON for ``on_minutes`` from the start of the interval, OFF for the rest."""
    segments = ((on_minutes, 1.0), (sampling - on_minutes, 0.0))
    return tuple(s for s in segments if s[0] > 0)


class AhuController(ABC):
    """
    Abstract base class for AHU controllers.

    Holds the previous decision and repeats it when a decision is requested without an AIT.

    Args:
        sampling: Minutes between two decisions.
        mode: Actuator mode of the AHU.
        logger_name: Name of the logger to use. Use empty string for root logger.

    Example::

        controller = ClockController([(6 * 60, 21 * 60)], sampling=30, logger_name="ahumpc")
        decision = controller.decide(datetime(2023, 1, 2, 7, 0), ait=19.5, setpoint=22.5)
        decision.on_minutes  # 30
    """

    def __init__(self, sampling: int, mode: ActuatorMode, logger_name: str):
        self._sampling = sampling
        self._mode = ActuatorMode(mode)
        self._log = getLogger(logger_name)
        self._last_decision: ControlDecision | None = None

    @property
    @abstractmethod
    def kind(self) -> ControllerKind:
        """Controller kind written to the movement log."""
        raise NotImplementedError

    @property
    def sampling(self) -> int:
        return self._sampling

    @property
    def mode(self) -> ActuatorMode:
        return self._mode

    @property
    def last_decision(self) -> ControlDecision | None:
        return self._last_decision

    def decide(
        self, now: datetime, ait: float | None, setpoint: float, idle: bool = False
    ) -> ControlDecision:
        """
        Decide the command for the interval starting at ``now``.

        Args:
            now: Decision time on the control grid.
            ait: Latest AIT, or None when no sensor reported.
            setpoint: Occupant setpoint in force.
            idle: True outside the active period. The MPC then drives the AIT down instead of tracking.

        Returns:
            ControlDecision: The new decision, or the previous one re-dated to ``now`` (``held=True``) when ``ait`` is
            None.
        """
        if ait is None and self._needs_ait:
            if self._last_decision is None:
                self._log.warning(f"No AIT at {format_date(now)} and no previous decision, AHU stays off")
                decision = ControlDecision(now, setpoint, setpoint, 0.0, 0.0, ((self._sampling, 0.0),), held=True)
            else:
                self._log.warning(f"No AIT at {format_date(now)}, holding the previous command")
                decision = replace(self._last_decision, date=now, held=True)
        else:
            if ait is None:
                ait = self._last_decision.ait if self._last_decision else setpoint
            decision = self._decide(now, ait, setpoint, idle)
        self._last_decision = decision
        return decision

    @property
    def _needs_ait(self) -> bool:
        return True

    @abstractmethod
    def _decide(self, now: datetime, ait: float, setpoint: float, idle: bool) -> ControlDecision:
        raise NotImplementedError


class ClockController(AhuController):
    """
    Manual timer: the AHU runs at full gain inside fixed daily windows, whatever the AIT.

    Args:
        windows: ``(start, stop)`` minutes after midnight, non-overlapping.
        sampling: Minutes between two decisions.
        logger_name: Name of the logger to use. Use empty string for root logger.

    Raises:
        ValidationError: If the windows overlap or leave the day.
    """

    def __init__(self, windows: Sequence[tuple[int, int]], sampling: int, logger_name: str):
        super().__init__(sampling, ActuatorMode.BINARY, logger_name)
        self._windows = validate_windows(windows)
        self._log.info(f"ClockController initialized with windows {self._windows}")

    @property
    def kind(self) -> ControllerKind:
        return ControllerKind.MANUAL

    @property
    def _needs_ait(self) -> bool:
        return False

    def _decide(self, now: datetime, ait: float, setpoint: float, idle: bool) -> ControlDecision:
        start = now.hour * 60 + now.minute
        minutes = np.arange(start, start + self._sampling) % 1440
        on = np.zeros(self._sampling, dtype=bool)
        for window_start, window_stop in self._windows:
            on |= (minutes >= window_start) & (minutes < window_stop)
        pattern: list[tuple[float, float]] = []
        for state in on:
            gain = 1.0 if state else 0.0
            if pattern and pattern[-1][1] == gain:
                pattern[-1] = (pattern[-1][0] + 1, gain)
            else:
                pattern.append((1, gain))
        on_minutes = float(np.count_nonzero(on))
        return ControlDecision(
            now, ait, setpoint, on_minutes / self._sampling, on_minutes, tuple(pattern)
        )


class MpcController(AhuController):
    """
    Model predictive controller for the AHU.

    Every decision solves the MPC problem on the day's internal model. In binary mode the first fractional action is
    mapped to an ON time and rounded by the protection policy, in analog mode it is applied directly. Outside the
    active period the setpoint is forced below the predicted free response, so the solver returns zero.

    Args:
        config: MPC settings.
        fos_inc: Increasing response of the day. ``y_init`` is the base of the deviation state.
        fos_dec: Decreasing response of the day, used by the output mapping.
        mode: Actuator mode of the AHU.
        epsilon: Tolerance of the output mapping in °C.
        protection: Motor protection policy.
        logger_name: Name of the logger to use. Use empty string for root logger.

    Example::

        controller = MpcController(MpcConfig(), fos_inc, fos_dec, ActuatorMode.BINARY, logger_name="ahumpc")
        decision = controller.decide(datetime(2023, 1, 2, 6, 30), ait=19.2, setpoint=22.5)
        decision.pattern  # ((t_on, 1.0), (30 - t_on, 0.0))
    """

    def __init__(
        self,
        config: MpcConfig,
        fos_inc: FosParams,
        fos_dec: FosParams,
        mode: ActuatorMode = ActuatorMode.BINARY,
        epsilon: float = EPSILON,
        protection: ProtectionPolicy | None = None,
        logger_name: str = "",
    ):
        super().__init__(config.sampling, mode, logger_name)
        self._config = config
        self._epsilon = epsilon
        self._protection = protection or ProtectionPolicy()
        self._protection.validate(config.sampling)
        self._u_prev = 0.0
        self.set_models(fos_inc, fos_dec)
        self._log.info(f"MpcController initialized (horizon {config.horizon}, {self._mode} actuator)")

    @property
    def kind(self) -> ControllerKind:
        return ControllerKind.MPC

    @property
    def fos_inc(self) -> FosParams:
        return self._fos_inc

    @property
    def fos_dec(self) -> FosParams:
        return self._fos_dec

    @property
    def disturbance(self) -> float:
        """Current estimate of the additive model disturbance."""
        return self._w

    @property
    def predicted_ait(self) -> float | None:
        """AIT the internal model expects at the next decision, given the input actually applied."""
        if self._expected is None:
            return None
        return self._y_base + self._expected

    def set_models(self, fos_inc: FosParams, fos_dec: FosParams) -> None:
        """
        Install the day's first-order models.

        Resets the disturbance estimate and the warm start, since both belong to the previous model.
        """
        self._fos_inc = fos_inc
        self._fos_dec = fos_dec
        self._model = discretize_internal_model(fos_inc, self._config.sampling)
        self._y_base = fos_inc.y_init
        self._w = 0.0
        self._expected: float | None = None
        self._warm: np.ndarray | None = None
        self._log.info(
            f"Internal model set: kp={fos_inc.kp:.3f} tau={fos_inc.tau:.1f} theta={fos_inc.theta} "
            f"base={fos_inc.y_init:.2f} (decreasing kp={fos_dec.kp:.3f} tau={fos_dec.tau:.1f})"
        )

    # ------------------------------------------------------------------------------------------------------------------
    # Private Methods
    # ------------------------------------------------------------------------------------------------------------------

    def _decide(self, now: datetime, ait: float, setpoint: float, idle: bool) -> ControlDecision:
        config = self._config
        x = ait - self._y_base
        if config.offset_free and self._expected is not None:
            self._w += config.disturbance_gain * (x - self._expected)

        if idle:
            free = self._free_response(x)
            y_sp = free - config.idle_offset
            setpoint = ait - config.idle_offset
        else:
            y_sp = np.full(config.horizon, setpoint - self._y_base)

        w = self._w if config.offset_free else 0.0
        try:
            plan = solve(x, y_sp, config, self._model, self._u_prev, self._warm, w)
        except SolverError as e:
            self._log.warning(f"{e}, applying the best iterate. Details: {traceback.format_exc()}")
            plan = e.best_plan
        self._log.debug(
            f"{format_date(now)}: {plan.iterations} iterations ({'warm' if self._warm is not None else 'cold'} start)"
        )

        u = round(float(np.clip(plan.u[0], 0.0, 1.0)), 6)
        if self._mode == ActuatorMode.ANALOG:
            on_minutes = analog_on_minutes(u, config.sampling)
            pattern = ((config.sampling, u),)
            exact = True
        else:
            mapped = map_to_on_time(u, self._fos_inc, self._fos_dec, ait, config.sampling, self._epsilon)
            on_minutes = float(apply_protection(mapped.t_star, self._protection, config.sampling))
            pattern = on_off_pattern(on_minutes, config.sampling)
            exact = mapped.exact
            if not exact:
                self._log.debug(f"{format_date(now)}: inexact mapping of u={u:.4f} to {mapped.t_star} min")

        applied = u if self._mode == ActuatorMode.ANALOG else on_minutes / config.sampling
        self._expected = self._model.step(x, self._u_prev, applied, w)
        self._u_prev = applied
        self._warm = np.append(plan.u[1:], plan.u[-1])
        return ControlDecision(now, ait, setpoint, u, on_minutes, pattern, exact=exact, plan=plan)

    def _free_response(self, x: float) -> np.ndarray:
        """Predicted deviation over the horizon with the AHU kept off."""
        w = self._w if self._config.offset_free else 0.0
        values = []
        u_prev = self._u_prev
        for _ in range(self._config.horizon):
            x = self._model.step(x, u_prev, 0.0, w)
            u_prev = 0.0
            values.append(x)
        return np.array(values)
