"""
Constrained setpoint-tracking MPC.

The internal model is the increasing first-order response of the day, discretized exactly over one sampling interval
with the dead time split inside it. Over a horizon of ``p`` steps the controller minimizes::

    J(U) = w_y * sum_k (x_k - r_k)^2 + w_u * sum_k (u_k - u_{k-1})^2      subject to 0 <= u_k <= 1

in deviation coordinates ``x = AIT - y_base``. Because the model is scalar and linear, the problem condenses to a
box-constrained quadratic program in ``U`` that an active-set projected Newton method solves exactly.

This module provides:

- :class:`MpcConfig`, :class:`SetpointFeedback`, :class:`InternalModel` and :class:`ControlPlan`
- :func:`effective_setpoint` (occupant feedback with outlier rejection)
- :func:`discretize_internal_model`, :func:`objective` and :func:`solve`

Example:
    ::

        model = discretize_internal_model(fos_inc, sampling=30)
        setpoint = effective_setpoint(feedbacks, now, fos_inc.tau)
        plan = solve(ait - fos_inc.y_init, np.full(48, setpoint - fos_inc.y_init), MpcConfig(), model)
        plan.u[0]  # action for the next interval
"""

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from logging import getLogger
from typing import Any, Iterable

import numpy as np

from .ahu_data import (
    COMFORT_BAND,
    CONTROL_SAMPLING,
    FosParams,
    SolverError,
    ValidationError,
)
from .telemetry import format_date, parse_date

_log = getLogger(__name__)

#: Solvers accepted by :attr:`MpcConfig.solver`.
SOLVERS = ("newton", "gradient")


@dataclass(frozen=True)
class MpcConfig:
    """
    Controller settings.

    Attributes:
        horizon: Prediction horizon ``p`` in steps.
        sampling: Minutes between two decisions.
        u_min: Lower input bound.
        u_max: Upper input bound.
        tracking_weight: Weight of the setpoint tracking term.
        move_weight: Weight of the move suppression term.
        comfort_band: Comfort band in °C. Its midpoint is the default setpoint.
        outlier_margin: Feedback further than this outside the comfort band is rejected, in °C.
        idle_offset: Distance in °C the idle-mode setpoint is held below the free response.
        solver: ``"newton"`` (active-set projected Newton) or ``"gradient"`` (projected gradient).
        max_iterations: Iteration cap of the solver.
        tolerance: KKT residual at which the solver stops.
        offset_free: Estimate an additive model disturbance from the last prediction error.
        disturbance_gain: Filter gain of that estimate.
    """

    horizon: int = 48
    sampling: int = CONTROL_SAMPLING
    u_min: float = 0.0
    u_max: float = 1.0
    tracking_weight: float = 1.0
    move_weight: float = 1.0
    comfort_band: tuple[float, float] = COMFORT_BAND
    outlier_margin: float = 4.0
    idle_offset: float = 5.0
    solver: str = "newton"
    max_iterations: int = 500
    tolerance: float = 1e-6
    offset_free: bool = True
    disturbance_gain: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "comfort_band", tuple(self.comfort_band))
        if self.horizon < 1:
            raise ValidationError(f"horizon must be at least 1, got {self.horizon}")
        if self.sampling <= 0:
            raise ValidationError(f"sampling must be positive, got {self.sampling}")
        if not self.u_min < self.u_max:
            raise ValidationError("u_min must be below u_max")
        if self.tracking_weight < 0 or self.move_weight < 0:
            raise ValidationError("Weights must not be negative")
        if self.tracking_weight == 0 and self.move_weight == 0:
            raise ValidationError("At least one of tracking_weight and move_weight must be positive")
        low, high = self.comfort_band
        if not low <= high:
            raise ValidationError("The comfort band must not be inverted")
        if self.solver not in SOLVERS:
            raise ValidationError(f"Unknown solver {self.solver!r}, expected one of {SOLVERS}")
        if self.max_iterations < 1 or self.tolerance <= 0:
            raise ValidationError("max_iterations and tolerance must be positive")
        if not 0.0 <= self.disturbance_gain <= 1.0:
            raise ValidationError("disturbance_gain must be within [0, 1]")

    @property
    def default_setpoint(self) -> float:
        return 0.5 * (self.comfort_band[0] + self.comfort_band[1])


@dataclass(frozen=True)
class SetpointFeedback:
    """A setpoint request of one occupant."""

    user_id: str
    value: float
    date: datetime

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValidationError(f"Feedback value must be finite, got {self.value}")

    def to_record(self, accepted: bool | None = None) -> dict[str, Any]:
        record = {"user_id": self.user_id, "value": self.value, "date": format_date(self.date)}
        if accepted is not None:
            record["accepted"] = accepted
        return record

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "SetpointFeedback":
        return cls(str(record["user_id"]), float(record["value"]), parse_date(record["date"]))


def is_plausible(
    feedback: SetpointFeedback, comfort_band: tuple[float, float] = COMFORT_BAND, margin: float = 4.0
) -> bool:
    """False for emotional feedback, i.e. values more than ``margin`` °C outside the comfort band."""
    return comfort_band[0] - margin <= feedback.value <= comfort_band[1] + margin


def effective_setpoint(
    feedbacks: Iterable[SetpointFeedback],
    now: datetime,
    tau_inc: float,
    comfort_band: tuple[float, float] = COMFORT_BAND,
    outlier_margin: float = 4.0,
) -> float:
    """
    Average the occupants' valid setpoint requests.

    A request stays valid for four time constants of the increasing response. Emotional feedback (outside the comfort
    band widened by ``outlier_margin``) is ignored.

    Args:
        feedbacks: Requests received so far. Requests dated after ``now`` are ignored.
        now: Decision time.
        tau_inc: Time constant of the increasing response in minutes.
        comfort_band: Comfort band in °C.
        outlier_margin: Tolerance around the comfort band in °C.

    Returns:
        float: Mean of the valid requests, or the comfort band midpoint (22.5 °C by default) if none is valid.

    Raises:
        ValidationError: If ``tau_inc`` is not positive.

    Example::

        effective_setpoint([SetpointFeedback("a", 22.0, now), SetpointFeedback("b", 45.0, now)], now, 60.0)  # 22.0
    """
    if not tau_inc > 0:
        raise ValidationError(f"tau_inc must be positive, got {tau_inc}")
    oldest = now - timedelta(minutes=4.0 * tau_inc)
    values = [
        f.value
        for f in feedbacks
        if oldest <= f.date <= now and is_plausible(f, comfort_band, outlier_margin)
    ]
    if not values:
        return 0.5 * (comfort_band[0] + comfort_band[1])
    return math.fsum(values) / len(values)


@dataclass(frozen=True)
class InternalModel:
    """
    One-step map ``x' = a * x + b_prev * u_prev + b_now * u + w`` of the deviation state.

    ``b_prev`` carries the previous input through the dead time at the start of the interval, ``b_now`` the new
    input for the rest of it.
    """

    a: float
    b_prev: float
    b_now: float
    sampling: float = CONTROL_SAMPLING

    def step(self, x: float, u_prev: float, u: float, w: float = 0.0) -> float:
        return self.a * x + self.b_prev * u_prev + self.b_now * u + w

    @property
    def gain(self) -> float:
        """Steady-state deviation under a constant unit input."""
        return (self.b_prev + self.b_now) / (1.0 - self.a)


def discretize_internal_model(fos_inc: FosParams, sampling: float = CONTROL_SAMPLING) -> InternalModel:
    """
    Exact zero-order-hold discretization of the increasing response over one sampling interval.

    The state obeys ``dx/dt = (kp * u(t - theta) - x) / tau``. Within an interval the previous input still acts for
    ``theta`` minutes and the new one for the remaining ``sampling - theta``, which gives::

        a      = exp(-sampling / tau)
        b_prev = kp * (exp(-(sampling - theta) / tau) - a)
        b_now  = kp * (1 - exp(-(sampling - theta) / tau))

    Raises:
        ValidationError: If ``theta >= sampling``.

    Example::

        discretize_internal_model(FosParams(kp=2.0, tau=60.0, theta=0.0), 30).a  # exp(-0.5) ~ 0.6065
    """
    if not sampling > fos_inc.theta:
        raise ValidationError(f"Dead time {fos_inc.theta} must be shorter than the sampling time {sampling}")
    a = math.exp(-sampling / fos_inc.tau)
    late = math.exp(-(sampling - fos_inc.theta) / fos_inc.tau)
    return InternalModel(
        a=a,
        b_prev=fos_inc.kp * (late - a),
        b_now=fos_inc.kp * -math.expm1(-(sampling - fos_inc.theta) / fos_inc.tau),
        sampling=sampling,
    )


@dataclass(frozen=True, eq=False)
class ControlPlan:
    """
    Result of one MPC solve.

    Attributes:
        u: Optimal inputs over the horizon, each within the input bounds.
        predicted: Internal-model rollout of the deviation state under ``u`` (``x_1 .. x_p``).
        objective: Objective value at ``u``.
        iterations: Solver iterations used.
        converged: Whether the KKT residual reached the tolerance.
        objective_history: Objective value after every iteration, starting with the initial point.
    """

    u: np.ndarray
    predicted: np.ndarray
    objective: float
    iterations: int
    converged: bool = True
    objective_history: tuple[float, ...] = field(default_factory=tuple)


@dataclass(frozen=True, eq=False)
class _Condensed:
    G: np.ndarray
    free: np.ndarray
    D: np.ndarray
    e: np.ndarray


def _condense(
    x0: float, model: InternalModel, horizon: int, u_prev: float, disturbance: float
) -> _Condensed:
    """Write the rollout as ``x = free + G @ U`` and the moves as ``D @ U - e``."""
    k = np.arange(horizon)
    powers = model.a ** np.arange(horizon + 1)
    # x_{k+1} = a^{k+1} x0 + a^k b_prev u_prev + w (1 + ... + a^k) + sum_j G[k, j] u_j
    free = powers[1:] * x0 + powers[:-1] * model.b_prev * u_prev + disturbance * np.cumsum(powers[:-1])
    lag = k[:, None] - k[None, :]
    G = np.where(lag >= 0, model.b_now * model.a ** np.maximum(lag, 0), 0.0)
    G += np.where(lag >= 1, model.b_prev * model.a ** np.maximum(lag - 1, 0), 0.0)
    D = np.eye(horizon) - np.eye(horizon, k=-1)
    e = np.zeros(horizon)
    e[0] = u_prev
    return _Condensed(G, free, D, e)


def objective(
    U: np.ndarray,
    x0: float,
    y_sp: np.ndarray,
    config: MpcConfig,
    model: InternalModel,
    u_prev: float = 0.0,
    disturbance: float = 0.0,
) -> float:
    """Value of the tracking plus move-suppression objective for the input sequence ``U``."""
    U = np.asarray(U, dtype=float)
    condensed = _condense(x0, model, U.size, u_prev, disturbance)
    tracking = condensed.free + condensed.G @ U - np.asarray(y_sp, dtype=float)
    moves = condensed.D @ U - condensed.e
    return float(config.tracking_weight * tracking @ tracking + config.move_weight * moves @ moves)


def solve(
    x0: float,
    y_sp: np.ndarray,
    config: MpcConfig,
    model: InternalModel,
    u_prev: float = 0.0,
    warm_start: np.ndarray | None = None,
    disturbance: float = 0.0,
) -> ControlPlan:
    """
    Minimize the MPC objective over the horizon subject to the input bounds.

    Each iteration moves along the Newton direction of the variables not held at a bound (or along the projected
    gradient when that is not a descent direction), with an exact line search capped at the first bound it hits. The
    objective therefore never increases. Iteration stops when ``max |U - clip(U - grad)|`` drops below the tolerance.

    Args:
        x0: Current deviation state.
        y_sp: Setpoint trajectory in deviation coordinates, length ``config.horizon``.
        config: Controller settings.
        model: Internal model.
        u_prev: Input applied during the interval that just ended.
        warm_start: Initial guess, e.g. the tail of the previous plan. Clipped to the bounds.
        disturbance: Additive per-step model disturbance.

    Returns:
        ControlPlan: Optimal inputs and predicted deviation trajectory.

    Raises:
        ValidationError: If ``y_sp`` has the wrong length or a value is non-finite.
        SolverError: If the tolerance is not reached within ``config.max_iterations``. The error carries the best
            iterate as ``best_plan``.
    """
    p = config.horizon
    y_sp = np.asarray(y_sp, dtype=float).reshape(-1)
    if y_sp.size != p:
        raise ValidationError(f"Setpoint trajectory needs {p} values, got {y_sp.size}")
    values = [x0, u_prev, disturbance, model.a, model.b_prev, model.b_now]
    if not (all(math.isfinite(v) for v in values) and np.all(np.isfinite(y_sp))):
        raise ValidationError("MPC inputs must be finite")

    lower, upper = config.u_min, config.u_max
    condensed = _condense(x0, model, p, u_prev, disturbance)
    G, D = condensed.G, condensed.D
    r = y_sp - condensed.free
    Q = 2.0 * (config.tracking_weight * G.T @ G + config.move_weight * D.T @ D)
    c = -2.0 * (config.tracking_weight * G.T @ r + config.move_weight * D.T @ condensed.e)
    constant = config.tracking_weight * r @ r + config.move_weight * condensed.e @ condensed.e

    def value(U: np.ndarray) -> float:
        return float(0.5 * U @ Q @ U + c @ U + constant)

    if warm_start is not None and np.size(warm_start) == p:
        U = np.clip(np.asarray(warm_start, dtype=float), lower, upper)
    else:
        U = np.full(p, lower)
    history = [value(U)]
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iterations + 1):
        grad = Q @ U + c
        residual = float(np.max(np.abs(U - np.clip(U - grad, lower, upper))))
        if residual < config.tolerance:
            converged = True
            iterations -= 1
            break
        clamped = ((U <= lower) & (grad > 0)) | ((U >= upper) & (grad < 0))
        free = ~clamped
        direction = _newton_direction(Q, grad, free) if config.solver == "newton" else None
        step_cap = _step_cap(U, direction, lower, upper) if direction is not None else 0.0
        if direction is None or grad @ direction >= 0 or step_cap <= 1e-12:
            direction = np.where(free, -grad, 0.0)
            step_cap = _step_cap(U, direction, lower, upper)
        curvature = float(direction @ Q @ direction)
        slope = float(grad @ direction)
        step = -slope / curvature if curvature > 1e-15 else math.inf
        step = min(step, step_cap)
        if not math.isfinite(step) or step <= 0:
            break
        U = _snap(np.clip(U + step * direction, lower, upper), lower, upper)
        history.append(value(U))

    predicted = condensed.free + G @ U
    plan = ControlPlan(U, predicted, history[-1], iterations, converged, tuple(history))
    if not converged:
        raise SolverError(
            f"MPC solver stopped after {iterations} iterations above tolerance {config.tolerance}",
            best_plan=plan,
        )
    _log.debug(f"MPC solved in {iterations} iterations, objective {plan.objective:.6f}")
    return plan


def _newton_direction(Q: np.ndarray, grad: np.ndarray, free: np.ndarray) -> np.ndarray | None:
    if not np.any(free):
        return None
    direction = np.zeros_like(grad)
    try:
        direction[free] = -np.linalg.solve(Q[np.ix_(free, free)], grad[free])
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(direction)):
        return None
    return direction


def _snap(U: np.ndarray, lower: float, upper: float) -> np.ndarray:
    # steps capped at a bound must land on it exactly, or the variable never counts as clamped
    U[np.abs(U - lower) < 1e-12] = lower
    U[np.abs(U - upper) < 1e-12] = upper
    return U


def _step_cap(U: np.ndarray, direction: np.ndarray, lower: float, upper: float) -> float:
    """Largest step along ``direction`` that keeps ``U`` inside the bounds."""
    caps = [math.inf]
    up = direction > 1e-15
    down = direction < -1e-15
    if np.any(up):
        caps.append(float(np.min((upper - U[up]) / direction[up])))
    if np.any(down):
        caps.append(float(np.min((lower - U[down]) / direction[down])))
    return max(min(caps), 0.0)
