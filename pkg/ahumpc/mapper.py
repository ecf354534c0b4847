"""
Nonlinear output mapping for ON/OFF AHUs.

The MPC computes a fractional input, but a binary AHU can only run or stand still. The mapping searches the whole
minutes ``t`` of the sampling interval for the ON time whose ON-then-OFF schedule ends at the temperature the
fractional input would have reached. Motor protection then rounds very short ON or OFF periods away.

This module provides:

- :class:`OnTime`: result of the search
- :class:`ProtectionPolicy` and :func:`apply_protection`
- :func:`map_to_on_time` and :func:`analog_on_minutes`

Example:
    ::

        result = map_to_on_time(0.5, fos_inc, fos_dec, t_init=20.0, sampling=30, epsilon=0.05)
        on_minutes = apply_protection(result.t_star, ProtectionPolicy(threshold=5.0), sampling=30)
"""

import math
from dataclasses import dataclass

from .ahu_data import CONTROL_SAMPLING, FosParams, ValidationError
from .fos import end_temperature

#: Default tolerance between mapped and fractional end temperatures in °C.
EPSILON = 0.05


@dataclass(frozen=True)
class OnTime:
    """
    Result of :func:`map_to_on_time`.

    Attributes:
        t_star: ON minutes at the start of the interval.
        exact: False when no candidate met the tolerance and the closest one was taken.
        target: End temperature of the fractional input in °C.
        end_temperature: End temperature of the mapped ON/OFF schedule in °C.
    """

    t_star: int
    exact: bool
    target: float
    end_temperature: float


@dataclass(frozen=True)
class ProtectionPolicy:
    """
    Minimum ON and OFF durations protecting the AHU motor.

    Attributes:
        threshold: ON (or OFF) periods of at most this many minutes are rounded away. None disables protection.
    """

    threshold: float | None = 5.0

    def validate(self, sampling: float) -> None:
        if self.threshold is not None and not 0 <= self.threshold <= sampling / 2:
            raise ValidationError(f"Protection threshold must be within [0, {sampling / 2}], got {self.threshold}")


def map_to_on_time(
    u_k: float,
    fos_inc: FosParams,
    fos_dec: FosParams,
    t_init: float,
    sampling: int = CONTROL_SAMPLING,
    epsilon: float = EPSILON,
) -> OnTime:
    """
    Convert a fractional input into an ON duration within one sampling interval.

    The target is the temperature the increasing response reaches after ``sampling`` minutes at gain ``u_k``. The
    candidates ``t = 1 .. sampling`` run the increasing response for ``t`` minutes and the decreasing one for the
    rest, each leg with its own dead time. The first candidate ending within ``epsilon`` of the target wins.

    Args:
        u_k: Fractional input in [0, 1].
        fos_inc: Increasing response parameters. ``y_init`` is ignored.
        fos_dec: Decreasing response parameters. ``y_init`` is ignored.
        t_init: AIT at the start of the interval in °C.
        sampling: Interval length in whole minutes.
        epsilon: Tolerance in °C.

    Returns:
        OnTime: ``t_star = 0`` for ``u_k = 0`` or a target below the all-OFF end temperature, ``t_star = sampling``
        for ``u_k = 1``, otherwise the first candidate within tolerance. If none is within tolerance, the closest
        candidate is returned with ``exact = False``.

    Raises:
        ValidationError: If ``u_k`` leaves [0, 1], ``epsilon`` is not positive or ``sampling`` is not a positive
            whole number.
    """
    if not math.isfinite(u_k) or not 0.0 <= u_k <= 1.0:
        raise ValidationError(f"u_k must be within [0, 1], got {u_k}")
    if not epsilon > 0:
        raise ValidationError(f"epsilon must be positive, got {epsilon}")
    if sampling < 1 or int(sampling) != sampling:
        raise ValidationError(f"sampling must be a positive whole number of minutes, got {sampling}")
    sampling = int(sampling)

    target = end_temperature(fos_inc, fos_dec, [(sampling, u_k)], t_init) if u_k > 0 else t_init
    all_off = end_temperature(fos_inc, fos_dec, [(sampling, 0.0)], t_init)
    if u_k <= 0 or target <= all_off:
        return OnTime(0, True, target, all_off)
    if u_k >= 1:
        return OnTime(sampling, True, target, target)

    best_t, best_gap, best_end = 0, math.inf, all_off
    for t in range(1, sampling + 1):
        end = end_temperature(fos_inc, fos_dec, [(t, 1.0), (sampling - t, 0.0)], t_init)
        gap = abs(end - target)
        if gap <= epsilon:
            return OnTime(t, True, target, end)
        if gap < best_gap:
            best_t, best_gap, best_end = t, gap, end
    return OnTime(best_t, False, target, best_end)


def apply_protection(t_star: float, policy: ProtectionPolicy, sampling: int = CONTROL_SAMPLING) -> float:
    """
    Round short ON and short OFF periods away.

    Example::

        apply_protection(3, ProtectionPolicy(5.0), 30)   # 0
        apply_protection(27, ProtectionPolicy(5.0), 30)  # 30
        apply_protection(15, ProtectionPolicy(5.0), 30)  # 15

    Raises:
        ValidationError: If ``t_star`` leaves [0, sampling] or the threshold exceeds half the interval.
    """
    if not 0 <= t_star <= sampling:
        raise ValidationError(f"t_star must be within [0, {sampling}], got {t_star}")
    policy.validate(sampling)
    if policy.threshold is None:
        return t_star
    if t_star <= policy.threshold:
        return 0
    if sampling - t_star <= policy.threshold:
        return sampling
    return t_star


def analog_on_minutes(u_k: float, sampling: int = CONTROL_SAMPLING) -> float:
    """Energy-equivalent ON minutes of an analog AHU running at gain ``u_k`` for the whole interval."""
    if not 0.0 <= u_k <= 1.0:
        raise ValidationError(f"u_k must be within [0, 1], got {u_k}")
    return u_k * sampling
