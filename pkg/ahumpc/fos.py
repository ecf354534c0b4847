"""
First-order system with dead time: evaluation, piecewise simulation and parameter extraction.

The response is used in deviation form about the initial temperature::

    y(t) = y_init                                          for t < theta
    y(t) = y_init + u * kp * (1 - exp(-(t - theta) / tau))  for t >= theta

Every function here is pure and works on immutable inputs, so they can be called from any thread.

Example:
    ::

        params = FosParams(kp=5.0, tau=60.0, theta=13.0, y_init=20.0)
        step_response(params, u=1.0, t=73.0)  # ~23.16, 63% of the span one tau after the delay

        curve = simulate_schedule(params, cooling, [(30, 1.0), (30, 0.0)], y_start=20.0, resolution=1.0)
        extract_params(curve, Direction.INCREASING, delay=13.0)
"""

import math
from dataclasses import replace
from logging import getLogger
from typing import Sequence

import numpy as np

from .ahu_data import (
    Direction,
    FosParams,
    TemperatureTrace,
    UnsettledCurveError,
    ValidationError,
)

_log = getLogger(__name__)

#: Share of the trailing samples averaged into the final plateau (and used for the settledness test).
PLATEAU_SHARE = 0.05

#: Temperature drop (°C) tolerated against the stated direction before a curve counts as non-monotone.
MONOTONIC_TOLERANCE = 0.05

#: Largest change across the plateau window, relative to the span, for a curve to count as settled.
SETTLED_SHARE = 0.02

#: Share of the span whose crossing time defines the time constant.
CROSSING_SHARE = 0.98

# time to 98% of a first-order span is ln(50) time constants (~3.91)
_CROSSING_TAUS = -math.log(1.0 - CROSSING_SHARE)


def step_response(
    params: FosParams, u: float, t: float | np.ndarray
) -> float | np.ndarray:
    """
    Evaluate the response to an input gain ``u`` switched on at ``t = 0``.

    Args:
        params: Model parameters. ``params.y_init`` is the temperature at ``t = 0``.
        u: Input gain in [0, 1].
        t: Minutes since the input change. Scalars return a float, arrays return an array of the same shape.

    Returns:
        float | np.ndarray: Temperature in °C.

    Raises:
        ValidationError: If ``u`` lies outside [0, 1], or any input is non-finite or negative time is requested.

    Example::

        params = FosParams(kp=5.0, tau=60.0, theta=0.0, y_init=0.0)
        step_response(params, 1.0, 240.0)  # 4.9084
    """
    if not math.isfinite(u) or not 0.0 <= u <= 1.0:
        raise ValidationError(f"Input gain must be within [0, 1], got {u}")
    times = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(times)):
        raise ValidationError("Time must be finite")
    if np.any(times < 0):
        raise ValidationError("Time must not be negative")
    elapsed = np.maximum(times - params.theta, 0.0)
    y = params.y_init + u * params.kp * -np.expm1(-elapsed / params.tau)
    if np.ndim(y) == 0:
        return float(y)
    return y


def segment_params(
    params_inc: FosParams, params_dec: FosParams, u: float, y_start: float
) -> tuple[FosParams, float]:
    """
    Pick the parameters and the effective gain driving one constant-input segment.

    Segments with ``u > 0`` follow the increasing curve scaled by ``u``. Segments with ``u == 0`` follow the
    decreasing curve at full gain.
    """
    if u > 0:
        return replace(params_inc, y_init=y_start), u
    return replace(params_dec, y_init=y_start), 1.0


def simulate_schedule(
    params_inc: FosParams,
    params_dec: FosParams,
    schedule: Sequence[tuple[float, float]],
    y_start: float,
    resolution: float,
    t_start: float = 0.0,
) -> TemperatureTrace:
    """
    Chain constant-input segments into one temperature curve.

    Each segment restarts the response with ``y_init`` equal to the previous segment's end temperature, so the curve
    is continuous at the boundaries. The dead time applies again at the start of every segment.

    Args:
        params_inc: Parameters used while the input is positive (kp > 0).
        params_dec: Parameters used while the input is zero (kp < 0).
        schedule: Sequence of ``(duration in minutes, u)`` pairs.
        y_start: Temperature at the start of the schedule in °C.
        resolution: Minutes between two output samples. Must divide every duration.
        t_start: Timestamp of the first sample. Shifting it only shifts the output timestamps.

    Returns:
        TemperatureTrace: Samples from ``t_start`` to ``t_start + total duration``.

    Raises:
        ValidationError: If the schedule is empty, a duration is not positive or not a multiple of ``resolution``, or
            a gain is outside [0, 1].
    """
    if not schedule:
        raise ValidationError("Cannot simulate an empty schedule")
    if not math.isfinite(resolution) or resolution <= 0:
        raise ValidationError(f"resolution must be positive, got {resolution}")

    temperatures = [float(y_start)]
    y = float(y_start)
    for duration, u in schedule:
        if not math.isfinite(duration) or duration <= 0:
            raise ValidationError(f"Segment durations must be positive, got {duration}")
        steps = duration / resolution
        if abs(steps - round(steps)) > 1e-9:
            raise ValidationError(
                f"resolution {resolution} does not divide segment duration {duration}"
            )
        params, gain = segment_params(params_inc, params_dec, u, y)
        local = np.arange(1, int(round(steps)) + 1) * resolution
        segment = step_response(params, gain, local)
        temperatures.extend(segment.tolist())
        y = float(segment[-1])

    times = t_start + np.arange(len(temperatures)) * resolution
    return TemperatureTrace(times, np.asarray(temperatures), resolution)


def end_temperature(
    params_inc: FosParams,
    params_dec: FosParams,
    schedule: Sequence[tuple[float, float]],
    y_start: float,
) -> float:
    """Temperature at the end of ``schedule`` without sampling the intermediate curve. Zero-length legs are skipped."""
    y = float(y_start)
    for duration, u in schedule:
        if duration <= 0:
            continue
        params, gain = segment_params(params_inc, params_dec, u, y)
        y = step_response(params, gain, float(duration))
    return y


def extract_params(
    curve: TemperatureTrace, direction: Direction, delay: float
) -> FosParams:
    """
    Read gain and time constant off a measured or predicted response curve.

    The final plateau is the mean of the last 5% of samples and the gain is its distance to the first sample. The
    time constant follows from the first (linearly interpolated) time the curve covers 98% of that span, minus the
    delay, divided by ln(50).

    Args:
        curve: Response curve starting at the input change.
        direction: Expected direction of the curve.
        delay: Dead time in minutes. It is not estimated from the data.

    Returns:
        FosParams: ``kp`` signed by direction, ``theta = delay`` and ``y_init`` equal to the first sample.

    Raises:
        ValidationError: If the span is zero or has the wrong sign, or the curve is not monotone after the delay.
        UnsettledCurveError: If the curve still moves inside its plateau window or never reaches 98% of its span.

    Example::

        curve = simulate_schedule(params, params_dec, [(900, 1.0)], y_start=20.0, resolution=1.0)
        extract_params(curve, Direction.INCREASING, delay=13.0)
    """
    direction = Direction(direction)
    temps = curve.temperatures
    n = len(curve)
    tail = max(2, math.ceil(PLATEAU_SHARE * n))
    if n < tail + 1:
        raise UnsettledCurveError(f"Curve with {n} samples is too short to extract")

    y0 = float(temps[0])
    plateau = float(np.mean(temps[-tail:]))
    span = plateau - y0
    sign = direction.sign
    if sign * span <= 0 or abs(span) < 1e-12:
        raise ValidationError(
            f"Curve span {span:+.4f} °C does not match the {direction} direction"
        )

    elapsed = curve.times - curve.times[0]
    after_delay = temps[elapsed >= delay]
    if after_delay.size > 1 and np.any(sign * np.diff(after_delay) < -MONOTONIC_TOLERANCE):
        raise ValidationError(f"Curve is not monotone in the {direction} direction")

    drift = abs(float(temps[-1] - temps[-tail]))
    if drift > SETTLED_SHARE * abs(span):
        raise UnsettledCurveError(
            f"Curve still moves {drift:.4f} °C in its last {tail} samples (span {span:.4f} °C)"
        )

    level = y0 + CROSSING_SHARE * span
    crossed = np.flatnonzero(sign * (temps - level) >= 0)
    if crossed.size == 0:
        raise UnsettledCurveError("Curve never reaches 98% of its span")
    k = int(crossed[0])
    if k == 0:
        t98 = 0.0
    else:
        before, after = temps[k - 1], temps[k]
        share = (level - before) / (after - before) if after != before else 1.0
        t98 = float(elapsed[k - 1] + share * (elapsed[k] - elapsed[k - 1]))
    if t98 <= delay:
        raise ValidationError(
            f"Curve reaches 98% of its span after {t98:.2f} min, before the {delay} min delay"
        )

    tau = (t98 - delay) / _CROSSING_TAUS
    _log.debug(f"Extracted {direction} kp={span:.4f} tau={tau:.2f} from {n} samples")
    return FosParams(kp=span, tau=tau, theta=delay, y_init=y0)
