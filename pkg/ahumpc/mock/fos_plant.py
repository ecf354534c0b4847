"""
Exact first-order building used to check the control loop without model mismatch.

The plant follows ``dx/dt = (kp * g(t - theta) - x) / tau`` for the deviation ``x`` from an ambient temperature and
ignores every disturbance. All 24 zones share the same temperature. Commands are buffered per minute to apply the
dead time, so steps must be whole minutes.
"""

import math
from collections import deque

import numpy as np

from ..ahu_data import ZONE_COUNT, FosParams, ValidationError
from ..plant import AhuCommand, Disturbances, Plant, PlantState


class FosPlant(Plant):
    """
    Building that responds to the AHU exactly like a first-order-plus-dead-time model.

    Args:
        params: Response of the building. ``y_init`` is the ambient temperature the deviation is measured from.
        initial_temp: Starting temperature in °C. Defaults to the ambient temperature.
        humidity: Constant indoor humidity in %RH.

    Example::

        plant = FosPlant(FosParams(kp=5.0, tau=60.0, theta=13.0, y_init=18.0))
        for _ in range(30):
            plant.step(AhuCommand(1.0), Disturbances(5.0, 70.0), 1.0)
    """

    def __init__(self, params: FosParams, initial_temp: float | None = None, humidity: float = 40.0):
        if params.kp <= 0:
            raise ValidationError(f"A heating plant needs a positive gain, got {params.kp}")
        self._params = params
        self._humidity = humidity
        self._x = (params.y_init if initial_temp is None else initial_temp) - params.y_init
        self._decay = math.exp(-1.0 / params.tau)
        self._delay = deque([0.0] * int(round(params.theta)))
        self._state = self._make_state()

    @property
    def params(self) -> FosParams:
        return self._params

    @property
    def state(self) -> PlantState:
        return self._state

    def step(self, cmd: AhuCommand, dist: Disturbances, dt: float) -> PlantState:
        if dt <= 0 or dt != int(dt):
            raise ValidationError(f"FosPlant steps must be whole minutes, got {dt}")
        for _ in range(int(dt)):
            self._delay.append(cmd.gain)
            gain = self._delay.popleft()
            self._x = self._decay * self._x + self._params.kp * (1.0 - self._decay) * gain
        self._state = self._make_state()
        return self._state

    def _make_state(self) -> PlantState:
        temperature = self._params.y_init + self._x
        return PlantState(np.full(ZONE_COUNT, temperature), temperature, self._humidity, 0.0)
