import unittest
from datetime import datetime, timedelta

from ahumpc import ActuatorMode, ControllerKind, FosParams, ValidationError
from ahumpc.ahu_controller import ClockController, MpcController, on_off_pattern
from ahumpc.mapper import ProtectionPolicy
from ahumpc.mock import FosPlant
from ahumpc.mpc import MpcConfig, discretize_internal_model
from ahumpc.plant import AhuCommand, Disturbances

FOS_INC = FosParams(kp=10.0, tau=150.0, theta=13.0, y_init=18.0)
FOS_DEC = FosParams(kp=-10.0, tau=150.0, theta=13.0, y_init=24.0)
CALM = Disturbances(t_out=5.0, h_out=60.0)
MORNING = datetime(2023, 1, 2, 6, 0)


def _run_closed_loop(controller: MpcController, plant: FosPlant, setpoint: float, steps: int) -> list[float]:
    """Decide every 30 minutes on the plant's mean temperature and apply the gain pattern minute by minute."""
    temps = []
    now = MORNING
    for _ in range(steps):
        decision = controller.decide(now, plant.state.mean_temp, setpoint)
        for minute in range(controller.sampling):
            plant.step(AhuCommand(decision.gain_at(minute), controller.mode), CALM, 1.0)
        temps.append(plant.state.mean_temp)
        now += timedelta(minutes=controller.sampling)
    return temps


class TestClockController(unittest.TestCase):
    """Test suite for ClockController."""

    def setUp(self):
        self.controller = ClockController([(6 * 60, 21 * 60)], 30, "ahumpc")

    def test_inside_window_runs_whole_interval(self):
        """Test a full ON interval inside the window."""
        decision = self.controller.decide(datetime(2023, 1, 2, 7, 0), 19.0, 22.5)
        self.assertEqual(decision.on_minutes, 30.0)
        self.assertEqual(decision.u, 1.0)
        self.assertEqual(decision.pattern, ((30, 1.0),))

    def test_outside_window_stays_off(self):
        """Test an OFF interval before the window."""
        decision = self.controller.decide(datetime(2023, 1, 2, 5, 0), 19.0, 22.5)
        self.assertEqual(decision.on_minutes, 0.0)
        self.assertEqual(decision.gain_at(10), 0.0)

    def test_window_edge_inside_interval(self):
        """Test an interval the window starts in the middle of."""
        controller = ClockController([(6 * 60 + 10, 21 * 60)], 30, "ahumpc")
        decision = controller.decide(MORNING, 19.0, 22.5)
        self.assertEqual(decision.pattern, ((10, 0.0), (20, 1.0)))
        self.assertEqual(decision.gain_at(9), 0.0)
        self.assertEqual(decision.gain_at(10), 1.0)

    def test_missing_ait_does_not_matter(self):
        """Test that the timer decides without any AIT."""
        decision = self.controller.decide(datetime(2023, 1, 2, 7, 0), None, 22.5)
        self.assertFalse(decision.held)
        self.assertEqual(decision.on_minutes, 30.0)

    def test_movement_is_tagged_manual(self):
        """Test the controller kind written to the movement log."""
        decision = self.controller.decide(datetime(2023, 1, 2, 7, 0), 19.0, 22.5)
        movement = decision.to_movement(self.controller.kind)
        self.assertEqual(movement.controller, ControllerKind.MANUAL)
        self.assertEqual(movement.date, "2023-01-02T07:00")

    def test_overlapping_windows_raise(self):
        """Test that overlapping windows are rejected."""
        with self.assertRaises(ValidationError):
            ClockController([(360, 600), (500, 700)], 30, "ahumpc")


class TestMpcController(unittest.TestCase):
    """Test suite for MpcController."""

    def setUp(self):
        self.controller = MpcController(MpcConfig(), FOS_INC, FOS_DEC, logger_name="ahumpc")

    def test_cold_building_runs_whole_interval(self):
        """Test that a building far below the setpoint gets the full interval."""
        decision = self.controller.decide(MORNING, 18.0, 22.5)
        self.assertEqual(decision.on_minutes, 30.0)
        self.assertEqual(decision.pattern, ((30.0, 1.0),))

    def test_warm_building_stays_off(self):
        """Test that a building far above the setpoint keeps the AHU off."""
        decision = self.controller.decide(MORNING, 27.0, 22.5)
        self.assertEqual(decision.on_minutes, 0.0)
        self.assertEqual(decision.u, 0.0)

    def test_binary_pattern_covers_the_interval(self):
        """Test that the ON/OFF pattern always sums to the sampling time."""
        for ait in (20.0, 21.5, 22.5, 23.0):
            controller = MpcController(MpcConfig(), FOS_INC, FOS_DEC, logger_name="ahumpc")
            decision = controller.decide(MORNING, ait, 22.5)
            self.assertEqual(sum(d for d, _ in decision.pattern), 30)
            self.assertIn(decision.on_minutes, [0.0, 30.0] + [float(t) for t in range(6, 25)])

    def test_idle_mode_keeps_ahu_off(self):
        """Test that outside the active period the action is zero even right after heating."""
        self.controller.decide(MORNING, 18.0, 22.5)
        decision = self.controller.decide(MORNING + timedelta(minutes=30), 19.0, 22.5, idle=True)
        self.assertEqual(decision.u, 0.0)
        self.assertEqual(decision.on_minutes, 0.0)
        self.assertEqual(decision.setpoint, 19.0 - 5.0)

    def test_missing_ait_holds_previous_decision(self):
        """Test that a decision without AIT repeats the previous one."""
        first = self.controller.decide(MORNING, 18.0, 22.5)
        with self.assertLogs("ahumpc", level="WARNING"):
            held = self.controller.decide(MORNING + timedelta(minutes=30), None, 22.5)
        self.assertTrue(held.held)
        self.assertEqual(held.on_minutes, first.on_minutes)
        self.assertEqual(held.date, MORNING + timedelta(minutes=30))

    def test_missing_ait_without_history_stays_off(self):
        """Test that the very first decision without AIT keeps the AHU off."""
        with self.assertLogs("ahumpc", level="WARNING"):
            decision = self.controller.decide(MORNING, None, 22.5)
        self.assertTrue(decision.held)
        self.assertEqual(decision.on_minutes, 0.0)

    def test_set_models_resets_disturbance(self):
        """Test that installing new models clears the disturbance estimate."""
        self.controller.decide(MORNING, 18.0, 22.5)
        self.controller.decide(MORNING + timedelta(minutes=30), 21.0, 22.5)
        self.assertNotEqual(self.controller.disturbance, 0.0)
        self.controller.set_models(FOS_INC, FOS_DEC)
        self.assertEqual(self.controller.disturbance, 0.0)

    def test_model_follows_the_protected_input(self):
        """Test that the next prediction uses the rounded ON time, not the fractional action."""
        model = discretize_internal_model(FOS_INC, 30)
        rounded = 0
        for ait in (21.0, 21.5, 22.0, 22.3):
            controller = MpcController(
                MpcConfig(), FOS_INC, FOS_DEC, protection=ProtectionPolicy(15.0), logger_name="ahumpc"
            )
            decision = controller.decide(MORNING, ait, 22.5)
            self.assertIn(decision.on_minutes, (0.0, 30.0))
            applied = decision.on_minutes / 30
            expected = FOS_INC.y_init + model.step(ait - FOS_INC.y_init, 0.0, applied)
            self.assertAlmostEqual(controller.predicted_ait, expected)
            if decision.u != applied:
                rounded += 1
        self.assertGreater(rounded, 0)

    def test_analog_model_follows_the_action(self):
        """Test that in analog mode the prediction uses the fractional action itself."""
        controller = MpcController(MpcConfig(), FOS_INC, FOS_DEC, ActuatorMode.ANALOG, logger_name="ahumpc")
        self.assertIsNone(controller.predicted_ait)
        decision = controller.decide(MORNING, 21.5, 22.5)
        model = discretize_internal_model(FOS_INC, 30)
        expected = FOS_INC.y_init + model.step(21.5 - FOS_INC.y_init, 0.0, decision.u)
        self.assertAlmostEqual(controller.predicted_ait, expected)

    def test_invalid_protection_raises(self):
        """Test that a protection threshold above half the interval is rejected."""
        with self.assertRaises(ValidationError):
            MpcController(MpcConfig(), FOS_INC, FOS_DEC, protection=ProtectionPolicy(20.0))

    def test_analog_closed_loop_reaches_setpoint(self):
        """Test that an analog MPC on an exactly matching plant settles at the setpoint."""
        controller = MpcController(MpcConfig(), FOS_INC, FOS_DEC, ActuatorMode.ANALOG, logger_name="ahumpc")
        plant = FosPlant(FOS_INC)
        temps = _run_closed_loop(controller, plant, 22.5, 48)
        self.assertLess(abs(temps[-1] - 22.5), 0.2)
        self.assertAlmostEqual(controller.last_decision.u, 0.45, delta=0.02)

    def test_binary_closed_loop_stays_near_setpoint(self):
        """Test that ON/OFF control keeps the plant within a degree of the setpoint."""
        plant = FosPlant(FOS_INC)
        temps = _run_closed_loop(self.controller, plant, 22.5, 48)
        self.assertLess(max(abs(t - 22.5) for t in temps[-16:]), 1.0)


class TestFosPlant(unittest.TestCase):
    """Test suite for the first-order mock building."""

    def test_dead_time_and_gain(self):
        """Test that nothing happens during the dead time and the response settles at kp."""
        plant = FosPlant(FosParams(kp=5.0, tau=60.0, theta=13.0, y_init=18.0))
        plant.step(AhuCommand(1.0), CALM, 13.0)
        self.assertEqual(plant.state.mean_temp, 18.0)
        for _ in range(200):
            plant.step(AhuCommand(1.0), CALM, 5.0)
        self.assertAlmostEqual(plant.state.mean_temp, 23.0, delta=1e-3)

    def test_fractional_minutes_raise(self):
        """Test that steps must be whole minutes."""
        plant = FosPlant(FOS_INC)
        with self.assertRaises(ValidationError):
            plant.step(AhuCommand(1.0), CALM, 2.5)

    def test_cooling_gain_is_rejected(self):
        """Test that a plant needs a positive gain."""
        with self.assertRaises(ValidationError):
            FosPlant(FOS_DEC)


class TestOnOffPattern(unittest.TestCase):
    """Test suite for on_off_pattern."""

    def test_segments(self):
        """Test partial, full and zero ON times."""
        self.assertEqual(on_off_pattern(12, 30), ((12, 1.0), (18, 0.0)))
        self.assertEqual(on_off_pattern(30, 30), ((30, 1.0),))
        self.assertEqual(on_off_pattern(0, 30), ((30, 0.0),))


if __name__ == "__main__":
    unittest.main()
