from .ahu_data import (
    ValidationError,
    UnsettledCurveError,
    ConfigError,
    SolverError,
    Direction,
    ActuatorMode,
    ControllerKind,
    FosParams,
    TemperatureTrace,
)
from .fos import step_response, simulate_schedule, end_temperature, extract_params
from .plant import (
    PlantState,
    Disturbances,
    AhuCommand,
    Plant,
    BuildingPlant,
    step_plant,
    equilibrium,
    generate_weather,
    clock_controller,
)
from .telemetry import SensorReading, AitRecord, MpcMovement, MessageBus, sample_sensors, aggregate_ait, detect_gaps
from .record_store import RecordStore
from .dataset import Session, SampleSet, DatasetSplit, extract_sessions, expand_pairs, build_daily
from .surrogate import SurrogateConfig, MlpModel, MetricsReport, train, predict, generate_edf, edf_to_fos
from .mpc import MpcConfig, SetpointFeedback, ControlPlan, effective_setpoint, discretize_internal_model, solve
from .mapper import ProtectionPolicy, map_to_on_time, apply_protection
from .ahu_controller import AhuController, ClockController, MpcController, ControlDecision
from .scenario import ScenarioConfig, ElectricalParams, load_scenario
from .building_hub import BuildingHub
from .report import EnergyReport, energy_kwh, compare, load_run, export_run

__all__ = [
    "ValidationError",
    "UnsettledCurveError",
    "ConfigError",
    "SolverError",
    "Direction",
    "ActuatorMode",
    "ControllerKind",
    "FosParams",
    "TemperatureTrace",
    "step_response",
    "simulate_schedule",
    "end_temperature",
    "extract_params",
    "PlantState",
    "Disturbances",
    "AhuCommand",
    "Plant",
    "BuildingPlant",
    "step_plant",
    "equilibrium",
    "generate_weather",
    "clock_controller",
    "SensorReading",
    "AitRecord",
    "MpcMovement",
    "MessageBus",
    "sample_sensors",
    "aggregate_ait",
    "detect_gaps",
    "RecordStore",
    "Session",
    "SampleSet",
    "DatasetSplit",
    "extract_sessions",
    "expand_pairs",
    "build_daily",
    "SurrogateConfig",
    "MlpModel",
    "MetricsReport",
    "train",
    "predict",
    "generate_edf",
    "edf_to_fos",
    "MpcConfig",
    "SetpointFeedback",
    "ControlPlan",
    "effective_setpoint",
    "discretize_internal_model",
    "solve",
    "ProtectionPolicy",
    "map_to_on_time",
    "apply_protection",
    "AhuController",
    "ClockController",
    "MpcController",
    "ControlDecision",
    "ScenarioConfig",
    "ElectricalParams",
    "load_scenario",
    "BuildingHub",
    "EnergyReport",
    "energy_kwh",
    "compare",
    "load_run",
    "export_run",
]

__version__ = "0.1.0"
