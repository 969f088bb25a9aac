"""Attack-resilient fusion of redundant sensors, with detection, isolation,
and a closed-loop vehicle platoon simulator driven by the fused estimates."""

__version__ = "0.1.0"

from .config import ConfigError, ScenarioConfig, TimeGrid, available_presets, load_preset, parse_config, preset_path
from .detection import (
    AttackDetector,
    AttackIsolator,
    DetectionReport,
    IsolationReport,
    NoiseBounds,
    detect_sample,
    detect_window,
    detection_thresholds,
    isolate,
    isolation_thresholds,
    select_reference_sensor,
)
from .fusion import (
    CombinatorialBudgetError,
    FusionConfig,
    FusionOutput,
    SubsetFusion,
    enumerate_subsets,
    fuse,
    fuse_series,
    reconstructible,
    subset_average,
    subset_spread,
    theoretical_error_bound,
)
from .metrics import (
    BoundReport,
    ConfusionStats,
    SignalTrace,
    bound_violation_report,
    confusion_stats,
    lp_norm,
    string_stability_check,
)
from .platoon import (
    InputSchedule,
    PlatoonParams,
    PlatoonTrajectory,
    SimulationDiverged,
    eigenvalue_check,
    follower_derivative,
    reference_derivative,
    rk4_step,
    simulate_platoon,
)
from .runner import RunResult, montecarlo_summary, run
from .scenario import (
    AttackSchedule,
    ChannelNoise,
    GroundTruth,
    MeasurementSample,
    NoiseModel,
    SensorNoise,
    make_rng_stream,
    sample_measurement_series,
    sample_measurements,
)

__all__ = [
    "__version__",
    "AttackDetector",
    "AttackIsolator",
    "AttackSchedule",
    "BoundReport",
    "ChannelNoise",
    "CombinatorialBudgetError",
    "ConfigError",
    "ConfusionStats",
    "DetectionReport",
    "FusionConfig",
    "FusionOutput",
    "GroundTruth",
    "InputSchedule",
    "IsolationReport",
    "MeasurementSample",
    "NoiseBounds",
    "NoiseModel",
    "PlatoonParams",
    "PlatoonTrajectory",
    "RunResult",
    "ScenarioConfig",
    "SensorNoise",
    "SignalTrace",
    "SimulationDiverged",
    "SubsetFusion",
    "TimeGrid",
    "available_presets",
    "bound_violation_report",
    "confusion_stats",
    "detect_sample",
    "detect_window",
    "detection_thresholds",
    "eigenvalue_check",
    "enumerate_subsets",
    "follower_derivative",
    "fuse",
    "fuse_series",
    "isolate",
    "isolation_thresholds",
    "load_preset",
    "lp_norm",
    "make_rng_stream",
    "montecarlo_summary",
    "parse_config",
    "preset_path",
    "reconstructible",
    "reference_derivative",
    "rk4_step",
    "run",
    "sample_measurement_series",
    "sample_measurements",
    "select_reference_sensor",
    "simulate_platoon",
    "string_stability_check",
    "subset_average",
    "subset_spread",
    "theoretical_error_bound",
]
