"""Online slip detection and tire-road friction estimation from vehicle telemetry."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    DEFAULT_GEOMETRY,
    G_DEFAULT,
    ControlAction,
    Observation,
    PlanarForce,
    TelemetryRecord,
    TireState,
    VehicleGeometry,
    expected_yaw_rate,
    geometric_slip_angle,
    is_pure_rolling,
    kinematic_step,
    slip_angle,
    slip_ratio,
    traction_coefficient,
    traction_from_accel,
)
from .detector import SlipEvent, SlipFlags, Thresholds, detect_step, detect_stream, extract_events  # noqa: E402
from .estimator import FrictionEstimate, estimate_stream, friction_circle_points  # noqa: E402
from .calibration import compute_thresholds, cross_validate, kfold_split, pull_test_mu  # noqa: E402
from .simulator import SimConfig, simulate_run, standard_scenarios  # noqa: E402
from .telemetry import load_stream, parse_record, write_stream  # noqa: E402
