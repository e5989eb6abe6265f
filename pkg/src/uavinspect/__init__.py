"""Multi-UAV surface inspection toolkit.

Offline pipeline covering camera coverage assessment, angle-encoded swarm
path planning for a UAV formation, per-UAV trajectory expansion, attitude
control simulation, and histogram-based defect detection with pixel-level
scoring.
"""

from .coverage import (
    CameraModel,
    CoverageRequest,
    ViewConfiguration,
    effective_footprint,
    field_of_view,
    generate_viewpoints,
    standoff_distance,
)
from .controlsim import (
    AtsmConfig,
    DivergenceError,
    QuadParams,
    QuadState,
    SimTrace,
    SingularityError,
    adapt_gain,
    body_rates_from_euler_rates,
    equivalent_control,
    gyroscopic_moments,
    simulate_attitude_tracking,
    simulate_formation_flight,
    sinusoidal_disturbance,
    sliding_variable,
    step_dynamics,
    step_reference_profile,
    twisting_control,
)
from .detection import (
    DegenerateHistogramError,
    DetectionMetrics,
    IterativeThresholdDetector,
    OtsuDetector,
    RegionSlice,
    SegmentationResult,
    between_class_variance,
    detect_defects,
    f_measure,
    histogram,
    interclass_contrast,
    iterative_threshold,
    otsu_threshold,
    segment,
    synth_defect_image,
    to_grayscale,
)
from .formation import (
    DEFAULT_FORMATION,
    FormationErrors,
    FormationSpec,
    formation_centroid,
    individual_trajectories,
    load_formation,
    position_errors,
    rotation_formation_to_inertial,
    serialize_formation,
)
from .planner import (
    ConventionalPsoPlanner,
    CostBreakdown,
    CostWeights,
    PlannedPath,
    PlanningContext,
    PsoConfig,
    SwarmState,
    ThetaPsoPlanner,
    angle_to_position,
    evaluate_cost,
    init_swarm,
    plan_path,
    plan_path_baseline_pso,
    position_to_angle,
    step_swarm,
)
from .scenario import (
    Obstacle,
    Scenario,
    ScenarioBundle,
    ScenarioError,
    UNCONSTRAINED,
    load_scenario,
    load_scenario_bundle,
    min_clearance,
    path_length,
    sample_path,
    serialize_scenario,
)
from .validation import ValidationError

__version__ = "0.1.0"
