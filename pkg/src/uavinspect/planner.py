"""Swarm path planners for the formation centroid.

The primary planner encodes every waypoint coordinate as a phase angle in
[-pi/2, pi/2] and moves the swarm in angle space; a sine map decodes angles
into workspace coordinates, which keeps every candidate waypoint inside the
box by construction. A conventional velocity-position PSO over the same cost
function serves as the convergence baseline.

Both planners are deterministic given their seed: random scalars are drawn
per particle (shared across dimensions) from one seeded stream, and cost ties
keep the incumbent best.
"""

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .formation import FormationSpec
from .scenario import Scenario
from .validation import ValidationError, check_path

HALF_PI = math.pi / 2.0


@dataclass(frozen=True)
class CostWeights:
    """Weighting of the path-length, violation, and altitude cost terms."""

    length_weight: float = 1.0
    violation_weight: float = 100.0
    altitude_weight: float = 1.0

    def __post_init__(self):
        w = (self.length_weight, self.violation_weight, self.altitude_weight)
        if any(v < 0 for v in w):
            raise ValidationError(f"cost weights must be non-negative, got {w}")
        if all(v == 0 for v in w):
            raise ValidationError("at least one cost weight must be positive")


@dataclass(frozen=True)
class PsoConfig:
    """Swarm setup shared by both planners."""

    swarm_size: int = 150
    waypoints: int = 10
    iterations: int = 300
    inertia: float = 0.7
    cognitive_gain: float = 1.5
    social_gain: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if self.swarm_size < 1:
            raise ValidationError("swarm_size must be at least 1")
        if self.waypoints < 1:
            raise ValidationError("waypoints must be at least 1")
        if self.iterations < 1:
            raise ValidationError("iterations must be at least 1")
        if self.inertia < 0 or self.cognitive_gain < 0 or self.social_gain < 0:
            raise ValidationError("inertia and gains must be non-negative")

    @property
    def dimensions(self):
        """Search-space dimension: three coordinates per free waypoint."""
        return 3 * self.waypoints


@dataclass(frozen=True)
class CostBreakdown:
    """Weighted total plus the three unweighted cost components."""

    total: float
    length_cost: float
    violation_cost: float
    altitude_cost: float


@dataclass
class SwarmState:
    """Mutable-by-replacement optimizer state; one row per particle."""

    angles: np.ndarray
    angle_increments: np.ndarray
    personal_best_angles: np.ndarray
    personal_best_costs: np.ndarray
    global_best_angles: np.ndarray
    global_best_cost: float
    iteration: int = 0


@dataclass(frozen=True)
class PlannedPath:
    """Planner output: best path, its cost, and the convergence history."""

    path: np.ndarray
    cost: CostBreakdown
    convergence_trace: tuple
    iterations_to_within_1pct: int


def angle_to_position(angle, lower, upper):
    """Sine map from a phase angle in [-pi/2, pi/2] onto [lower, upper]."""
    if not np.all(np.asarray(lower) < np.asarray(upper)):
        raise ValidationError(f"lower bound must be below upper, got {lower} vs {upper}")
    return 0.5 * ((upper - lower) * np.sin(angle) + upper + lower)


def position_to_angle(position, lower, upper):
    """Inverse of the sine map, clipped against rounding at the bounds."""
    span = upper - lower
    s = np.clip((2.0 * position - upper - lower) / span, -1.0, 1.0)
    return np.arcsin(s)


class PlanningContext:
    """Scenario, formation, and weights bundled with the vectorized cost kernel.

    Obstacle checks for the n-UAV formation reuse one pass by shifting every
    obstacle center opposite to each rotated offset; the inter-UAV separation
    penalty is constant per sampled parameter for rigid offsets.
    """

    def __init__(self, scenario, formation=None, weights=None,
                 samples_per_segment=10, safe_distance=2.0):
        if not isinstance(scenario, Scenario):
            raise ValidationError("scenario must be a Scenario instance")
        self.scenario = scenario
        self.formation = formation
        self.weights = weights if weights is not None else CostWeights()
        if samples_per_segment < 2:
            raise ValidationError("samples_per_segment must be at least 2")
        self.samples_per_segment = int(samples_per_segment)
        self.safe_distance = float(safe_distance)

        offsets = (
            formation.inertial_offsets()
            if formation is not None
            else np.zeros((1, 3))
        )
        self._pair_penalty = 0.0
        for i in range(len(offsets)):
            for j in range(i + 1, len(offsets)):
                gap = self.safe_distance - float(np.linalg.norm(offsets[i] - offsets[j]))
                if gap > 0.0:
                    self._pair_penalty += gap * gap

        if scenario.obstacles:
            centers = np.array([o.center for o in scenario.obstacles])
            radii = np.array([o.inflated_radius for o in scenario.obstacles])
            # one effective obstacle per (UAV, obstacle) pair
            self._eff_centers = (centers[None, :, :] - offsets[:, None, :]).reshape(-1, 3)
            self._eff_radii = np.tile(radii, len(offsets))
            self._eff_center_sq = (self._eff_centers * self._eff_centers).sum(axis=1)
        else:
            self._eff_centers = None
            self._eff_radii = None
        self._t = np.linspace(0.0, 1.0, self.samples_per_segment)

    def evaluate_paths(self, paths):
        """Cost components for a batch of complete waypoint paths (B, K, 3)."""
        paths = np.asarray(paths, dtype=float)
        if paths.ndim == 2:
            paths = paths[None]
        diffs = np.diff(paths, axis=1)
        length = np.sqrt((diffs * diffs).sum(axis=2)).sum(axis=1)

        t = self._t
        starts = paths[:, :-1, None, :]
        ends = paths[:, 1:, None, :]
        pts = starts * (1.0 - t)[None, None, :, None] + ends * t[None, None, :, None]
        pts = pts.reshape(paths.shape[0], -1, 3)
        n_samples = pts.shape[1]

        violation = np.full(paths.shape[0], self._pair_penalty * n_samples)
        if self._eff_centers is not None:
            flat = pts.reshape(-1, 3)
            # |p - c|^2 expanded so the cross term runs through one matmul
            d2 = (
                (flat * flat).sum(axis=1)[:, None]
                + self._eff_center_sq[None, :]
                - 2.0 * (flat @ self._eff_centers.T)
            )
            np.maximum(d2, 0.0, out=d2)
            pen = self._eff_radii[None, :] - np.sqrt(d2)
            np.maximum(pen, 0.0, out=pen)
            pen = pen.reshape(paths.shape[0], n_samples, -1)
            violation = violation + (pen * pen).sum(axis=(1, 2))

        dz = pts[:, :, 2] - self.scenario.altitude_ref
        altitude = (dz * dz).mean(axis=1)

        w = self.weights
        total = (
            w.length_weight * length
            + w.violation_weight * violation
            + w.altitude_weight * altitude
        )
        return total, length, violation, altitude

    def breakdown(self, path) -> CostBreakdown:
        total, length, violation, altitude = self.evaluate_paths(path)
        return CostBreakdown(
            total=float(total[0]),
            length_cost=float(length[0]),
            violation_cost=float(violation[0]),
            altitude_cost=float(altitude[0]),
        )


def evaluate_cost(path, scenario, formation=None, weights=None,
                  samples_per_segment=10, safe_distance=2.0) -> CostBreakdown:
    """Cost of one complete path (must run from scenario start to target)."""
    pts = check_path(path)
    if not (np.array_equal(pts[0], scenario.start) and np.array_equal(pts[-1], scenario.target)):
        raise ValidationError("path must start at scenario.start and end at scenario.target")
    ctx = PlanningContext(scenario, formation, weights, samples_per_segment, safe_distance)
    return ctx.breakdown(pts)


# --- swarm mechanics ---------------------------------------------------------

def _dimension_bounds(scenario, waypoints):
    lower = np.tile(scenario.workspace_min, waypoints)
    upper = np.tile(scenario.workspace_max, waypoints)
    return lower, upper


def _assemble(free_flat, scenario):
    """(B, S) flat free coordinates -> (B, W+2, 3) complete paths."""
    batch = free_flat.shape[0]
    inner = free_flat.reshape(batch, -1, 3)
    start = np.broadcast_to(scenario.start, (batch, 1, 3))
    target = np.broadcast_to(scenario.target, (batch, 1, 3))
    return np.concatenate([start, inner, target], axis=1)


def _decoded_costs(angles, context, lower, upper):
    positions = angle_to_position(angles, lower[None, :], upper[None, :])
    totals, _, _, _ = context.evaluate_paths(_assemble(positions, context.scenario))
    return totals


#: Initial waypoint spread around the start-target line, as a span fraction.
INIT_SPREAD = 0.1


def _initial_angles(config: PsoConfig, context: PlanningContext, rng):
    """Angles encoding random paths that connect start and target.

    Each particle perturbs the straight start-target polyline waypoint-wise
    by up to +-INIT_SPREAD/2 of the workspace span, clipped into the box and
    mapped to phase angles; increments start at zero.
    """
    scenario = context.scenario
    lower, upper = _dimension_bounds(scenario, config.waypoints)
    line = np.linspace(scenario.start, scenario.target, config.waypoints + 2)[1:-1]
    noise = rng.uniform(-0.5, 0.5, size=(config.swarm_size, config.dimensions))
    positions = line.reshape(-1)[None, :] + noise * (INIT_SPREAD * (upper - lower))[None, :]
    np.clip(positions, lower[None, :], upper[None, :], out=positions)
    return position_to_angle(positions, lower[None, :], upper[None, :])


def init_swarm(config: PsoConfig, context: PlanningContext, rng) -> SwarmState:
    """Random initial population of start-target connecting paths."""
    lower, upper = _dimension_bounds(context.scenario, config.waypoints)
    angles = _initial_angles(config, context, rng)
    costs = _decoded_costs(angles, context, lower, upper)
    best = int(np.argmin(costs))
    return SwarmState(
        angles=angles,
        angle_increments=np.zeros_like(angles),
        personal_best_angles=angles.copy(),
        personal_best_costs=costs,
        global_best_angles=angles[best].copy(),
        global_best_cost=float(costs[best]),
        iteration=0,
    )


def step_swarm(state: SwarmState, config: PsoConfig, context: PlanningContext,
               rng) -> SwarmState:
    """One synchronous swarm update in angle space.

    Increment and angle are clamped to [-pi/2, pi/2] after the update; the
    random scalars are drawn once per particle and shared across dimensions.
    """
    r = rng.random((config.swarm_size, 2))
    r1 = r[:, 0:1]
    r2 = r[:, 1:2]
    incr = (
        config.inertia * state.angle_increments
        + config.cognitive_gain * r1 * (state.personal_best_angles - state.angles)
        + config.social_gain * r2 * (state.global_best_angles[None, :] - state.angles)
    )
    np.clip(incr, -HALF_PI, HALF_PI, out=incr)
    angles = np.clip(state.angles + incr, -HALF_PI, HALF_PI)

    lower, upper = _dimension_bounds(context.scenario, config.waypoints)
    costs = _decoded_costs(angles, context, lower, upper)

    improved = costs < state.personal_best_costs
    pbest_angles = np.where(improved[:, None], angles, state.personal_best_angles)
    pbest_costs = np.where(improved, costs, state.personal_best_costs)

    gbest_angles = state.global_best_angles
    gbest_cost = state.global_best_cost
    candidate = int(np.argmin(pbest_costs))
    if float(pbest_costs[candidate]) < gbest_cost:
        gbest_cost = float(pbest_costs[candidate])
        gbest_angles = pbest_angles[candidate].copy()

    return SwarmState(
        angles=angles,
        angle_increments=incr,
        personal_best_angles=pbest_angles,
        personal_best_costs=pbest_costs,
        global_best_angles=gbest_angles,
        global_best_cost=gbest_cost,
        iteration=state.iteration + 1,
    )


def _iterations_to_within_1pct(trace):
    final = trace[-1][1]
    threshold = final * 1.01
    for iteration, cost in trace:
        if cost <= threshold:
            return iteration
    return trace[-1][0]


def _finish(best_flat, context, trace):
    path = _assemble(best_flat[None, :], context.scenario)[0]
    return PlannedPath(
        path=path,
        cost=context.breakdown(path),
        convergence_trace=tuple(trace),
        iterations_to_within_1pct=_iterations_to_within_1pct(trace),
    )


def plan_path(scenario, formation=None, config=None, weights=None,
              samples_per_segment=10, safe_distance=2.0) -> PlannedPath:
    """Plan the centroid path with the angle-encoded swarm."""
    config = config if config is not None else PsoConfig()
    context = PlanningContext(scenario, formation, weights, samples_per_segment, safe_distance)
    rng = np.random.default_rng(config.seed)
    state = init_swarm(config, context, rng)
    trace = [(0, state.global_best_cost)]
    for _ in range(config.iterations):
        state = step_swarm(state, config, context, rng)
        trace.append((state.iteration, state.global_best_cost))
    lower, upper = _dimension_bounds(scenario, config.waypoints)
    best_flat = angle_to_position(state.global_best_angles, lower, upper)
    return _finish(best_flat, context, trace)


def plan_path_baseline_pso(scenario, formation=None, config=None, weights=None,
                           samples_per_segment=10, safe_distance=2.0) -> PlannedPath:
    """Conventional velocity-position PSO over the same cost function.

    The initial population matches the angle-encoded planner for the same
    seed (identical draws decoded through the sine map); velocities are
    clamped to the workspace span and positions to the box.
    """
    config = config if config is not None else PsoConfig()
    context = PlanningContext(scenario, formation, weights, samples_per_segment, safe_distance)
    lower, upper = _dimension_bounds(scenario, config.waypoints)
    span = upper - lower

    rng = np.random.default_rng(config.seed)
    angles = _initial_angles(config, context, rng)
    positions = angle_to_position(angles, lower[None, :], upper[None, :])
    velocities = np.zeros_like(positions)

    totals, _, _, _ = context.evaluate_paths(_assemble(positions, scenario))
    pbest = positions.copy()
    pbest_costs = totals
    best = int(np.argmin(pbest_costs))
    gbest = positions[best].copy()
    gbest_cost = float(pbest_costs[best])

    trace = [(0, gbest_cost)]
    for k in range(1, config.iterations + 1):
        r = rng.random((config.swarm_size, 2))
        velocities = (
            config.inertia * velocities
            + config.cognitive_gain * r[:, 0:1] * (pbest - positions)
            + config.social_gain * r[:, 1:2] * (gbest[None, :] - positions)
        )
        np.clip(velocities, -span[None, :], span[None, :], out=velocities)
        positions = np.clip(positions + velocities, lower[None, :], upper[None, :])

        totals, _, _, _ = context.evaluate_paths(_assemble(positions, scenario))
        improved = totals < pbest_costs
        pbest = np.where(improved[:, None], positions, pbest)
        pbest_costs = np.where(improved, totals, pbest_costs)
        candidate = int(np.argmin(pbest_costs))
        if float(pbest_costs[candidate]) < gbest_cost:
            gbest_cost = float(pbest_costs[candidate])
            gbest = pbest[candidate].copy()
        trace.append((k, gbest_cost))

    return _finish(gbest, context, trace)


# --- sklearn-style facade ----------------------------------------------------

class _SwarmPlannerBase(BaseEstimator):
    """Shared estimator plumbing for both planners."""

    def __init__(self, swarm_size=150, waypoints=10, iterations=300, inertia=0.7,
                 cognitive_gain=1.5, social_gain=1.5, seed=0, length_weight=1.0,
                 violation_weight=100.0, altitude_weight=1.0,
                 samples_per_segment=10, safe_distance=2.0):
        self.swarm_size = swarm_size
        self.waypoints = waypoints
        self.iterations = iterations
        self.inertia = inertia
        self.cognitive_gain = cognitive_gain
        self.social_gain = social_gain
        self.seed = seed
        self.length_weight = length_weight
        self.violation_weight = violation_weight
        self.altitude_weight = altitude_weight
        self.samples_per_segment = samples_per_segment
        self.safe_distance = safe_distance

    def _config(self):
        return PsoConfig(
            swarm_size=self.swarm_size,
            waypoints=self.waypoints,
            iterations=self.iterations,
            inertia=self.inertia,
            cognitive_gain=self.cognitive_gain,
            social_gain=self.social_gain,
            seed=self.seed,
        )

    def _weights(self):
        return CostWeights(
            length_weight=self.length_weight,
            violation_weight=self.violation_weight,
            altitude_weight=self.altitude_weight,
        )

    _planner = staticmethod(plan_path)

    def fit(self, scenario, formation=None):
        """Run the swarm on a scenario; the best plan lands in fitted attributes."""
        result = type(self)._planner(
            scenario,
            formation,
            self._config(),
            self._weights(),
            samples_per_segment=self.samples_per_segment,
            safe_distance=self.safe_distance,
        )
        self.result_ = result
        self.path_ = result.path
        self.cost_ = result.cost
        self.convergence_trace_ = result.convergence_trace
        self.iterations_to_within_1pct_ = result.iterations_to_within_1pct
        self.n_iter_ = result.convergence_trace[-1][0]
        return self


class ThetaPsoPlanner(_SwarmPlannerBase):
    """Angle-encoded swarm planner with the sine decoding map."""


class ConventionalPsoPlanner(_SwarmPlannerBase):
    """Velocity-position swarm baseline over the same cost function."""

    _planner = staticmethod(plan_path_baseline_pso)
