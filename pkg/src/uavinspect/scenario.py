"""Planning world: workspace box, mission endpoints, spherical obstacles.

Also implements the scenario file grammar and the path-geometry queries the
planner's cost function builds on.

Scenario file grammar (line oriented, ``#`` starts a comment)::

    [workspace]
    min = 0, 0, 0            # meters; componentwise lower corner
    max = 141, 101, 40

    [mission]
    start = 40, 8, 30        # must lie strictly inside the workspace
    target = 64, 108, 34
    altitude_ref = 32        # optional; defaults to mean of start/target z

    [obstacle]               # block repeats, one per obstacle
    center = 55, 30, 20
    radius = 6
    margin = 1.0             # optional safety inflation, default 0

    [camera]                 # optional; see coverage module
    resolution_px = 4000
    focal_length = 0.0344
    sensor_size = 0.00617

    [coverage]               # optional
    smallest_feature = 0.002
    overlap_fraction = 0.25
    surface_extent = 20, 10

Unknown sections or keys are rejected with the offending line number.
"""

import math
from dataclasses import dataclass

import numpy as np

from .coverage import CameraModel, CoverageRequest
from .validation import ValidationError, as_vector, check_path

#: Clearance reported when there is nothing to collide with.
UNCONSTRAINED = math.inf


class ScenarioError(ValueError):
    """Scenario file parse or validation failure."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Obstacle:
    """Static spherical obstacle with an optional safety margin."""

    center: np.ndarray
    radius: float
    margin: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", as_vector(self.center, 3, "obstacle center"))
        if self.radius <= 0:
            raise ValidationError(f"obstacle radius must be positive, got {self.radius}")
        if self.margin < 0:
            raise ValidationError(f"obstacle margin must be non-negative, got {self.margin}")

    @property
    def inflated_radius(self):
        return self.radius + self.margin


@dataclass(frozen=True)
class Scenario:
    """Immutable planning world; all coordinates in local Cartesian meters."""

    workspace_min: np.ndarray
    workspace_max: np.ndarray
    start: np.ndarray
    target: np.ndarray
    obstacles: tuple = ()
    altitude_ref: float = None

    def __post_init__(self):
        lo = as_vector(self.workspace_min, 3, "workspace_min")
        hi = as_vector(self.workspace_max, 3, "workspace_max")
        object.__setattr__(self, "workspace_min", lo)
        object.__setattr__(self, "workspace_max", hi)
        object.__setattr__(self, "start", as_vector(self.start, 3, "start"))
        object.__setattr__(self, "target", as_vector(self.target, 3, "target"))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if not np.all(lo < hi):
            raise ValidationError(
                f"workspace_min must be componentwise below workspace_max: {lo} vs {hi}"
            )
        for name, point in (("start", self.start), ("target", self.target)):
            if not (np.all(point > lo) and np.all(point < hi)):
                raise ValidationError(f"{name} {point} is not strictly inside the workspace")
        for i, obs in enumerate(self.obstacles):
            if not (np.all(obs.center >= lo) and np.all(obs.center <= hi)):
                raise ValidationError(
                    f"obstacle {i} center {obs.center} lies outside the workspace"
                )
        if self.altitude_ref is None:
            object.__setattr__(
                self, "altitude_ref", 0.5 * float(self.start[2] + self.target[2])
            )

    @property
    def straight_line_distance(self):
        return float(np.linalg.norm(self.target - self.start))


@dataclass(frozen=True)
class ScenarioBundle:
    """Everything a scenario file can carry: world plus optional camera setup."""

    scenario: Scenario
    camera: CameraModel = None
    coverage: CoverageRequest = None


def path_length(path) -> float:
    """Total Euclidean length of a waypoint polyline."""
    pts = check_path(path)
    return float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))


def sample_path(path, samples_per_segment):
    """Uniformly sample each segment (endpoints included), stacked per segment."""
    pts = check_path(path)
    if samples_per_segment < 2:
        raise ValidationError("samples_per_segment must be at least 2")
    t = np.linspace(0.0, 1.0, samples_per_segment)[:, None]
    starts = pts[:-1]
    ends = pts[1:]
    # (segments, samples, 3) -> flat list of sample points
    chunks = starts[:, None, :] * (1.0 - t)[None] + ends[:, None, :] * t[None]
    return chunks.reshape(-1, 3)


def min_clearance(path, obstacles, samples_per_segment=20) -> float:
    """Signed clearance of a sampled path against inflated obstacle spheres.

    Positive values are the closest miss distance; negative values are the
    deepest penetration. With no obstacles the path is unconstrained and the
    +inf sentinel is returned.
    """
    if not obstacles:
        return UNCONSTRAINED
    points = sample_path(path, samples_per_segment)
    centers = np.array([o.center for o in obstacles])
    inflated = np.array([o.inflated_radius for o in obstacles])
    dists = np.linalg.norm(points[:, None, :] - centers[None, :, :], axis=2)
    return float(np.min(dists - inflated[None, :]))


# --- scenario file parsing -------------------------------------------------

_SECTION_KEYS = {
    "workspace": {"min", "max"},
    "mission": {"start", "target", "altitude_ref"},
    "obstacle": {"center", "radius", "margin"},
    "camera": {"resolution_px", "focal_length", "sensor_size"},
    "coverage": {"smallest_feature", "overlap_fraction", "surface_extent"},
}


def _parse_value(raw, line):
    parts = [p.strip() for p in raw.split(",")]
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise ScenarioError(f"cannot parse number(s) from {raw!r}", line) from None
    return values[0] if len(values) == 1 else values


def _parse_blocks(text):
    """Split file text into (section, line, {key: (value, line)}) blocks."""
    blocks = []
    current = None
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in _SECTION_KEYS:
                raise ScenarioError(f"unknown section [{section}]", lineno)
            current = (section, lineno, {})
            blocks.append(current)
            continue
        if "=" not in line:
            raise ScenarioError(f"expected 'key = value', got {line!r}", lineno)
        if current is None:
            raise ScenarioError("key outside of any [section]", lineno)
        key, raw = (s.strip() for s in line.split("=", 1))
        section = current[0]
        if key not in _SECTION_KEYS[section]:
            raise ScenarioError(f"unknown key {key!r} in section [{section}]", lineno)
        if key in current[2]:
            raise ScenarioError(f"duplicate key {key!r} in section [{section}]", lineno)
        current[2][key] = (_parse_value(raw, lineno), lineno)
    return blocks


def _require(entries, key, section, line):
    if key not in entries:
        raise ScenarioError(f"section [{section}] is missing required key {key!r}", line)
    return entries[key][0]


def load_scenario_bundle(text) -> ScenarioBundle:
    """Parse scenario file text into a validated bundle."""
    blocks = _parse_blocks(text)
    seen = {}
    obstacles = []
    for section, line, entries in blocks:
        if section == "obstacle":
            try:
                obstacles.append(
                    Obstacle(
                        center=_require(entries, "center", section, line),
                        radius=_require(entries, "radius", section, line),
                        margin=entries.get("margin", (0.0, line))[0],
                    )
                )
            except ValidationError as exc:
                raise ScenarioError(str(exc), line) from exc
            continue
        if section in seen:
            raise ScenarioError(f"duplicate section [{section}]", line)
        seen[section] = (line, entries)

    for required in ("workspace", "mission"):
        if required not in seen:
            raise ScenarioError(f"missing required section [{required}]")

    ws_line, ws = seen["workspace"]
    mi_line, mi = seen["mission"]
    try:
        scenario = Scenario(
            workspace_min=_require(ws, "min", "workspace", ws_line),
            workspace_max=_require(ws, "max", "workspace", ws_line),
            start=_require(mi, "start", "mission", mi_line),
            target=_require(mi, "target", "mission", mi_line),
            obstacles=obstacles,
            altitude_ref=mi.get("altitude_ref", (None, mi_line))[0],
        )
    except ValidationError as exc:
        raise ScenarioError(str(exc)) from exc

    camera = None
    if "camera" in seen:
        cam_line, cam = seen["camera"]
        try:
            camera = CameraModel(
                resolution_px=_require(cam, "resolution_px", "camera", cam_line),
                focal_length=_require(cam, "focal_length", "camera", cam_line),
                sensor_size=_require(cam, "sensor_size", "camera", cam_line),
            )
        except ValidationError as exc:
            raise ScenarioError(str(exc), cam_line) from exc

    coverage = None
    if "coverage" in seen:
        cov_line, cov = seen["coverage"]
        try:
            coverage = CoverageRequest(
                smallest_feature=_require(cov, "smallest_feature", "coverage", cov_line),
                overlap_fraction=_require(cov, "overlap_fraction", "coverage", cov_line),
                surface_extent=_require(cov, "surface_extent", "coverage", cov_line),
            )
        except ValidationError as exc:
            raise ScenarioError(str(exc), cov_line) from exc

    return ScenarioBundle(scenario=scenario, camera=camera, coverage=coverage)


def load_scenario(text) -> Scenario:
    """Parse scenario file text, returning just the validated world."""
    return load_scenario_bundle(text).scenario


def _fmt(value):
    if isinstance(value, (list, tuple, np.ndarray)):
        return ", ".join(repr(float(v)) for v in value)
    return repr(float(value))


def serialize_scenario(bundle) -> str:
    """Canonical scenario file text; load(serialize(x)) reproduces x exactly."""
    if isinstance(bundle, Scenario):
        bundle = ScenarioBundle(scenario=bundle)
    s = bundle.scenario
    lines = [
        "[workspace]",
        f"min = {_fmt(s.workspace_min)}",
        f"max = {_fmt(s.workspace_max)}",
        "",
        "[mission]",
        f"start = {_fmt(s.start)}",
        f"target = {_fmt(s.target)}",
        f"altitude_ref = {_fmt(s.altitude_ref)}",
    ]
    for obs in s.obstacles:
        lines += [
            "",
            "[obstacle]",
            f"center = {_fmt(obs.center)}",
            f"radius = {_fmt(obs.radius)}",
            f"margin = {_fmt(obs.margin)}",
        ]
    if bundle.camera is not None:
        c = bundle.camera
        lines += [
            "",
            "[camera]",
            f"resolution_px = {_fmt(c.resolution_px)}",
            f"focal_length = {_fmt(c.focal_length)}",
            f"sensor_size = {_fmt(c.sensor_size)}",
        ]
    if bundle.coverage is not None:
        c = bundle.coverage
        lines += [
            "",
            "[coverage]",
            f"smallest_feature = {_fmt(c.smallest_feature)}",
            f"overlap_fraction = {_fmt(c.overlap_fraction)}",
            f"surface_extent = {_fmt(c.surface_extent)}",
        ]
    return "\n".join(lines) + "\n"
