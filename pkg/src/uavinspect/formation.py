"""Formation geometry: expand a centroid path into per-UAV trajectories.

The formation shape is a set of fixed offsets expressed in a formation frame
related to the inertial frame by a Z-Y-X Euler rotation. Offsets are rotated
into the inertial frame and added to every reference waypoint, and tracking
errors can be expressed in either frame.

Offsets file grammar (same conventions as the scenario file)::

    [formation]
    shape_euler = 0, 0, 0      # roll, pitch, yaw of the shape frame, radians
    min_separation = 2.0       # optional, meters

    [uav]                      # block repeats, one per UAV
    offset = 0, 0, 2
"""

from dataclasses import dataclass

import numpy as np

from .validation import ValidationError, as_vector, check_path


@dataclass(frozen=True)
class FormationSpec:
    """Per-UAV offsets (formation frame) plus the constant shape rotation."""

    offsets: tuple
    shape_euler: np.ndarray = (0.0, 0.0, 0.0)
    min_separation: float = 2.0

    def __post_init__(self):
        offsets = tuple(as_vector(o, 3, "offset") for o in self.offsets)
        if len(offsets) < 1:
            raise ValidationError("formation needs at least one UAV offset")
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(
            self, "shape_euler", as_vector(self.shape_euler, 3, "shape_euler")
        )
        for i in range(len(offsets)):
            for j in range(i + 1, len(offsets)):
                d = float(np.linalg.norm(offsets[i] - offsets[j]))
                if d == 0.0:
                    raise ValidationError(f"offsets {i} and {j} coincide")
                if d < self.min_separation:
                    raise ValidationError(
                        f"offsets {i} and {j} are {d:.3f} m apart, below the "
                        f"{self.min_separation} m separation requirement"
                    )

    @property
    def n_uavs(self):
        return len(self.offsets)

    def inertial_offsets(self):
        """Offsets rotated into the inertial frame, as an (n, 3) array."""
        rot = rotation_formation_to_inertial(self.shape_euler)
        return np.array([rot @ o for o in self.offsets])


@dataclass(frozen=True)
class FormationErrors:
    """Per-UAV tracking errors in the inertial and formation frames, (n, 3) each."""

    inertial: np.ndarray
    formation_frame: np.ndarray


def rotation_formation_to_inertial(euler) -> np.ndarray:
    """Rotation matrix from the formation frame to the inertial frame.

    ``euler`` holds (roll, pitch, yaw); the composition is the usual Z-Y-X
    aerospace sequence, so the result is orthonormal with determinant +1.
    """
    phi, theta, psi = as_vector(euler, 3, "euler")
    cph, sph = np.cos(phi), np.sin(phi)
    cth, sth = np.cos(theta), np.sin(theta)
    cps, sps = np.cos(psi), np.sin(psi)
    return np.array(
        [
            [cps * cth, cps * sth * sph - sps * cph, cps * sth * cph + sps * sph],
            [sps * cth, sps * sth * sph + cps * cph, sps * sth * cph - cps * sph],
            [-sth, cth * sph, cth * cph],
        ]
    )


def formation_centroid(positions) -> np.ndarray:
    """Arithmetic mean of the UAV positions."""
    pts = np.asarray(positions, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 1:
        raise ValidationError(f"positions must be a non-empty (n, 3) array, got {pts.shape}")
    return pts.mean(axis=0)


def position_errors(actual, desired, shape_euler=(0.0, 0.0, 0.0)) -> FormationErrors:
    """desired - actual per UAV, expressed in both frames.

    The formation-frame component applies the inverse shape rotation, which
    for an orthonormal matrix is its transpose.
    """
    act = np.asarray(actual, dtype=float)
    des = np.asarray(desired, dtype=float)
    if act.shape != des.shape:
        raise ValidationError(
            f"actual and desired shapes differ: {act.shape} vs {des.shape}"
        )
    inertial = des - act
    rot = rotation_formation_to_inertial(shape_euler)
    return FormationErrors(inertial=inertial, formation_frame=inertial @ rot)


def individual_trajectories(reference, spec: FormationSpec) -> list:
    """One path per UAV: every reference waypoint shifted by the rotated offset."""
    ref = check_path(reference)
    return [ref + off[None, :] for off in spec.inertial_offsets()]


# --- offsets file ------------------------------------------------------------

def load_formation(text) -> FormationSpec:
    """Parse an offsets file into a validated FormationSpec."""
    from .scenario import ScenarioError  # shared grammar conventions

    shape_euler = (0.0, 0.0, 0.0)
    min_separation = 2.0
    offsets = []
    current = None
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            if current not in ("formation", "uav"):
                raise ScenarioError(f"unknown section [{current}]", lineno)
            if current == "uav":
                offsets.append(None)
            continue
        if "=" not in line or current is None:
            raise ScenarioError(f"expected 'key = value' inside a section, got {line!r}", lineno)
        key, raw = (s.strip() for s in line.split("=", 1))
        try:
            values = [float(p.strip()) for p in raw.split(",")]
        except ValueError:
            raise ScenarioError(f"cannot parse number(s) from {raw!r}", lineno) from None
        if current == "formation" and key == "shape_euler":
            shape_euler = values
        elif current == "formation" and key == "min_separation":
            min_separation = values[0]
        elif current == "uav" and key == "offset":
            if offsets[-1] is not None:
                raise ScenarioError("duplicate offset in [uav] block", lineno)
            offsets[-1] = values
        else:
            raise ScenarioError(f"unknown key {key!r} in section [{current}]", lineno)
    if any(o is None for o in offsets):
        raise ScenarioError("[uav] block without an offset key")
    try:
        return FormationSpec(
            offsets=tuple(offsets), shape_euler=shape_euler, min_separation=min_separation
        )
    except ValidationError as exc:
        raise ScenarioError(str(exc)) from exc


def serialize_formation(spec: FormationSpec) -> str:
    lines = [
        "[formation]",
        "shape_euler = " + ", ".join(repr(float(v)) for v in spec.shape_euler),
        f"min_separation = {spec.min_separation!r}",
    ]
    for off in spec.offsets:
        lines += ["", "[uav]", "offset = " + ", ".join(repr(float(v)) for v in off)]
    return "\n".join(lines) + "\n"


#: Triangular three-UAV arrangement used throughout the examples.
DEFAULT_FORMATION = FormationSpec(
    offsets=((0.0, 0.0, 2.0), (3.0, 0.0, -1.0), (-3.0, 0.0, -1.0))
)
