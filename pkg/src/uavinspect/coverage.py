"""Camera coverage assessment: footprint, standoff distance, and viewpoint tiling.

Determines how far from the surface the cameras must fly to resolve the
smallest feature of interest, and lays out the grid of view configurations
that covers a planar surface patch with the requested image overlap.
"""

from dataclasses import dataclass

import numpy as np

from .validation import ValidationError, as_vector, check_positive, check_unit_vector


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera description used by the coverage computations.

    resolution_px is the pixel count along the footprint dimension,
    focal_length and sensor_size are in meters.
    """

    resolution_px: float
    focal_length: float
    sensor_size: float

    def __post_init__(self):
        check_positive(self.resolution_px, "resolution_px")
        check_positive(self.focal_length, "focal_length")
        check_positive(self.sensor_size, "sensor_size")


@dataclass(frozen=True)
class CoverageRequest:
    """What the inspection must resolve and how much image overlap it needs."""

    smallest_feature: float
    overlap_fraction: float
    surface_extent: tuple

    def __post_init__(self):
        check_positive(self.smallest_feature, "smallest_feature")
        if not (0.0 <= self.overlap_fraction <= 1.0):
            raise ValidationError(
                f"overlap_fraction must lie in [0, 1], got {self.overlap_fraction}"
            )
        extent = as_vector(self.surface_extent, 2, "surface_extent")
        check_positive(extent, "surface_extent")
        object.__setattr__(self, "surface_extent", (float(extent[0]), float(extent[1])))


@dataclass(frozen=True)
class ViewConfiguration:
    """A single camera pose: position, viewing axis, footprint side, standoff."""

    position: np.ndarray
    orientation: np.ndarray
    footprint: float
    standoff: float

    def __post_init__(self):
        object.__setattr__(self, "position", as_vector(self.position, 3, "position"))
        object.__setattr__(
            self, "orientation", check_unit_vector(self.orientation, "orientation")
        )
        check_positive(self.standoff, "standoff")


def field_of_view(camera: CameraModel, smallest_feature: float) -> float:
    """Footprint side length that resolves the smallest feature: a = r_c * s_f / 2."""
    check_positive(smallest_feature, "smallest_feature")
    return 0.5 * camera.resolution_px * smallest_feature


def standoff_distance(camera: CameraModel, footprint: float) -> float:
    """Camera-to-surface distance producing the given footprint: d = a * f / s_s."""
    check_positive(footprint, "footprint")
    return footprint * camera.focal_length / camera.sensor_size


def effective_footprint(footprint: float, overlap_fraction: float) -> float:
    """Footprint length left after removing the overlapped band: g = (1 - o) * a."""
    check_positive(footprint, "footprint")
    if not (0.0 <= overlap_fraction <= 1.0):
        raise ValidationError(
            f"overlap_fraction must lie in [0, 1], got {overlap_fraction}"
        )
    return (1.0 - overlap_fraction) * footprint


def surface_tangents(normal):
    """Orthonormal in-plane axes spanning a patch with the given normal.

    These are the grid axes of :func:`generate_viewpoints`: the patch extends
    from its origin corner along the returned directions.
    """
    normal = check_unit_vector(normal, "surface_normal")
    seed = np.array([0.0, 0.0, 1.0])
    if abs(float(np.dot(seed, normal))) > 0.9:
        seed = np.array([1.0, 0.0, 0.0])
    t1 = np.cross(normal, seed)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(normal, t1)
    return t1, t2


def generate_viewpoints(
    request: CoverageRequest,
    camera: CameraModel,
    surface_origin,
    surface_normal,
) -> list:
    """Grid of view configurations covering a planar patch.

    The patch spans ``request.surface_extent`` from ``surface_origin`` (its
    corner) along two tangent axes. Viewpoints sit at the standoff distance
    along the normal, evenly spread so adjacent footprints keep the requested
    overlap; every camera axis points at the surface (-normal).
    """
    origin = as_vector(surface_origin, 3, "surface_origin")
    normal = check_unit_vector(surface_normal, "surface_normal")
    footprint = field_of_view(camera, request.smallest_feature)
    step = effective_footprint(footprint, request.overlap_fraction)
    if step <= 0.0:
        raise ValidationError(
            "full overlap (overlap_fraction = 1) leaves no coverage progress per shot"
        )
    standoff = standoff_distance(camera, footprint)
    t1, t2 = surface_tangents(normal)

    views = []
    extent = request.surface_extent
    counts = [max(1, int(np.ceil(e / step))) for e in extent]
    for i in range(counts[0]):
        u = extent[0] * (i + 0.5) / counts[0]
        for j in range(counts[1]):
            v = extent[1] * (j + 0.5) / counts[1]
            position = origin + u * t1 + v * t2 + standoff * normal
            views.append(
                ViewConfiguration(
                    position=position,
                    orientation=-normal,
                    footprint=footprint,
                    standoff=standoff,
                )
            )
    return views
