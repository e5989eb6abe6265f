"""Input validation helpers shared across the toolkit.

All helpers raise :class:`ValidationError` (a ``ValueError``) so callers and
the CLI can report bad inputs uniformly.
"""

import numpy as np


class ValidationError(ValueError):
    """Raised when an input violates a documented contract."""


def as_vector(value, dim=3, name="vector"):
    """Coerce to a float64 vector of the given length, rejecting non-finite entries."""
    v = np.asarray(value, dtype=float)
    if v.shape != (dim,):
        raise ValidationError(f"{name} must have {dim} components, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"{name} contains non-finite values: {v}")
    return v


def check_positive(value, name):
    if not np.all(np.asarray(value) > 0):
        raise ValidationError(f"{name} must be positive, got {value}")
    return value


def check_nonnegative(value, name):
    if not np.all(np.asarray(value) >= 0):
        raise ValidationError(f"{name} must be non-negative, got {value}")
    return value


def check_in_range(value, lo, hi, name):
    if not (lo <= value <= hi):
        raise ValidationError(f"{name} must lie in [{lo}, {hi}], got {value}")
    return value


def check_unit_vector(value, name="direction", tol=1e-6):
    v = as_vector(value, 3, name)
    norm = float(np.linalg.norm(v))
    if abs(norm - 1.0) > tol:
        raise ValidationError(f"{name} must be unit length, got |v| = {norm}")
    return v


def check_path(waypoints, name="path"):
    """Coerce to a (K, 3) float64 waypoint array with K >= 2."""
    pts = np.asarray(waypoints, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValidationError(f"{name} must be a (K, 3) array, got shape {pts.shape}")
    if pts.shape[0] < 2:
        raise ValidationError(f"{name} needs at least 2 waypoints, got {pts.shape[0]}")
    if not np.all(np.isfinite(pts)):
        raise ValidationError(f"{name} contains non-finite coordinates")
    return pts


def check_gray_image(image, name="image"):
    """Coerce to a 2-D uint8 intensity raster."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValidationError(f"{name} must be 2-D grayscale, got shape {img.shape}")
    if img.size == 0:
        raise ValidationError(f"{name} is empty")
    if img.dtype != np.uint8:
        if not np.issubdtype(img.dtype, np.integer):
            raise ValidationError(f"{name} must hold 8-bit integers, got dtype {img.dtype}")
        if img.min() < 0 or img.max() > 255:
            raise ValidationError(f"{name} values outside [0, 255]")
        img = img.astype(np.uint8)
    return img


def check_binary_mask(mask, name="mask"):
    """Coerce to a 2-D boolean mask; accepts {0,1} or {0,255} integer rasters."""
    m = np.asarray(mask)
    if m.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {m.shape}")
    if m.dtype == bool:
        return m
    values = np.unique(m)
    if not np.all(np.isin(values, (0, 1))) and not np.all(np.isin(values, (0, 255))):
        raise ValidationError(f"{name} must be binary, found values {values[:8]}")
    return m > 0
