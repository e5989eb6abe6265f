"""Histogram-based surface defect detection.

A single variance-maximizing threshold splits the intensity histogram into
dark and bright classes; the detector then re-applies that split to the dark
band only, peeling off brighter material until the contrast between the last
dark band and its background exceeds a stop value. The final threshold
segments the defect. Includes the single-pass baseline, pixel-level
precision/recall/F scoring, and a deterministic synthetic crack generator.
"""

from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator

from .validation import ValidationError, check_binary_mask, check_gray_image


class DegenerateHistogramError(ValidationError):
    """Histogram slice has fewer than two populated levels."""


@dataclass(frozen=True)
class RegionSlice:
    """Inclusive intensity band [lower, upper] with its pixel population."""

    lower: int
    upper: int
    pixel_count: int = 0

    def __post_init__(self):
        if not (0 <= self.lower <= self.upper <= 255):
            raise ValidationError(
                f"slice bounds must satisfy 0 <= lower <= upper <= 255, "
                f"got [{self.lower}, {self.upper}]"
            )

    @classmethod
    def of(cls, hist, lower=0, upper=255):
        hist = check_histogram(hist)
        return cls(lower=lower, upper=upper,
                   pixel_count=int(hist[lower:upper + 1].sum()))


@dataclass(frozen=True)
class SegmentationResult:
    """Outcome of the iterative split: thresholds, contrasts, and the mask."""

    final_threshold: int
    iteration_thresholds: tuple
    contrasts: tuple
    converged: bool
    mask: np.ndarray = None


@dataclass(frozen=True)
class DetectionMetrics:
    """Pixel-level confusion counts and the derived scores."""

    true_pos: int
    false_pos: int
    false_neg: int
    true_neg: int
    precision: float
    recall: float
    f_measure: float


def check_histogram(hist):
    h = np.asarray(hist)
    if h.shape != (256,):
        raise ValidationError(f"histogram must have 256 bins, got shape {h.shape}")
    if np.any(h < 0):
        raise ValidationError("histogram counts must be non-negative")
    return h.astype(np.int64)


def to_grayscale(image) -> np.ndarray:
    """ITU-style luma conversion of an 8-bit RGB raster."""
    img = np.asarray(image)
    if img.ndim == 2:
        return check_gray_image(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValidationError(f"expected (H, W, 3) RGB raster, got shape {img.shape}")
    if img.dtype != np.uint8:
        raise ValidationError(f"expected 8-bit input, got dtype {img.dtype}")
    luma = 0.299 * img[:, :, 0] + 0.587 * img[:, :, 1] + 0.114 * img[:, :, 2]
    return np.clip(np.rint(luma), 0, 255).astype(np.uint8)


def histogram(image) -> np.ndarray:
    """256-bin intensity counts of a grayscale image."""
    img = check_gray_image(image)
    return np.bincount(img.ravel(), minlength=256).astype(np.int64)


def _variance_curve(hist, region, normalized=True):
    """Between-class variance for every cut T in (lower, upper), plus candidates.

    Class sums stay integer-exact; each candidate's value is computed as
    w0 * w1 * (m0 - m1) * (m0 - m1) so a direct-summation oracle reproduces
    the floats bit for bit.
    """
    counts = hist[region.lower:region.upper + 1]
    levels = np.arange(region.lower, region.upper + 1, dtype=np.int64)
    total = counts.sum()
    weighted = counts * levels

    n0 = np.cumsum(counts)[:-1]          # population of [lower, T]
    s0 = np.cumsum(weighted)[:-1]
    n1 = total - n0
    s1 = weighted.sum() - s0

    candidates = levels[:-1]             # T in [lower, upper - 1]
    valid = (n0 > 0) & (n1 > 0)
    w0 = np.where(valid, n0, 1) / total
    w1 = np.where(valid, n1, 1) / total
    m0 = s0 / np.where(valid, n0, 1)
    m1 = s1 / np.where(valid, n1, 1)
    diff = m0 - m1
    sigma2 = np.where(valid, w0 * w1 * diff * diff, 0.0)

    if not normalized:
        # as printed in the source material: raw class sums instead of means
        diff = s0.astype(float) - s1.astype(float)
        sigma2 = np.where(valid, w0 * w1 * diff * diff, 0.0)

    # cuts are strictly interior: T in (lower, upper)
    keep = candidates > region.lower
    return candidates[keep], sigma2[keep]


def between_class_variance(hist, region: RegionSlice, threshold, normalized=True) -> float:
    """Variance between the classes [lower, T] and [T+1, upper] of one slice."""
    hist = check_histogram(hist)
    if not (region.lower < threshold < region.upper):
        raise ValidationError(
            f"threshold {threshold} must lie strictly inside ({region.lower}, {region.upper})"
        )
    candidates, sigma2 = _variance_curve(hist, region, normalized)
    return float(sigma2[np.searchsorted(candidates, threshold)])


def otsu_threshold(hist, region: RegionSlice = None, normalized=True) -> int:
    """Variance-maximizing cut of a histogram slice; ties take the smallest T."""
    hist = check_histogram(hist)
    if region is None:
        region = RegionSlice.of(hist)
    populated = np.count_nonzero(hist[region.lower:region.upper + 1])
    if populated < 2:
        raise DegenerateHistogramError(
            f"slice [{region.lower}, {region.upper}] has {populated} populated level(s)"
        )
    if region.upper == region.lower + 1:
        # adjacent populated levels admit only the cut at the lower level
        return int(region.lower)
    candidates, sigma2 = _variance_curve(hist, region, normalized)
    return int(candidates[np.argmax(sigma2)])


def interclass_contrast(mean_dark, mean_bright) -> float:
    """Normalized mean separation |a - b| / (a + b) of two intensity classes."""
    if mean_dark < 0 or mean_bright < 0:
        raise ValidationError("class means must be non-negative")
    total = mean_dark + mean_bright
    if total <= 0:
        raise ValidationError("at least one class mean must be positive")
    return abs(mean_dark - mean_bright) / total


def _band_mean(hist, lower, upper):
    counts = hist[lower:upper + 1]
    n = counts.sum()
    if n == 0:
        return None
    levels = np.arange(lower, upper + 1, dtype=np.int64)
    return float((counts * levels).sum() / n)


def iterative_threshold(hist, contrast_stop=0.4, normalized=True) -> SegmentationResult:
    """Repeated dark-band splitting until interclass contrast clears the stop.

    Each round cuts the current dark band at its variance-maximizing
    threshold; the sub-threshold side becomes the next dark band and the rest
    of the band is the background whose contrast against the dark side decides
    termination. When a cut leaves the dark side empty (an exact plateau tie
    landed on the darkest populated level), that level itself is the dark
    class and the reported threshold moves one level up so strict-below
    segmentation still captures it.
    """
    hist = check_histogram(hist)
    if not (0.0 < contrast_stop < 1.0):
        raise ValidationError(f"contrast_stop must lie in (0, 1), got {contrast_stop}")

    lower, upper = 0, 255
    thresholds = []
    contrasts = []
    final_threshold = None
    converged = False

    while True:
        populated = np.count_nonzero(hist[lower:upper + 1])
        if populated < 2:
            if not thresholds:
                raise DegenerateHistogramError(
                    "histogram needs at least two populated levels to split"
                )
            break  # safety exit: nothing left to split, keep last threshold

        t_star = otsu_threshold(hist, RegionSlice(lower, upper), normalized)
        thresholds.append(t_star)

        dark_mean = _band_mean(hist, lower, t_star - 1) if t_star > lower else None
        if dark_mean is None:
            # plateau tie landed on the darkest populated level: that level is
            # the dark class; shift the cut above it for strict-below masking
            dark_mean = float(t_star)
            bright_mean = _band_mean(hist, t_star + 1, upper)
            contrast = interclass_contrast(dark_mean, bright_mean)
            contrasts.append(contrast)
            final_threshold = t_star + 1
            converged = contrast > contrast_stop
            break

        bright_mean = _band_mean(hist, t_star, upper)
        contrast = interclass_contrast(dark_mean, bright_mean)
        contrasts.append(contrast)
        final_threshold = t_star
        if contrast > contrast_stop:
            converged = True
            break
        upper = t_star - 1

    return SegmentationResult(
        final_threshold=int(final_threshold),
        iteration_thresholds=tuple(thresholds),
        contrasts=tuple(contrasts),
        converged=converged,
    )


def segment(image, threshold, polarity="dark") -> np.ndarray:
    """Binary defect mask: intensities strictly below the threshold.

    Bright-defect inputs are mirrored (255 - v) before thresholding.
    """
    img = check_gray_image(image)
    if polarity == "dark":
        return img < threshold
    if polarity == "bright":
        return (255 - img.astype(np.int64)) < threshold
    raise ValidationError(f"polarity must be 'dark' or 'bright', got {polarity!r}")


def detect_defects(image, contrast_stop=0.4, polarity="dark", normalized=True) -> SegmentationResult:
    """Full detection pass on one image: histogram, iterative split, mask."""
    if polarity not in ("dark", "bright"):
        raise ValidationError(f"polarity must be 'dark' or 'bright', got {polarity!r}")
    img = check_gray_image(image)
    work = img if polarity == "dark" else (255 - img.astype(np.int64)).astype(np.uint8)
    result = iterative_threshold(histogram(work), contrast_stop, normalized)
    mask = work < result.final_threshold
    return replace(result, mask=mask)


def f_measure(mask, truth) -> DetectionMetrics:
    """Pixel precision/recall/F of a predicted mask against ground truth.

    Empty-denominator conventions: precision and recall fall to 0 when they
    have no support, and F is 0 when both do.
    """
    pred = check_binary_mask(mask, "mask")
    ref = check_binary_mask(truth, "truth")
    if pred.shape != ref.shape:
        raise ValidationError(f"mask shape {pred.shape} != truth shape {ref.shape}")
    tp = int(np.count_nonzero(pred & ref))
    fp = int(np.count_nonzero(pred & ~ref))
    fn = int(np.count_nonzero(~pred & ref))
    tn = int(np.count_nonzero(~pred & ~ref))
    precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
    recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    f = 2.0 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
    return DetectionMetrics(
        true_pos=tp, false_pos=fp, false_neg=fn, true_neg=tn,
        precision=precision, recall=recall, f_measure=f,
    )


def synth_defect_image(width, height, background_level=200, defect_level=40,
                       noise_sigma=10.0, crack_width=3, seed=0):
    """Deterministic synthetic crack image plus its exact truth mask.

    A random walk crosses the frame top to bottom, painted ``crack_width``
    pixels wide at the defect level on a uniform background; Gaussian pixel
    noise (clamped to [0, 255]) is added on top. Returns (image, truth).
    """
    if defect_level >= background_level:
        raise ValidationError("defect_level must be darker than background_level")
    if not (0 <= defect_level <= 255 and 0 <= background_level <= 255):
        raise ValidationError("levels must lie in [0, 255]")
    if crack_width < 1 or crack_width >= min(width, height):
        raise ValidationError(
            f"crack_width {crack_width} does not fit a {width}x{height} image"
        )
    rng = np.random.default_rng(seed)
    truth = np.zeros((height, width), dtype=bool)
    half = crack_width // 2
    col = int(rng.integers(width // 4, 3 * width // 4))
    for row in range(height):
        col = int(np.clip(col + rng.integers(-2, 3), half, width - 1 - half))
        lo = max(0, col - half)
        hi = min(width, col - half + crack_width)
        truth[row, lo:hi] = True

    image = np.full((height, width), float(background_level))
    image[truth] = float(defect_level)
    if noise_sigma > 0:
        image = image + rng.normal(0.0, noise_sigma, size=image.shape)
    image = np.clip(np.rint(image), 0, 255).astype(np.uint8)
    return image, truth


# --- sklearn-style facade ----------------------------------------------------

class IterativeThresholdDetector(BaseEstimator):
    """Estimator wrapper: fit learns the threshold, predict produces masks."""

    def __init__(self, contrast_stop=0.4, polarity="dark", normalized=True):
        self.contrast_stop = contrast_stop
        self.polarity = polarity
        self.normalized = normalized

    def fit(self, image, y=None):
        result = detect_defects(
            image, self.contrast_stop, self.polarity, self.normalized
        )
        self.result_ = result
        self.threshold_ = result.final_threshold
        self.iteration_thresholds_ = result.iteration_thresholds
        self.contrasts_ = result.contrasts
        self.converged_ = result.converged
        return self

    def predict(self, image):
        return segment(image, self.threshold_, self.polarity)

    def fit_predict(self, image, y=None):
        return self.fit(image).result_.mask


class OtsuDetector(BaseEstimator):
    """Single-pass variance-maximizing baseline with the same API."""

    def __init__(self, polarity="dark", normalized=True):
        self.polarity = polarity
        self.normalized = normalized

    def fit(self, image, y=None):
        img = check_gray_image(image)
        work = img if self.polarity == "dark" else (255 - img.astype(np.int64)).astype(np.uint8)
        self.threshold_ = otsu_threshold(histogram(work), normalized=self.normalized)
        return self

    def predict(self, image):
        return segment(image, self.threshold_, self.polarity)

    def fit_predict(self, image, y=None):
        return self.fit(image).predict(image)
