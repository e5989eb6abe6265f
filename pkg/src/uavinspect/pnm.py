"""Minimal portable anymap codec: 8-bit P2/P5 graymaps and P6 pixmaps.

Reads the three formats the detection pipeline accepts and writes P5
graymaps (masks use values {0, 255}). Maxval above 255 is rejected.
"""

import numpy as np

from .validation import ValidationError


class PnmError(ValidationError):
    """Malformed or unsupported PNM data."""


def _tokens(data):
    """Yield (token, next_offset) pairs, skipping whitespace and # comments."""
    i = 0
    n = len(data)
    while i < n:
        c = data[i:i + 1]
        if c.isspace():
            i += 1
            continue
        if c == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < n and not data[j:j + 1].isspace() and data[j:j + 1] != b"#":
            j += 1
        yield data[i:j], j
        i = j


def read_pnm(data: bytes) -> np.ndarray:
    """Decode PNM bytes to a (H, W) uint8 array, or (H, W, 3) for P6."""
    if not isinstance(data, (bytes, bytearray)):
        raise PnmError("expected raw bytes")
    reader = _tokens(bytes(data))
    try:
        magic, offset = next(reader)
    except StopIteration:
        raise PnmError("empty input") from None
    if magic not in (b"P2", b"P5", b"P6"):
        raise PnmError(f"unsupported magic {magic!r}; expected P2, P5 or P6")

    header = []
    for token, offset in reader:
        try:
            header.append(int(token))
        except ValueError:
            raise PnmError(f"bad header token {token!r}") from None
        if len(header) == 3:
            break
    if len(header) != 3:
        raise PnmError("truncated header")
    width, height, maxval = header
    if width <= 0 or height <= 0:
        raise PnmError(f"bad dimensions {width}x{height}")
    if not (0 < maxval <= 255):
        raise PnmError(f"only 8-bit images supported, maxval {maxval}")

    channels = 3 if magic == b"P6" else 1
    count = width * height * channels

    if magic == b"P2":
        values = []
        for token, offset in reader:
            try:
                values.append(int(token))
            except ValueError:
                raise PnmError(f"bad sample {token!r}") from None
            if len(values) == count:
                break
        if len(values) != count:
            raise PnmError(f"expected {count} samples, got {len(values)}")
        raster = np.array(values, dtype=np.int64)
    else:
        # binary rasters start after exactly one whitespace byte
        start = offset + 1
        raster = np.frombuffer(data[start:start + count], dtype=np.uint8).astype(np.int64)
        if raster.size != count:
            raise PnmError(f"expected {count} raster bytes, got {raster.size}")

    if raster.min() < 0 or raster.max() > maxval:
        raise PnmError(f"sample outside [0, {maxval}]")
    image = raster.astype(np.uint8)
    if channels == 3:
        return image.reshape(height, width, 3)
    return image.reshape(height, width)


def write_pgm(image, comment=None) -> bytes:
    """Encode a (H, W) uint8 array as a binary P5 graymap."""
    img = np.asarray(image)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise PnmError(f"expected (H, W) uint8 array, got {img.dtype} shape {img.shape}")
    height, width = img.shape
    header = f"P5\n{width} {height}\n255\n"
    if comment:
        header = f"P5\n# {comment}\n{width} {height}\n255\n"
    return header.encode("ascii") + img.tobytes()


def write_mask(mask) -> bytes:
    """Encode a boolean mask as a P5 graymap with values {0, 255}."""
    m = np.asarray(mask)
    if m.dtype != bool:
        raise PnmError("mask must be boolean")
    return write_pgm(np.where(m, 255, 0).astype(np.uint8))
