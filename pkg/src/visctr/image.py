"""Image decoding, color-space conversion and histogram primitives.

Everything downstream (global/local/advanced features) reads from the
``ImageBuffer`` produced here. All functions are pure and operate on
immutable numpy arrays, so they are safe to call concurrently.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

SUPPORTED_FORMATS = {"PNG", "JPEG", "GIF", "BMP"}


class UnsupportedFormat(ValueError):
    """Payload is not a supported static raster format."""


class CorruptPayload(ValueError):
    """Payload looks like a supported format but cannot be decoded."""


@dataclass(frozen=True)
class ImageBuffer:
    """Decoded raster: ``pixels`` is a (height, width, 3) uint8 RGB array."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image must be at least 1x1")
        if self.pixels.shape != (self.height, self.width, 3):
            raise ValueError(
                f"pixel array shape {self.pixels.shape} does not match "
                f"{self.height}x{self.width}x3"
            )
        if self.pixels.dtype != np.uint8:
            raise ValueError("pixels must be uint8")

    @property
    def n_pixels(self) -> int:
        return self.width * self.height


def decode_image(data: bytes) -> ImageBuffer:
    """Decode an encoded PNG/JPEG/GIF/BMP payload into an ImageBuffer.

    Animated payloads are rejected rather than silently reduced to their
    first frame. An alpha channel, if present, is dropped.
    """
    try:
        img = Image.open(io.BytesIO(data))
    except UnidentifiedImageError as exc:
        raise UnsupportedFormat("unrecognized image payload") from exc
    if img.format not in SUPPORTED_FORMATS:
        raise UnsupportedFormat(f"unsupported format {img.format!r}")
    if getattr(img, "is_animated", False) or getattr(img, "n_frames", 1) > 1:
        raise UnsupportedFormat("animated images are not supported")
    try:
        rgb = img.convert("RGB")
        arr = np.asarray(rgb, dtype=np.uint8)
    except OSError as exc:
        raise CorruptPayload(f"failed to decode payload: {exc}") from exc
    h, w = arr.shape[:2]
    return ImageBuffer(width=w, height=h, pixels=arr)


def to_gray(img: ImageBuffer) -> np.ndarray:
    """Per-pixel Rec.601 luma 0.299r + 0.587g + 0.114b, rounded half-up.

    Returns an int32 (height, width) array of gray levels in [0, 255].
    """
    p = img.pixels.astype(np.float64)
    luma = 0.299 * p[..., 0] + 0.587 * p[..., 1] + 0.114 * p[..., 2]
    return np.floor(luma + 0.5).astype(np.int32)


def to_hsv(img: ImageBuffer) -> np.ndarray:
    """Convert to HSV: hue in degrees [0, 360), saturation/value in [0, 1].

    The hue of an achromatic pixel (saturation 0) is 0 by convention.
    Returns a (height, width, 3) float64 array.
    """
    p = img.pixels.astype(np.float64) / 255.0
    r, g, b = p[..., 0], p[..., 1], p[..., 2]
    mx = np.max(p, axis=-1)
    mn = np.min(p, axis=-1)
    delta = mx - mn

    hue = np.zeros_like(mx)
    chromatic = delta > 0
    # piecewise hue by dominant channel
    rmax = chromatic & (mx == r)
    gmax = chromatic & (mx == g) & ~rmax
    bmax = chromatic & ~rmax & ~gmax
    with np.errstate(invalid="ignore", divide="ignore"):
        hue[rmax] = 60.0 * ((g[rmax] - b[rmax]) / delta[rmax])
        hue[gmax] = 60.0 * ((b[gmax] - r[gmax]) / delta[gmax]) + 120.0
        hue[bmax] = 60.0 * ((r[bmax] - g[bmax]) / delta[bmax]) + 240.0
    hue = np.mod(hue, 360.0)

    sat = np.zeros_like(mx)
    nz = mx > 0
    sat[nz] = delta[nz] / mx[nz]
    return np.stack([hue, sat, mx], axis=-1)


def lightness(img: ImageBuffer) -> np.ndarray:
    """HSL lightness (max + min) / 2 of the RGB channels, normalized to [0, 1]."""
    p = img.pixels.astype(np.float64)
    return (np.max(p, axis=-1) + np.min(p, axis=-1)) / (2.0 * 255.0)


@dataclass(frozen=True)
class Histogram:
    """Bin counts plus a description of the uniform quantization rule."""

    counts: np.ndarray
    rule: str

    def __post_init__(self):
        if np.any(self.counts < 0):
            raise ValueError("histogram counts must be non-negative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def quantized_histogram(values: np.ndarray, levels: int, lo: float, hi: float) -> Histogram:
    """Histogram of ``values`` over ``levels`` uniform bins covering [lo, hi].

    Values equal to ``hi`` land in the last bin.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    idx = np.floor((v - lo) / (hi - lo) * levels).astype(np.int64)
    idx = np.clip(idx, 0, levels - 1)
    counts = np.bincount(idx, minlength=levels)
    return Histogram(counts=counts, rule=f"uniform:{lo}:{hi}:{levels}")


def gray_histogram(gray: np.ndarray) -> Histogram:
    """256-bin histogram of integer gray levels."""
    counts = np.bincount(np.asarray(gray).ravel(), minlength=256)
    return Histogram(counts=counts, rule="gray256")


def rgb_bin_index(img: ImageBuffer) -> np.ndarray:
    """Joint 512-bin index map: each RGB channel quantized to 8 levels.

    Index layout is r_q*64 + g_q*8 + b_q.
    """
    q = (img.pixels >> 5).astype(np.int64)
    return q[..., 0] * 64 + q[..., 1] * 8 + q[..., 2]


def hsv_bin_index(hsv: np.ndarray) -> np.ndarray:
    """Joint 512-bin index map with H, S, V each quantized to 8 levels.

    Index layout is h_q*64 + s_q*8 + v_q, mirroring the RGB layout.
    """
    hq = np.clip(np.floor(hsv[..., 0] / 45.0), 0, 7).astype(np.int64)
    sq = np.clip(np.floor(hsv[..., 1] * 8.0), 0, 7).astype(np.int64)
    vq = np.clip(np.floor(hsv[..., 2] * 8.0), 0, 7).astype(np.int64)
    return hq * 64 + sq * 8 + vq


def rgb_histogram(img: ImageBuffer) -> Histogram:
    """512-bin joint RGB histogram."""
    counts = np.bincount(rgb_bin_index(img).ravel(), minlength=512)
    return Histogram(counts=counts, rule="rgb8x8x8")


def hsv_histogram(hsv: np.ndarray) -> Histogram:
    """512-bin joint HSV histogram."""
    counts = np.bincount(hsv_bin_index(hsv).ravel(), minlength=512)
    return Histogram(counts=counts, rule="hsv8x8x8")
