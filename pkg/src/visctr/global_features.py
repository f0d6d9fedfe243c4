"""Global features f1..f19: whole-image statistics.

Feature groups:
  f1-f3   gray level histogram statistics
  f4-f7   dominant-color statistics on 512-bin RGB and HSV histograms
  f8-f9   deviation from the best-fitting hue harmony templates
  f10-f14 connected coherent component statistics
  f15-f17 hue distribution statistics
  f18-f19 lightness moments
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .config import ThresholdConfig
from .harmony import harmony_features
from .image import (
    ImageBuffer,
    gray_histogram,
    hsv_bin_index,
    hsv_histogram,
    lightness,
    rgb_histogram,
    to_gray,
    to_hsv,
)

EIGHT_CONN = np.ones((3, 3), dtype=bool)

HUE_BINS = 20
HUE_BIN_WIDTH = 360.0 / HUE_BINS


def arc_rad(a_deg, b_deg):
    """Shorter arc between two hue angles, in radians (in [0, pi])."""
    d = np.abs(np.mod(np.asarray(a_deg, dtype=np.float64) - b_deg, 360.0))
    return np.deg2rad(np.minimum(d, 360.0 - d))


def gray_level_features(img: ImageBuffer, cfg: ThresholdConfig) -> tuple[float, float, float]:
    """f1 gray contrast, f2 dominant gray bin count, f3 gray std.

    f1 is the span of the histogram after pruning 2.5% of the pixel mass
    from each tail at bin granularity (a partially surviving boundary bin
    is kept).
    """
    gray = to_gray(img)
    hist = gray_histogram(gray).counts
    n = gray.size
    cut = 0.025 * n
    cum = np.cumsum(hist)
    lo = int(np.searchsorted(cum, cut, side="right"))
    cum_top = np.cumsum(hist[::-1])
    hi = 255 - int(np.searchsorted(cum_top, cut, side="right"))
    f1 = float(max(hi - lo, 0))
    f2 = float(np.sum(hist >= cfg.c1 * hist.max()))
    f3 = float(np.std(gray))
    return f1, f2, f3


def color_distribution_features(img: ImageBuffer, cfg: ThresholdConfig,
                                hsv: np.ndarray | None = None) -> tuple[float, float, float, float]:
    """f4/f5 on the 512-bin RGB histogram, f6/f7 on the 512-bin HSV one.

    f4/f6 count dominant bins (>= c2 * largest bin); f5/f7 are the largest
    bin's share of the image.
    """
    n = img.n_pixels
    rgb = rgb_histogram(img).counts
    f4 = float(np.sum(rgb >= cfg.c2 * rgb.max()))
    f5 = float(rgb.max() / n)
    if hsv is None:
        hsv = to_hsv(img)
    hsvh = hsv_histogram(hsv).counts
    f6 = float(np.sum(hsvh >= cfg.c2 * hsvh.max()))
    f7 = float(hsvh.max() / n)
    return f4, f5, f6, f7


def harmony_deviation_features(hsv: np.ndarray, cfg: ThresholdConfig) -> tuple[float, float]:
    """f8 best-template deviation, f9 mean of the two best deviations."""
    return harmony_features(hsv[..., 0], hsv[..., 1], cfg.harmony_rotation_step)


@dataclass(frozen=True)
class CoherentComponent:
    """8-connected same-color-bin region at least c4_frac*|I| pixels big."""

    color_bin: int
    size: int
    first_pixel: int  # flat row-major index of the first (scanline) pixel


def coherent_components(hsv_idx: np.ndarray, min_size: float) -> list[CoherentComponent]:
    """All coherent components, sorted by (size desc, color bin, first pixel)."""
    comps = []
    for color in np.unique(hsv_idx):
        labels, n_lab = ndimage.label(hsv_idx == color, structure=EIGHT_CONN)
        if n_lab == 0:
            continue
        sizes = np.bincount(labels.ravel())[1:]
        flat = labels.ravel()
        # first scanline occurrence per label: reversed fancy assignment
        # keeps the last write, which is the smallest original index
        rev = np.arange(flat.size - 1, -1, -1)
        first_rev = np.zeros(n_lab + 1, dtype=np.int64)
        first_rev[flat[::-1]] = rev
        for lab in range(1, n_lab + 1):
            if sizes[lab - 1] >= min_size:
                comps.append(CoherentComponent(int(color), int(sizes[lab - 1]),
                                               int(first_rev[lab])))
    comps.sort(key=lambda c: (-c.size, c.color_bin, c.first_pixel))
    return comps


def coherent_component_features(img: ImageBuffer, cfg: ThresholdConfig,
                                hsv: np.ndarray | None = None
                                ) -> tuple[np.ndarray, np.ndarray]:
    """f10..f14 from coherent components of the 512-bin HSV index map.

    Returns (values, defined): f11..f14 are flagged undefined when there are
    no components, f12/f14 also when there is only one. Bin ranks order the
    512 HSV histogram bins by count descending, ties broken by lower index.
    """
    if hsv is None:
        hsv = to_hsv(img)
    idx = hsv_bin_index(hsv)
    n = img.n_pixels
    comps = coherent_components(idx, cfg.c4_frac * n)

    counts = np.bincount(idx.ravel(), minlength=512)
    order = np.lexsort((np.arange(512), -counts))
    rank_of_bin = np.empty(512, dtype=np.int64)
    rank_of_bin[order] = np.arange(1, 513)

    values = np.zeros(5)
    defined = np.array([True, False, False, False, False])
    values[0] = len(comps)
    if comps:
        values[1] = comps[0].size / n
        values[3] = rank_of_bin[comps[0].color_bin]
        defined[1] = defined[3] = True
    if len(comps) >= 2:
        values[2] = comps[1].size / n
        values[4] = rank_of_bin[comps[1].color_bin]
        defined[2] = defined[4] = True
    return values, defined


def filtered_hue_histogram(hsv: np.ndarray, floor: float,
                           mask: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """20-bin hue histogram over pixels with saturation and value >= floor.

    Returns (counts, surviving hue values in degrees). ``mask`` restricts the
    computation to a pixel subset.
    """
    keep = (hsv[..., 1] >= floor) & (hsv[..., 2] >= floor)
    if mask is not None:
        keep &= mask
    hues = hsv[..., 0][keep]
    bins = np.clip(np.floor(hues / HUE_BIN_WIDTH).astype(np.int64), 0, HUE_BINS - 1)
    counts = np.bincount(bins, minlength=HUE_BINS)
    return counts, hues


def hue_bin_centers_deg() -> np.ndarray:
    return (np.arange(HUE_BINS) + 0.5) * HUE_BIN_WIDTH


def max_pairwise_arc(bin_indices: np.ndarray) -> float:
    """Largest arc distance (radians) between centers of the given hue bins."""
    centers = hue_bin_centers_deg()[bin_indices]
    best = 0.0
    for i in range(len(centers)):
        best = max(best, float(arc_rad(centers[i + 1:], centers[i]).max(initial=0.0)))
    return best


def hue_distribution_features(hsv: np.ndarray, cfg: ThresholdConfig, n_pixels: int
                              ) -> tuple[np.ndarray, np.ndarray]:
    """f15 dominant hue count, f16 dominant hue contrast, f17 hue spread.

    Dominance is relative to the full image size (c5 * |I|), per the printed
    formula, even though only saturated/bright pixels populate the bins.
    f16 needs two dominant bins and f17 needs at least one surviving pixel;
    otherwise they are 0 with defined=False.
    """
    counts, hues = filtered_hue_histogram(hsv, cfg.sat_val_floor)
    dominant = np.flatnonzero(counts >= cfg.c5 * n_pixels)
    values = np.zeros(3)
    defined = np.array([True, False, False])
    values[0] = len(dominant)
    if len(dominant) >= 2:
        values[1] = max_pairwise_arc(dominant)
        defined[1] = True
    if hues.size > 0:
        values[2] = float(np.std(arc_rad(hues, 0.0)))
        defined[2] = True
    return values, defined


def lightness_features(img: ImageBuffer) -> tuple[float, float]:
    """f18 mean lightness, f19 population std of lightness."""
    light = lightness(img)
    return float(light.mean()), float(light.std())
