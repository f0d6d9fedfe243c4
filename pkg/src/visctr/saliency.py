"""Spectral-residual saliency map and its connected components.

The saliency map comes from the spectral residual of the log-amplitude
spectrum: the grayscale image is downsampled to width 64 (aspect preserved),
the residual between the log-amplitude and its 3x3 box-filtered version is
exponentiated back with the original phase, and the squared magnitude of the
inverse transform is smoothed with a Gaussian (sigma 2.5) and upsampled to
the original size. Pixels above 3x the mean saliency are salient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .image import ImageBuffer, to_gray

WORK_WIDTH = 64
BOX_SIZE = 3
BLUR_SIGMA = 2.5
THRESHOLD_FACTOR = 3.0

EIGHT_CONN = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class SaliencyMap:
    """Per-pixel saliency at full resolution plus the binarized map."""

    tau: np.ndarray
    mean_tau: float
    binary: np.ndarray


@dataclass(frozen=True)
class SalientComponent:
    size: int
    center: tuple[float, float]  # (x, y), normalized to [0, 1]
    mean_tau: float
    first_pixel: int  # flat scanline index, used for deterministic ties


@dataclass(frozen=True)
class SalientComponents:
    components: list[SalientComponent]  # sorted by (size desc, first pixel)
    background_count: int
    largest_background: int  # pixels in the largest background component


def bilinear_resize(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample with pixel-center alignment (align-corners false)."""
    h, w = arr.shape
    ys = np.clip((np.arange(out_h) + 0.5) * h / out_h - 0.5, 0, h - 1)
    xs = np.clip((np.arange(out_w) + 0.5) * w / out_w - 0.5, 0, w - 1)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    a = arr[np.ix_(y0, x0)]
    b = arr[np.ix_(y0, x1)]
    c = arr[np.ix_(y1, x0)]
    d = arr[np.ix_(y1, x1)]
    return (a * (1 - fy) * (1 - fx) + b * (1 - fy) * fx
            + c * fy * (1 - fx) + d * fy * fx)


def spectral_saliency(img: ImageBuffer) -> SaliencyMap:
    """Hou-style spectral-residual saliency, upsampled to full resolution."""
    gray = to_gray(img).astype(np.float64)
    h, w = gray.shape
    if w > WORK_WIDTH:
        small_w = WORK_WIDTH
        small_h = max(1, round(h * WORK_WIDTH / w))
        small = bilinear_resize(gray, small_h, small_w)
    else:
        small = gray

    spectrum = np.fft.fft2(small)
    amplitude = np.abs(spectrum)
    # unit phase, defined as 0 where the amplitude is exactly 0 so that
    # empty frequencies stay empty instead of turning into spurious energy
    with np.errstate(invalid="ignore", divide="ignore"):
        phase = np.where(amplitude > 0, spectrum / np.where(amplitude > 0, amplitude, 1.0), 0.0)
    log_amp = np.log(amplitude + 1e-12)
    residual = log_amp - ndimage.uniform_filter(log_amp, size=BOX_SIZE, mode="nearest")
    recon = np.fft.ifft2(np.exp(residual) * phase)
    tau_small = np.abs(recon) ** 2
    tau_small = ndimage.gaussian_filter(tau_small, sigma=BLUR_SIGMA, mode="nearest")

    if tau_small.shape != gray.shape:
        tau = bilinear_resize(tau_small, h, w)
    else:
        tau = tau_small
    mean_tau = float(tau.mean())
    binary = tau > THRESHOLD_FACTOR * mean_tau
    return SaliencyMap(tau=tau, mean_tau=mean_tau, binary=binary)


def _component_stats(mask: np.ndarray, tau: np.ndarray) -> list[SalientComponent]:
    labels, n_lab = ndimage.label(mask, structure=EIGHT_CONN)
    if n_lab == 0:
        return []
    h, w = mask.shape
    flat = labels.ravel()
    sizes = np.bincount(flat, minlength=n_lab + 1)
    tau_sum = np.bincount(flat, weights=tau.ravel(), minlength=n_lab + 1)
    rows_idx, cols_idx = np.indices(mask.shape)
    row_sum = np.bincount(flat, weights=rows_idx.ravel(), minlength=n_lab + 1)
    col_sum = np.bincount(flat, weights=cols_idx.ravel(), minlength=n_lab + 1)
    rev = np.arange(flat.size - 1, -1, -1)
    first = np.zeros(n_lab + 1, dtype=np.int64)
    first[flat[::-1]] = rev

    comps = []
    for lab in range(1, n_lab + 1):
        size = int(sizes[lab])
        cx = (col_sum[lab] / size + 0.5) / w
        cy = (row_sum[lab] / size + 0.5) / h
        comps.append(SalientComponent(size=size, center=(float(cx), float(cy)),
                                      mean_tau=float(tau_sum[lab] / size),
                                      first_pixel=int(first[lab])))
    comps.sort(key=lambda c: (-c.size, c.first_pixel))
    return comps


def salient_components(sal: SaliencyMap) -> SalientComponents:
    """8-connected components of the binary map and of its complement."""
    comps = _component_stats(sal.binary, sal.tau)
    bg_labels, bg_n = ndimage.label(~sal.binary, structure=EIGHT_CONN)
    if bg_n == 0:
        largest_bg = 0
    else:
        largest_bg = int(np.bincount(bg_labels.ravel())[1:].max())
    return SalientComponents(components=comps, background_count=int(bg_n),
                             largest_background=largest_bg)
