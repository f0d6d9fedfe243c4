"""Hue-wheel harmony templates and the deviation-from-template statistic.

A template is a set of sectors on the 360-degree hue wheel; an image fits a
template well when its saturated hues lie inside (or near) the sectors of
some rotation of it. The deviation of an image from a template is the
saturation-weighted mean arc distance of each pixel's hue to the nearest
sector point, minimized over a rotation grid. Arc distances are measured in
radians, so a single deviation lies in [0, pi].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# resolution of the internal hue profile: 0.05 degrees per bin
_BINS_PER_DEGREE = 20
_N_BINS = 360 * _BINS_PER_DEGREE


@dataclass(frozen=True)
class HarmonyTemplate:
    """Named sector layout; sectors are (center offset deg, width deg)."""

    name: str
    sectors: tuple[tuple[float, float], ...]


# Sector sizes: 93.6 deg = 26% of the wheel, 18 deg = 5%, 79.2 deg = 22%,
# 180 deg = 50%. Two-sector templates have centers 180 deg apart except L
# (90 deg). N admits no hues at all (achromatic template).
TEMPLATES: tuple[HarmonyTemplate, ...] = (
    HarmonyTemplate("i", ((0.0, 18.0),)),
    HarmonyTemplate("V", ((0.0, 93.6),)),
    HarmonyTemplate("L", ((0.0, 18.0), (90.0, 79.2))),
    HarmonyTemplate("I", ((0.0, 18.0), (180.0, 18.0))),
    HarmonyTemplate("T", ((0.0, 180.0),)),
    HarmonyTemplate("Y", ((0.0, 93.6), (180.0, 18.0))),
    HarmonyTemplate("X", ((0.0, 93.6), (180.0, 93.6))),
    HarmonyTemplate("N", ()),
)

TEMPLATE_NAMES = tuple(t.name for t in TEMPLATES)


def _circular_arc_deg(a: np.ndarray, b: float) -> np.ndarray:
    """Shorter arc between hue angles, in degrees (result in [0, 180])."""
    d = np.abs(np.mod(a - b, 360.0))
    return np.minimum(d, 360.0 - d)


def template_distance_deg(hues_deg: np.ndarray, template: HarmonyTemplate,
                          rotation_deg: float = 0.0) -> np.ndarray:
    """Arc distance (degrees) from each hue to the rotated template's sectors.

    A hue inside a sector is at distance 0. The empty template N is at the
    maximum arc distance (180 degrees) from every hue.
    """
    hues_deg = np.asarray(hues_deg, dtype=np.float64)
    if not template.sectors:
        return np.full(hues_deg.shape, 180.0)
    dist = np.full(hues_deg.shape, np.inf)
    for center, width in template.sectors:
        d_center = _circular_arc_deg(hues_deg, center + rotation_deg)
        d = np.maximum(d_center - width / 2.0, 0.0)
        dist = np.minimum(dist, d)
    return dist


def _template_profile(template: HarmonyTemplate) -> np.ndarray:
    """Distance (radians) from each fine hue-bin center to the template at
    rotation 0."""
    centers = (np.arange(_N_BINS) + 0.5) / _BINS_PER_DEGREE
    return np.deg2rad(template_distance_deg(centers, template))


_PROFILES = np.stack([_template_profile(t) for t in TEMPLATES])
_PROFILES_FFT = np.fft.rfft(_PROFILES, axis=1)


def harmony_deviations(hue_deg: np.ndarray, sat: np.ndarray,
                       step_deg: float = 1.0) -> np.ndarray:
    """Best-rotation deviation from each of the 8 templates.

    Returns an array of 8 values (radians), ordered as TEMPLATES. The
    deviation is (1/n) * sum_x sat(x) * arc(hue(x), nearest sector point),
    minimized over rotations on a ``step_deg`` grid, where n counts all
    pixels (desaturated pixels contribute zero weight but still divide).

    Pixel hues are accumulated into 0.05-degree bins before the rotation
    sweep; the induced error is below 0.025 degrees, far inside the
    2*step_deg tolerance the rotation grid itself carries.
    """
    hue_deg = np.asarray(hue_deg, dtype=np.float64).ravel()
    sat = np.asarray(sat, dtype=np.float64).ravel()
    n = hue_deg.size
    if n == 0:
        raise ValueError("need at least one pixel")
    shift_per_step = step_deg * _BINS_PER_DEGREE
    if abs(shift_per_step - round(shift_per_step)) > 1e-9:
        raise ValueError("harmony rotation step must be a multiple of 0.05 degrees")
    shift_per_step = int(round(shift_per_step))

    bins = np.floor(np.mod(hue_deg, 360.0) * _BINS_PER_DEGREE).astype(np.int64)
    bins = np.clip(bins, 0, _N_BINS - 1)
    weight = np.bincount(bins, weights=sat, minlength=_N_BINS)

    # gamma(alpha) for every cyclic shift at once: the sum over bins of
    # weight[b] * profile[b - k] is a circular cross-correlation
    w_fft = np.fft.rfft(weight)
    corr = np.fft.irfft(w_fft[None, :] * np.conj(_PROFILES_FFT), n=_N_BINS, axis=1)

    rotations = np.arange(0, int(np.ceil(360.0 / step_deg)))
    shifts = (rotations * shift_per_step) % _N_BINS
    gammas = corr[:, shifts].min(axis=1) / n
    return np.maximum(gammas, 0.0)


def harmony_features(hue_deg: np.ndarray, sat: np.ndarray,
                     step_deg: float = 1.0) -> tuple[float, float]:
    """(best deviation, mean of the two best deviations) over all templates."""
    gammas = harmony_deviations(hue_deg, sat, step_deg)
    two = np.sort(gammas)[:2]
    return float(two[0]), float(two.mean())
