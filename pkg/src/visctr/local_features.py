"""Local features f20..f32: statistics over normalized-cut segments.

All hue statistics reuse the 20-bin filtered hue histogram from the global
module, restricted per segment. "Largest segment" ties are broken by lower
segment id (creation order).
"""

from __future__ import annotations

import numpy as np

from .config import ThresholdConfig
from .global_features import filtered_hue_histogram, max_pairwise_arc
from .harmony import harmony_features
from .image import ImageBuffer, lightness, to_hsv
from .segmentation import Segmentation


def segment_size_features(seg: Segmentation) -> tuple[np.ndarray, np.ndarray]:
    """f20 largest segment share, f21 largest pairwise size difference.

    f21 is 0 with defined=False when only one segment was retained.
    """
    sizes = np.array([s[1] for s in seg.segments], dtype=np.float64)
    n = seg.labels.size
    values = np.zeros(2)
    defined = np.array([True, False])
    values[0] = sizes.max() / n
    if len(sizes) >= 2:
        values[1] = (sizes.max() - sizes.min()) / n
        defined[1] = True
    return values, defined


def _segment_hue_counts(hsv: np.ndarray, seg: Segmentation, floor: float) -> dict[int, np.ndarray]:
    """20-bin filtered hue histogram for each retained segment."""
    return {
        sid: filtered_hue_histogram(hsv, floor, mask=seg.labels == sid)[0]
        for sid, _ in seg.segments
    }


def segment_hue_features(img: ImageBuffer, seg: Segmentation, cfg: ThresholdConfig,
                         hsv: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """f22..f27 from per-segment hue histograms.

    f22 counts hues in the largest segment that are dominant at image scale
    (>= c6 * |I|); f23/f24/f25 use per-segment dominance (>= c6 * |S_i|).
    f26 is the largest arc between dominant-bin centers inside the largest
    segment (0 flagged when it has fewer than two dominant bins); f27 is the
    std across segments of each segment's internal max arc contrast, with
    <2-dominant-bin segments contributing 0.
    """
    if hsv is None:
        hsv = to_hsv(img)
    n = img.n_pixels
    hists = _segment_hue_counts(hsv, seg, cfg.sat_val_floor)
    sizes = dict(seg.segments)
    big = seg.largest_id()

    q = {sid: int(np.sum(hists[sid] >= cfg.c6 * sizes[sid])) for sid in hists}
    t = {}
    for sid in hists:
        dom = np.flatnonzero(hists[sid] >= cfg.c6 * sizes[sid])
        t[sid] = max_pairwise_arc(dom) if len(dom) >= 2 else 0.0

    values = np.zeros(6)
    defined = np.array([True, True, True, True, False, True])
    values[0] = np.sum(hists[big] >= cfg.c6 * n)
    values[1] = q[big]
    values[2] = max(q.values())
    qv = list(q.values())
    values[3] = max(qv) - min(qv)
    big_dom = np.flatnonzero(hists[big] >= cfg.c6 * sizes[big])
    if len(big_dom) >= 2:
        values[4] = max_pairwise_arc(big_dom)
        defined[4] = True
    values[5] = float(np.std(np.array(list(t.values()))))
    return values, defined


def segment_harmony_features(img: ImageBuffer, seg: Segmentation, cfg: ThresholdConfig,
                             hsv: np.ndarray | None = None) -> tuple[float, float]:
    """f28/f29: harmony deviation restricted to the largest segment."""
    if hsv is None:
        hsv = to_hsv(img)
    mask = seg.labels == seg.largest_id()
    return harmony_features(hsv[..., 0][mask], hsv[..., 1][mask],
                            cfg.harmony_rotation_step)


def segment_lightness_features(img: ImageBuffer, seg: Segmentation
                               ) -> tuple[np.ndarray, np.ndarray]:
    """f30 largest-segment mean lightness, f31 std and f32 spread of the
    per-segment mean lightness (f32 is 0 flagged with one segment)."""
    light = lightness(img)
    means = np.array([light[seg.labels == sid].mean() for sid, _ in seg.segments])
    big_pos = [i for i, (sid, _) in enumerate(seg.segments)
               if sid == seg.largest_id()][0]
    values = np.zeros(3)
    defined = np.array([True, True, False])
    values[0] = means[big_pos]
    values[1] = float(np.std(means))
    if len(means) >= 2:
        values[2] = float(means.max() - means.min())
        defined[2] = True
    return values, defined
