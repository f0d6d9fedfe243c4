"""Advanced features f33..f43: saliency statistics plus detector counts."""

from __future__ import annotations

import numpy as np

from .detectors import (
    DEFAULT_CHAR_ADAPTER,
    DEFAULT_FACE_ADAPTER,
    DetectorAdapter,
    count_characters,
    count_faces,
)
from .image import ImageBuffer
from .saliency import SaliencyMap, SalientComponents, salient_components, spectral_saliency

RULE_OF_THIRDS = ((1 / 3, 1 / 3), (1 / 3, 2 / 3), (2 / 3, 1 / 3), (2 / 3, 2 / 3))


def saliency_features(sal: SaliencyMap, comps: SalientComponents
                      ) -> tuple[np.ndarray, np.ndarray]:
    """f33..f41 from the binary saliency map and its components.

    f33 is the non-salient fraction, so f33 plus the summed salient
    component shares is exactly 1. Distances use centers of mass in
    normalized coordinates. With no salient components f34 is 0, f33/f37/f38
    take their whole-image-background values and f35/f36/f39..f41 are 0 with
    defined=False.
    """
    n = sal.binary.size
    values = np.zeros(9)
    defined = np.ones(9, dtype=bool)
    values[0] = 1.0 - sal.binary.sum() / n
    values[1] = len(comps.components)
    values[4] = comps.background_count
    values[5] = comps.largest_background / n
    if not comps.components:
        defined[[2, 3, 6, 7, 8]] = False
        return values, defined

    largest = comps.components[0]
    values[2] = largest.size / n
    values[3] = largest.mean_tau
    centers = np.array([c.center for c in comps.components])
    diff = centers[:, None, :] - centers[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=-1))
    values[6] = dist[np.triu_indices(len(centers), k=1)].sum()
    thirds = np.array(RULE_OF_THIRDS)
    values[7] = np.sqrt(((thirds - np.array(largest.center)) ** 2).sum(axis=1)).min()
    values[8] = np.sqrt(((centers - 0.5) ** 2).sum(axis=1)).sum()
    return values, defined


def advanced_features(img: ImageBuffer,
                      char_adapter: DetectorAdapter = DEFAULT_CHAR_ADAPTER,
                      face_adapter: DetectorAdapter = DEFAULT_FACE_ADAPTER
                      ) -> tuple[np.ndarray, np.ndarray]:
    """f33..f43: saliency statistics plus character and face counts."""
    sal = spectral_saliency(img)
    comps = salient_components(sal)
    sal_vals, sal_def = saliency_features(sal, comps)
    chars, chars_def = count_characters(img, char_adapter)
    faces, faces_def = count_faces(img, face_adapter)
    values = np.concatenate([sal_vals, [chars, faces]])
    defined = np.concatenate([sal_def, [chars_def, faces_def]])
    return values, defined
