"""The 43-slot feature vector and the full per-image extraction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .advanced_features import advanced_features
from .config import ThresholdConfig
from .detectors import DEFAULT_CHAR_ADAPTER, DEFAULT_FACE_ADAPTER, DetectorAdapter
from .global_features import (
    color_distribution_features,
    coherent_component_features,
    gray_level_features,
    harmony_deviation_features,
    hue_distribution_features,
    lightness_features,
)
from .image import ImageBuffer, to_hsv
from .local_features import (
    segment_harmony_features,
    segment_hue_features,
    segment_lightness_features,
    segment_size_features,
)
from .segmentation import segment

N_FEATURES = 43

FEATURE_NAMES = tuple(f"f{i}" for i in range(1, N_FEATURES + 1))

FEATURE_DESCRIPTIONS = (
    "gray level contrast",
    "number of dominant bins in gray level histogram",
    "standard deviation of gray levels",
    "number of dominant bins in RGB histogram",
    "size of the dominant bin in RGB histogram",
    "number of dominant bins in HSV histogram",
    "size of the dominant bin in HSV histogram",
    "deviation from the best color harmony model",
    "average deviation from the best two color harmony models",
    "number of connected coherent components",
    "size of the largest connected coherent component",
    "size of the second largest connected coherent component",
    "color size rank of the largest connected coherent component",
    "color size rank of the second largest connected coherent component",
    "number of dominant hues",
    "contrast of dominant hues",
    "standard deviation of hues",
    "average lightness",
    "standard deviation of lightness",
    "size of the largest segment (LS)",
    "segment size contrast",
    "number of image dominant hues in the LS",
    "number of dominant hues in the LS",
    "largest number of dominant hues in one segment",
    "contrast of hue counts among segments",
    "contrast of hues in the LS",
    "standard deviation of hue contrast among segments",
    "deviation from the best color harmony model for the LS",
    "average deviation from the best two color harmony models for the LS",
    "average lightness in the LS",
    "standard deviation of average lightness among segments",
    "contrast of average lightness among segments",
    "background size in saliency map (SM)",
    "number of connected components in SM",
    "size of the largest connected component in SM",
    "average saliency of the largest connected component",
    "number of connected components in SM background",
    "size of the largest background component in SM",
    "distance between connected components in SM",
    "distance from rule-of-thirds points in SM",
    "distance from image center in SM",
    "number of characters",
    "number of faces",
)

# slots that must hold non-negative integers
COUNT_SLOTS = ("f2", "f4", "f6", "f10", "f15", "f22", "f23", "f24", "f34",
               "f37", "f42", "f43")
# slots constrained to [0, 1]
RATIO_SLOTS = ("f5", "f7", "f11", "f12", "f20", "f33", "f35", "f38")


@dataclass
class FeatureVector:
    """43 named feature values plus per-slot validity flags.

    Slots where a degenerate-input convention applied (for example f12 when
    there is a single coherent component) hold 0 with defined=False.
    """

    values: np.ndarray = field(default_factory=lambda: np.zeros(N_FEATURES))
    defined: np.ndarray = field(default_factory=lambda: np.ones(N_FEATURES, dtype=bool))

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.defined = np.asarray(self.defined, dtype=bool)
        if self.values.shape != (N_FEATURES,) or self.defined.shape != (N_FEATURES,):
            raise ValueError("feature vector must have exactly 43 slots")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature values must be finite")

    def __getitem__(self, name: str) -> float:
        return float(self.values[FEATURE_NAMES.index(name)])

    def is_defined(self, name: str) -> bool:
        return bool(self.defined[FEATURE_NAMES.index(name)])

    def set(self, name: str, value: float, defined: bool = True) -> None:
        i = FEATURE_NAMES.index(name)
        self.values[i] = value
        self.defined[i] = defined


def extract_features(img: ImageBuffer, cfg: ThresholdConfig = ThresholdConfig(),
                     char_adapter: DetectorAdapter = DEFAULT_CHAR_ADAPTER,
                     face_adapter: DetectorAdapter = DEFAULT_FACE_ADAPTER
                     ) -> FeatureVector:
    """Compute all 43 features of one image."""
    fv = FeatureVector()
    hsv = to_hsv(img)

    fv.values[0:3] = gray_level_features(img, cfg)
    fv.values[3:7] = color_distribution_features(img, cfg, hsv=hsv)
    fv.values[7:9] = harmony_deviation_features(hsv, cfg)
    fv.values[9:14], fv.defined[9:14] = coherent_component_features(img, cfg, hsv=hsv)
    fv.values[14:17], fv.defined[14:17] = hue_distribution_features(hsv, cfg, img.n_pixels)
    fv.values[17:19] = lightness_features(img)

    seg = segment(img)
    fv.values[19:21], fv.defined[19:21] = segment_size_features(seg)
    fv.values[21:27], fv.defined[21:27] = segment_hue_features(img, seg, cfg, hsv=hsv)
    fv.values[27:29] = segment_harmony_features(img, seg, cfg, hsv=hsv)
    fv.values[29:32], fv.defined[29:32] = segment_lightness_features(img, seg)

    fv.values[32:43], fv.defined[32:43] = advanced_features(img, char_adapter, face_adapter)
    return fv
