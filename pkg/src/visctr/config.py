"""Threshold configuration shared by the feature extractors."""

from __future__ import annotations

from dataclasses import dataclass, fields


@dataclass(frozen=True)
class ThresholdConfig:
    """Dominance / filtering thresholds used across the feature modules.

    c1: dominant-bin threshold for the gray histogram
    c2: dominant-bin threshold for the 512-bin color histograms
    c4_frac: minimum coherent-component size as a fraction of the image
    c5: dominant-hue threshold (fraction of image size)
    c6: dominant-hue threshold for segment hue histograms
    sat_val_floor: pixels below this saturation or value are dropped from
        hue histograms
    harmony_rotation_step: rotation grid step in degrees for harmony fitting
    """

    c1: float = 0.01
    c2: float = 0.01
    c4_frac: float = 0.01
    c5: float = 0.01
    c6: float = 0.01
    sat_val_floor: float = 0.2
    harmony_rotation_step: float = 1.0

    def __post_init__(self):
        for name in ("c1", "c2", "c4_frac", "c5", "c6", "sat_val_floor"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must be in (0, 1), got {v}")
        if not 0.0 < self.harmony_rotation_step < 360.0:
            raise ValueError("harmony_rotation_step must be in (0, 360)")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}
