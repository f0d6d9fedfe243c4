"""Character and face counting behind a pluggable adapter.

The builtin character counter is a lightweight glyph heuristic: adaptive
threshold, 8-connected components, keep components with glyph-like size and
aspect. There is no builtin face detector; face counts come from an external
command or stay undefined.

External detector protocol: the adapter's command is invoked with the image
path appended as the last argument and must print a single decimal integer
to stdout. A nonzero exit status or unparseable output is a failure.
"""

from __future__ import annotations

import os
import subprocess
import tempfile
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

from .image import ImageBuffer, to_gray

EIGHT_CONN = np.ones((3, 3), dtype=bool)

# builtin glyph heuristics
_LOCAL_WINDOW = 15
_INK_OFFSET = 10.0
_MIN_AREA = 8
_MAX_AREA_FRAC = 0.2
_MIN_HEIGHT = 4
_MAX_HEIGHT_FRAC = 0.9
_ASPECT_RANGE = (0.15, 15.0)


class ExternalToolFailure(RuntimeError):
    """External detector exited nonzero or produced unparseable output."""


@dataclass(frozen=True)
class DetectorAdapter:
    kind: str  # "characters" | "faces"
    backend: str = "builtin"  # "builtin" | "external-command"
    command: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("characters", "faces"):
            raise ValueError(f"unknown detector kind {self.kind!r}")
        if self.backend not in ("builtin", "external-command"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.backend == "external-command" and not self.command:
            raise ValueError("external-command backend needs a command")


def _glyph_components(mask: np.ndarray, n_pixels: int, height: int) -> int:
    labels, n_lab = ndimage.label(mask, structure=EIGHT_CONN)
    if n_lab == 0:
        return 0
    count = 0
    for sl in ndimage.find_objects(labels):
        if sl is None:
            continue
        bh = sl[0].stop - sl[0].start
        bw = sl[1].stop - sl[1].start
        area = int(mask[sl].sum())
        aspect = bh / bw
        if (area >= _MIN_AREA and area <= _MAX_AREA_FRAC * n_pixels
                and _MIN_HEIGHT <= bh <= _MAX_HEIGHT_FRAC * height
                and _ASPECT_RANGE[0] <= aspect <= _ASPECT_RANGE[1]):
            count += 1
    return count


def _builtin_character_count(img: ImageBuffer) -> int:
    gray = to_gray(img).astype(np.float64)
    local_mean = ndimage.uniform_filter(gray, size=_LOCAL_WINDOW, mode="nearest")
    dark = gray < local_mean - _INK_OFFSET
    light = gray > local_mean + _INK_OFFSET
    n, h = img.n_pixels, img.height
    return max(_glyph_components(dark, n, h), _glyph_components(light, n, h))


def _run_external(adapter: DetectorAdapter, img: ImageBuffer) -> int:
    with tempfile.NamedTemporaryFile(suffix=".png", delete=False) as tmp:
        path = tmp.name
    try:
        Image.fromarray(img.pixels).save(path, format="PNG")
        try:
            proc = subprocess.run([*adapter.command, path], capture_output=True,
                                  text=True, timeout=60)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise ExternalToolFailure(f"detector invocation failed: {exc}") from exc
        if proc.returncode != 0:
            raise ExternalToolFailure(
                f"detector exited {proc.returncode}: {proc.stderr.strip()}")
        try:
            value = int(proc.stdout.strip())
        except ValueError as exc:
            raise ExternalToolFailure(
                f"detector output not an integer: {proc.stdout!r}") from exc
        if value < 0:
            raise ExternalToolFailure(f"detector returned negative count {value}")
        return value
    finally:
        os.unlink(path)


def count_characters(img: ImageBuffer, adapter: DetectorAdapter) -> tuple[int, bool]:
    """Character count and whether it is defined (always, for characters)."""
    if adapter.kind != "characters":
        raise ValueError("adapter kind must be 'characters'")
    if adapter.backend == "external-command":
        return _run_external(adapter, img), True
    return _builtin_character_count(img), True


def count_faces(img: ImageBuffer, adapter: DetectorAdapter) -> tuple[int, bool]:
    """Face count; the builtin backend is a stub returning 0, undefined."""
    if adapter.kind != "faces":
        raise ValueError("adapter kind must be 'faces'")
    if adapter.backend == "external-command":
        return _run_external(adapter, img), True
    return 0, False


DEFAULT_CHAR_ADAPTER = DetectorAdapter(kind="characters")
DEFAULT_FACE_ADAPTER = DetectorAdapter(kind="faces")
