"""Mapping attention onto detected objects.

An object is focused when the maximum saliency pixel inside its
bounding box, on the peak-normalized map, strictly exceeds the
threshold Th. The same machinery labels ground-truth focus with a
15% ratio. A pixel (r, c) belongs to a box iff its center
(c + 0.5, r + 0.5) lies inside the half-open box, which makes border
cases unambiguous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from gridgaze import saliency
from gridgaze.errors import (
    EmptyInputError,
    EmptyIntersectionError,
    InvalidBoxError,
    PipelineError,
)

DEFAULT_THRESHOLD = 0.5
DEFAULT_LABEL_RATIO = 0.15


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned half-open box [x_min, x_max) x [y_min, y_max) in
    pixel coordinates, with detector metadata."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float
    class_id: int
    confidence: float = 1.0

    def __post_init__(self):
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(v) for v in coords):
            raise InvalidBoxError(f"box coordinates must be finite, got {coords}")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise InvalidBoxError(
                f"box must be non-empty, got x [{self.x_min}, {self.x_max}) "
                f"y [{self.y_min}, {self.y_max})")
        if not (math.isfinite(self.confidence) and 0.0 <= self.confidence <= 1.0):
            raise InvalidBoxError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class DetectionSet:
    """All detector boxes for one frame, in detector output order."""

    frame_id: str
    boxes: tuple[BoundingBox, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.frame_id:
            raise PipelineError("frame_id must be non-empty")
        object.__setattr__(self, "boxes", tuple(self.boxes))

    def __len__(self) -> int:
        return len(self.boxes)


@dataclass(frozen=True)
class FocusResult:
    """Per-box focus probabilities and the thresholded focused set.

    out_of_frame marks boxes whose clipped extent held no pixel
    center; they score 0 rather than erroring.
    """

    probabilities: np.ndarray
    focused: np.ndarray
    threshold: float
    out_of_frame: np.ndarray

    def focused_boxes(self, detections: DetectionSet) -> tuple[BoundingBox, ...]:
        return tuple(b for b, f in zip(detections.boxes, self.focused) if f)


def _center_span(lo: float, hi: float, size: int) -> tuple[int, int]:
    # pixel i has center i + 0.5; kept iff lo <= i + 0.5 < hi
    start = max(0, math.ceil(lo - 0.5))
    stop = min(size, math.ceil(hi - 0.5))
    return start, stop


def focus_probability(saliency_map, box: BoundingBox) -> float:
    """Maximum map value over pixels whose centers fall in the box.

    The map is taken as given; callers wanting the 0-to-1 scale must
    peak-normalize first (detect_focused does).
    """
    arr = saliency.as_map(saliency_map)
    h, w = arr.shape
    r0, r1 = _center_span(box.y_min, box.y_max, h)
    c0, c1 = _center_span(box.x_min, box.x_max, w)
    if r0 >= r1 or c0 >= c1:
        raise EmptyIntersectionError(
            f"box x [{box.x_min}, {box.x_max}) y [{box.y_min}, {box.y_max}) "
            f"contains no pixel centers of a {h}x{w} map")
    return float(arr[r0:r1, c0:c1].max())


def detect_focused(saliency_map, detections: DetectionSet,
                   threshold: float = DEFAULT_THRESHOLD) -> FocusResult:
    """Score every box on the peak-normalized map and keep the strict
    exceeders of threshold. Out-of-frame boxes score 0 with a flag."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    norm = saliency.normalize_peak(saliency_map)
    n = len(detections)
    probs = np.zeros(n, dtype=np.float64)
    outside = np.zeros(n, dtype=bool)
    for i, box in enumerate(detections.boxes):
        try:
            probs[i] = focus_probability(norm, box)
        except EmptyIntersectionError:
            outside[i] = True
    return FocusResult(probabilities=probs, focused=probs > threshold,
                       threshold=threshold, out_of_frame=outside)


def label_ground_truth(gt_map, detections: DetectionSet,
                       ratio: float = DEFAULT_LABEL_RATIO) -> np.ndarray:
    """Binary ground-truth focus labels: 1 iff the box's max value on
    the peak-normalized gt map strictly exceeds ratio."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    result = detect_focused(gt_map, detections, threshold=ratio)
    return result.focused.astype(np.int64)


def baseline_map(gt_maps, out_height: int, out_width: int) -> np.ndarray:
    """Pixelwise mean of the given maps after resizing each to the
    output dims. Stands in for a prediction that ignores the input."""
    total = None
    count = 0
    for m in gt_maps:
        resized = saliency.resize_bilinear(m, out_height, out_width)
        total = resized if total is None else total + resized
        count += 1
    if count == 0:
        raise EmptyInputError("baseline_map needs at least one map")
    return total / count
