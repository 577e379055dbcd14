"""Boxes, tubes and the shared data model.

Boxes are center-size, normalized to the image: ``x``/``w`` are fractions of
the width, ``y``/``h`` fractions of the height. Corner form is derived on
demand and clipped to the unit square.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


def _clamp01(v: float) -> float:
    return 0.0 if v < 0.0 else 1.0 if v > 1.0 else v


@dataclass(frozen=True)
class Box2D:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"box field {name} is not finite: {v!r}")
            object.__setattr__(self, name, _clamp01(v))

    def corners(self) -> tuple[float, float, float, float]:
        """(x1, y1, x2, y2) clipped to [0, 1]."""
        return (
            _clamp01(self.x - self.w / 2),
            _clamp01(self.y - self.h / 2),
            _clamp01(self.x + self.w / 2),
            _clamp01(self.y + self.h / 2),
        )

    @property
    def area(self) -> float:
        x1, y1, x2, y2 = self.corners()
        return (x2 - x1) * (y2 - y1)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.h])


@dataclass(frozen=True)
class ScoredBox:
    box: Box2D
    conf: float
    s_ac: float = 0.0
    s_bg: float = 0.0

    def __post_init__(self):
        for name in ("conf", "s_ac", "s_bg"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"score {name} is not finite: {v!r}")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class FrameDetections:
    frame_index: int
    boxes: tuple[ScoredBox, ...] = ()

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValueError(f"negative frame index {self.frame_index}")
        object.__setattr__(self, "boxes", tuple(self.boxes))


@dataclass(frozen=True)
class VideoDetections:
    video_id: str
    frames: tuple[FrameDetections, ...]

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise ValueError("a video needs at least one frame")
        for t, fr in enumerate(frames):
            if fr.frame_index != t:
                raise ValueError(
                    f"video {self.video_id}: frame {fr.frame_index} at position {t}"
                )
        object.__setattr__(self, "frames", frames)

    @property
    def length(self) -> int:
        return len(self.frames)

    @classmethod
    def from_lists(cls, video_id: str, boxes: Sequence[Sequence[ScoredBox]]):
        return cls(video_id, tuple(FrameDetections(t, tuple(b)) for t, b in enumerate(boxes)))


@dataclass(frozen=True)
class TubePath:
    start: int
    end: int
    boxes: tuple[ScoredBox, ...]

    def __post_init__(self):
        boxes = tuple(self.boxes)
        if self.start < 0 or self.end < self.start:
            raise ValueError(f"bad tube span [{self.start}, {self.end}]")
        if len(boxes) != self.end - self.start + 1:
            raise ValueError(
                f"tube [{self.start}, {self.end}] carries {len(boxes)} boxes"
            )
        object.__setattr__(self, "boxes", boxes)

    def __len__(self):
        return len(self.boxes)

    def box_at(self, t: int) -> Box2D:
        return self.boxes[t - self.start].box

    def segment(self, lo: int, hi: int) -> TubePath:
        """Sub-tube over absolute frames [lo, hi]."""
        return TubePath(lo, hi, self.boxes[lo - self.start : hi - self.start + 1])


@dataclass(frozen=True)
class GroundTruthTube:
    start: int
    end: int
    boxes: tuple[Box2D, ...]
    class_label: str = "action"
    video_id: str = ""

    def __post_init__(self):
        boxes = tuple(self.boxes)
        if self.start < 0 or self.end < self.start:
            raise ValueError(f"bad ground-truth span [{self.start}, {self.end}]")
        if len(boxes) != self.end - self.start + 1:
            raise ValueError(
                f"ground truth [{self.start}, {self.end}] carries {len(boxes)} boxes"
            )
        object.__setattr__(self, "boxes", boxes)

    def box_at(self, t: int) -> Box2D:
        return self.boxes[t - self.start]


def iou(a: Box2D, b: Box2D) -> float:
    ax1, ay1, ax2, ay2 = a.corners()
    bx1, by1, bx2, by2 = b.corners()
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    inter = iw * ih if iw > 0 and ih > 0 else 0.0
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    if union <= 0:
        return 0.0
    return inter / union


def mirror_box(b: Box2D) -> Box2D:
    return Box2D(1.0 - b.x, b.y, b.w, b.h)


def corners_array(xywh: np.ndarray) -> np.ndarray:
    """Center-size rows (..., 4) to clipped corner rows (..., 4)."""
    xywh = np.asarray(xywh, dtype=float)
    half = xywh[..., 2:4] / 2
    out = np.concatenate([xywh[..., 0:2] - half, xywh[..., 0:2] + half], axis=-1)
    return np.clip(out, 0.0, 1.0)


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between center-size rows ``a`` (N, 4) and ``b`` (M, 4).

    Same arithmetic as :func:`iou`; used by the linker where per-pair Python
    calls would dominate.
    """
    ca = corners_array(a)[:, None, :]
    cb = corners_array(b)[None, :, :]
    iw = np.minimum(ca[..., 2], cb[..., 2]) - np.maximum(ca[..., 0], cb[..., 0])
    ih = np.minimum(ca[..., 3], cb[..., 3]) - np.maximum(ca[..., 1], cb[..., 1])
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    area_a = (ca[..., 2] - ca[..., 0]) * (ca[..., 3] - ca[..., 1])
    area_b = (cb[..., 2] - cb[..., 0]) * (cb[..., 3] - cb[..., 1])
    union = area_a + area_b - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)
    return out
