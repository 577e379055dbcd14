"""K x K x (B*5 + 2) grid tensors: decoding to boxes and building targets.

Per-cell layout is ``B`` blocks of ``(x, y, w, h, c)`` followed by the cell's
``(s_ac, s_bg)`` pair. ``x, y`` are relative to the cell bounds; ``w, h`` are
image-relative in both predictions and targets.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Box2D, FrameDetections, ScoredBox, iou

log = logging.getLogger(__name__)

NUM_SCORES = 2


def cell_depth(b: int) -> int:
    return b * 5 + NUM_SCORES


def tensor_size(k: int, b: int) -> int:
    return k * k * cell_depth(b)


@dataclass(frozen=True, eq=False)
class GridTensor:
    k: int
    b: int
    values: np.ndarray

    def __post_init__(self):
        if self.k < 1 or self.b < 1:
            raise ValueError(f"grid needs k >= 1 and b >= 1, got k={self.k} b={self.b}")
        vals = np.asarray(self.values, dtype=float)
        if vals.size != tensor_size(self.k, self.b):
            raise ValueError(
                f"grid k={self.k} b={self.b} expects {tensor_size(self.k, self.b)} "
                f"values, got {vals.size}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid tensor holds non-finite values")
        object.__setattr__(self, "values", vals.reshape(self.k, self.k, cell_depth(self.b)))

    @classmethod
    def zeros(cls, k: int, b: int) -> GridTensor:
        return cls(k, b, np.zeros(tensor_size(k, b)))

    def boxes(self) -> np.ndarray:
        """View of the box blocks as (K, K, B, 5)."""
        return self.values[..., : self.b * 5].reshape(self.k, self.k, self.b, 5)

    def scores(self) -> np.ndarray:
        return self.values[..., self.b * 5 :]


@dataclass(frozen=True, eq=False)
class ResponsibilityMask:
    cell_has_object: np.ndarray  # (K, K) bool
    responsible: np.ndarray  # (K, K, B) bool
    not_responsible: np.ndarray  # (K, K, B) bool

    @classmethod
    def empty(cls, k: int, b: int) -> ResponsibilityMask:
        return cls(
            np.zeros((k, k), bool), np.zeros((k, k, b), bool), np.ones((k, k, b), bool)
        )


@dataclass(frozen=True, eq=False)
class FrameTarget:
    target: GridTensor
    mask: ResponsibilityMask
    dropped: tuple[Box2D, ...] = field(default=())


def decode(t: GridTensor) -> FrameDetections:
    """All K*K*B boxes in row-major cell order, predictor-minor. No thresholding."""
    return FrameDetections(0, tuple(decode_array(t.values, t.k, t.b)))


def decode_array(values: np.ndarray, k: int, b: int) -> list[ScoredBox]:
    vals = np.asarray(values, dtype=float).reshape(k, k, cell_depth(b))
    out = []
    for r in range(k):
        for col in range(k):
            cell = vals[r, col]
            s_ac, s_bg = float(cell[b * 5]), float(cell[b * 5 + 1])
            for j in range(b):
                x, y, w, h, c = cell[j * 5 : j * 5 + 5]
                box = Box2D((col + x) / k, (r + y) / k, w, h)
                out.append(ScoredBox(box, float(c), s_ac, s_bg))
    return out


def decode_predictor(t: GridTensor, row: int, col: int, j: int) -> Box2D:
    x, y, w, h, _ = t.boxes()[row, col, j]
    return Box2D((col + x) / t.k, (row + y) / t.k, w, h)


def cell_of(box: Box2D, k: int) -> tuple[int, int]:
    """(row, col) of the cell holding the box center; the far edge maps to K-1."""
    return min(int(np.floor(box.y * k)), k - 1), min(int(np.floor(box.x * k)), k - 1)


def encode_target(gt_boxes: Sequence[Box2D], pred: GridTensor) -> FrameTarget:
    k, b = pred.k, pred.b
    by_cell: dict[tuple[int, int], Box2D] = {}
    dropped = []
    for g in gt_boxes:
        if g.area <= 0:
            raise ValueError(f"ground-truth box has no area: {g}")
        rc = cell_of(g, k)
        if rc in by_cell:
            keep, drop = (g, by_cell[rc]) if g.area > by_cell[rc].area else (by_cell[rc], g)
            by_cell[rc] = keep
            dropped.append(drop)
            log.warning("cell %s holds two ground-truth centers; dropped %s", rc, drop)
        else:
            by_cell[rc] = g

    values = np.zeros((k, k, cell_depth(b)))
    has_obj = np.zeros((k, k), bool)
    resp = np.zeros((k, k, b), bool)
    for (r, col), g in sorted(by_cell.items()):
        ious = [iou(decode_predictor(pred, r, col, j), g) for j in range(b)]
        j = int(np.argmax(ious))
        has_obj[r, col] = True
        resp[r, col, j] = True
        values[r, col, j * 5 : j * 5 + 5] = (g.x * k - col, g.y * k - r, g.w, g.h, 1.0)
        values[r, col, b * 5 :] = (1.0, 0.0)
    mask = ResponsibilityMask(has_obj, resp, ~resp)
    return FrameTarget(GridTensor(k, b, values), mask, tuple(dropped))
