"""Linking per-frame boxes into video-long paths.

A path picks one box per frame; its score is the summed box confidence plus
``lambda0`` times the summed IoU of consecutive boxes. The best path is found
by dynamic programming; several paths are pulled out greedily by removing the
boxes of each one before searching again.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FrameDetections, TubePath, VideoDetections, iou, iou_matrix


class EmptyFrameError(ValueError):
    """A frame has no boxes, so no full-length path exists."""

    def __init__(self, frame: int):
        super().__init__(f"frame {frame} has no boxes")
        self.frame = frame


@dataclass(frozen=True)
class LinkConfig:
    lambda0: float = 1.0
    max_paths: int = 100

    def __post_init__(self):
        if not self.lambda0 >= 0:
            raise ValueError(f"lambda0 must be >= 0, got {self.lambda0}")
        if self.max_paths < 1:
            raise ValueError(f"max_paths must be >= 1, got {self.max_paths}")


@dataclass(frozen=True)
class ScoredPath:
    path: TubePath
    score: float


def path_score(p: TubePath, lambda0: float) -> float:
    unary = sum(b.conf for b in p.boxes)
    pairwise = sum(iou(p.boxes[t].box, p.boxes[t - 1].box) for t in range(1, len(p.boxes)))
    return unary + lambda0 * pairwise


def _frame_arrays(frames):
    xywh = [np.array([b.box.as_array() for b in fr]).reshape(-1, 4) for fr in frames]
    conf = [np.array([b.conf for b in fr], float) for fr in frames]
    return xywh, conf


def _viterbi(conf, pair, lambda0):
    """Box indices of the best path. ``pair[t]`` is IoU(frame t, frame t-1)."""
    best = conf[0].copy()
    back = []
    for t in range(1, len(conf)):
        cand = best[None, :] + lambda0 * pair[t]
        arg = np.argmax(cand, axis=1)  # first maximum: lowest previous index
        back.append(arg)
        best = conf[t] + cand[np.arange(len(arg)), arg]
    j = int(np.argmax(best))
    picks = [j]
    for arg in reversed(back):
        j = int(arg[j])
        picks.append(j)
    return picks[::-1]


def _to_path(frames, picks) -> TubePath:
    return TubePath(0, len(frames) - 1, tuple(fr[j] for fr, j in zip(frames, picks)))


def viterbi_link(video: VideoDetections, config: LinkConfig = LinkConfig()) -> ScoredPath:
    frames = [fr.boxes for fr in video.frames]
    for t, fr in enumerate(frames):
        if not fr:
            raise EmptyFrameError(t)
    xywh, conf = _frame_arrays(frames)
    pair = [None] + [iou_matrix(xywh[t], xywh[t - 1]) for t in range(1, len(frames))]
    path = _to_path(frames, _viterbi(conf, pair, config.lambda0))
    return ScoredPath(path, path_score(path, config.lambda0))


def extract_paths(video: VideoDetections, config: LinkConfig = LinkConfig()) -> list[ScoredPath]:
    """Greedy multi-path extraction, in extraction order.

    Returns ``[]`` when some frame is empty from the start.
    """
    frames = [list(fr.boxes) for fr in video.frames]
    if any(not fr for fr in frames):
        return []
    xywh, conf = _frame_arrays(frames)
    full_pair = [None] + [iou_matrix(xywh[t], xywh[t - 1]) for t in range(1, len(frames))]
    # surviving original box indices per frame; box order stays stable
    alive = [np.arange(len(fr)) for fr in frames]
    out = []
    while len(out) < config.max_paths:
        sub_conf = [c[a] for c, a in zip(conf, alive)]
        sub_pair = [None] + [
            full_pair[t][np.ix_(alive[t], alive[t - 1])] for t in range(1, len(frames))
        ]
        picks = _viterbi(sub_conf, sub_pair, config.lambda0)
        orig = [int(a[j]) for a, j in zip(alive, picks)]
        path = _to_path(frames, orig)
        out.append(ScoredPath(path, path_score(path, config.lambda0)))
        alive = [np.delete(a, j) for a, j in zip(alive, picks)]
        if any(len(a) == 0 for a in alive):
            break
    return out


def fuse_streams(a: VideoDetections, b: VideoDetections) -> VideoDetections:
    """Per-frame union of two detection streams, ``a``'s boxes first."""
    if a.video_id != b.video_id:
        raise ValueError(f"cannot fuse video {a.video_id!r} with {b.video_id!r}")
    if a.length != b.length:
        raise ValueError(f"cannot fuse {a.length} frames with {b.length}")
    return VideoDetections(
        a.video_id,
        tuple(
            FrameDetections(fa.frame_index, fa.boxes + fb.boxes)
            for fa, fb in zip(a.frames, b.frames)
        ),
    )
