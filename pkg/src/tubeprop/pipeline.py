"""End-to-end proposal generation: infer -> fuse -> link -> trim -> evaluate."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Mapping, Sequence

import numpy as np

from .config import PipelineConfig
from .core import FrameDetections, GroundTruthTube, TubePath, VideoDetections
from .grid import decode_array, tensor_size
from .head import DenseParams, recurrent_forward
from .linking import extract_paths, fuse_streams, path_score
from .metrics import MetricsReport, evaluate
from .trimming import trim

log = logging.getLogger(__name__)

Proposals = dict[str, list[tuple[TubePath, float]]]


def _map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def propose_video(video: VideoDetections, config: PipelineConfig):
    """Proposals for one video plus any warnings raised on the way."""
    warnings = []
    empty = [fr.frame_index for fr in video.frames if not fr.boxes]
    if empty:
        warnings.append(f"video {video.video_id}: frame {empty[0]} has no boxes; no proposals")
        return [], warnings
    out = []
    for sp in extract_paths(video, config.link_config()):
        if not config.trim:
            out.append((sp.path, sp.score))
            continue
        segments, _ = trim(sp.path, config.trim_config())
        for seg in segments:
            out.append((seg, path_score(seg, config.lambda0)))
    return out, warnings


def link_videos(videos: Mapping[str, VideoDetections], config: PipelineConfig, threads: int = 1):
    """Untrimmed linked paths per video, keyed and ordered by video id."""
    ids = sorted(videos)

    def one(vid):
        return [(sp.path, sp.score) for sp in extract_paths(videos[vid], config.link_config())]

    return dict(zip(ids, _map(one, ids, threads)))


def trim_proposals(paths: Mapping[str, Sequence[tuple[TubePath, float]]], config: PipelineConfig,
                   threads: int = 1) -> Proposals:
    ids = sorted(paths)

    def one(vid):
        out = []
        for p, _ in paths[vid]:
            for seg in trim(p, config.trim_config())[0]:
                out.append((seg, path_score(seg, config.lambda0)))
        return out

    return dict(zip(ids, _map(one, ids, threads)))


def infer_video(video_id: str, features: np.ndarray, head: str, cell, readout: DenseParams,
                k: int, b: int) -> VideoDetections:
    """Run a trained head over one video's frame features and decode every grid."""
    feats = np.asarray(features, float)
    if head == "static":
        grids = feats @ readout.w.T + readout.b
    else:
        grids = recurrent_forward(cell, readout, feats)
    if grids.shape[1] != tensor_size(k, b):
        raise ValueError(f"model emits {grids.shape[1]} values per frame, grid needs {tensor_size(k, b)}")
    frames = tuple(FrameDetections(t, tuple(decode_array(g, k, b))) for t, g in enumerate(grids))
    return VideoDetections(video_id, frames)


def infer_videos(features: Mapping[str, np.ndarray], model: dict, config: PipelineConfig,
                 threads: int = 1) -> dict[str, VideoDetections]:
    ids = sorted(features)
    k, b = model["dims"]["K"], model["dims"]["B"]
    return dict(zip(ids, _map(
        lambda vid: infer_video(vid, features[vid], model["head"], model["cell"],
                                model["readout"], k, b),
        ids, threads)))


def fuse_all(a: Mapping[str, VideoDetections], b: Mapping[str, VideoDetections]):
    out = dict(a)
    for vid, v in b.items():
        out[vid] = fuse_streams(out[vid], v) if vid in out else v
    return dict(sorted(out.items()))


def score_proposals(proposals: Mapping[str, Sequence[tuple[TubePath, float]]],
                    ground_truth: Mapping[str, Sequence[GroundTruthTube]],
                    config: PipelineConfig | None = None) -> MetricsReport:
    """Metrics over every video that has ground truth; proposals match only their own video."""
    points = (0.5,) if config is None else tuple(sorted({0.5, config.recall_threshold}))
    per_video = [
        ([p for p, _ in proposals.get(vid, [])], ground_truth[vid]) for vid in sorted(ground_truth)
    ]
    return evaluate(per_video, recall_points=points)


def run_pipeline(config: PipelineConfig, detections: Mapping[str, VideoDetections],
                 ground_truth: Mapping[str, Sequence[GroundTruthTube]] | None = None,
                 threads: int = 1, extra_stream: Mapping[str, VideoDetections] | None = None):
    """Returns ``(proposals, report or None, warnings)``.

    Work is split per video; results are merged in video-id order so any
    thread count gives the same output.
    """
    if extra_stream:
        detections = fuse_all(detections, extra_stream)
    ids = sorted(detections)
    results = _map(lambda vid: propose_video(detections[vid], config), ids, threads)
    proposals: Proposals = {}
    warnings: list[str] = []
    for vid, (props, warns) in zip(ids, results):
        proposals[vid] = props
        warnings.extend(warns)
    for w in warnings:
        log.warning(w)
    report = score_proposals(proposals, ground_truth, config) if ground_truth else None
    return proposals, report, warnings
