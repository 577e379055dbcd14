import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tubeprop.core import Box2D, FrameDetections, ScoredBox, TubePath, VideoDetections, iou
from tubeprop.linking import (
    EmptyFrameError, LinkConfig, extract_paths, fuse_streams, path_score, viterbi_link,
)

import gradcheck


def video_from(frames, vid="v"):
    return VideoDetections(vid, tuple(FrameDetections(t, tuple(f)) for t, f in enumerate(frames)))


def random_video(rng, max_t=6, max_boxes=4, min_boxes=1, vid="v"):
    t_len = int(rng.integers(1, max_t + 1))
    frames = []
    for _ in range(t_len):
        n = int(rng.integers(min_boxes, max_boxes + 1))
        frames.append([ScoredBox(b, float(rng.uniform(-0.5, 1.5)))
                       for b in gradcheck.random_boxes(rng, n)])
    return video_from(frames, vid)


def brute_force_best(video: VideoDetections, lambda0: float) -> float:
    """Maximum score over every path, scored by an independent loop."""
    frames = [fr.boxes for fr in video.frames]
    best = -np.inf
    for combo in itertools.product(*frames):
        s = sum(b.conf for b in combo)
        s += lambda0 * sum(iou(combo[t].box, combo[t - 1].box) for t in range(1, len(combo)))
        best = max(best, s)
    return best


def sb(conf, x=0.5):
    return ScoredBox(Box2D(x, 0.5, 0.2, 0.2), conf)


def test_path_score_examples():
    assert path_score(TubePath(0, 0, (sb(0.7),)), 1.0) == pytest.approx(0.7)
    assert path_score(TubePath(0, 1, (sb(0.5), sb(0.5))), 2.0) == pytest.approx(3.0)
    p = TubePath(0, 2, (sb(0.1, 0.2), sb(0.4, 0.3), sb(0.9, 0.9)))
    assert path_score(p, 0.0) == pytest.approx(1.4)


def test_single_box_per_frame():
    v = video_from([[sb(0.3)], [sb(0.2, 0.6)], [sb(0.9, 0.8)]])
    out = viterbi_link(v)
    assert [b.conf for b in out.path.boxes] == [0.3, 0.2, 0.9]


def test_tie_break_example():
    # confidences only; lambda0 = 0 so positions do not matter
    v = video_from([[sb(0.9), sb(0.1)], [sb(0.2), sb(0.8)], [sb(0.5), sb(0.5)]])
    out = viterbi_link(v, LinkConfig(lambda0=0.0))
    picks = [fr.boxes.index(b) + 1 for fr, b in zip(v.frames, out.path.boxes)]
    assert picks == [1, 2, 1]
    assert out.score == pytest.approx(2.2, abs=1e-12)


def test_empty_frame_raises():
    v = video_from([[sb(0.3)], []])
    with pytest.raises(EmptyFrameError):
        viterbi_link(v)
    assert extract_paths(v) == []


def test_viterbi_matches_enumeration(rng):
    for _ in range(200):
        v = random_video(rng)
        lam = float(rng.uniform(0, 3))
        out = viterbi_link(v, LinkConfig(lambda0=lam))
        assert abs(out.score - brute_force_best(v, lam)) < 1e-9
        assert out.score == path_score(out.path, lam)


def test_scaling_leaves_argmax_unchanged(rng):
    for _ in range(50):
        v = random_video(rng)
        lam = float(rng.uniform(0, 3))
        c = 2.0 ** int(rng.integers(-4, 5))  # exact in binary, so no new near-ties
        scaled = video_from([[ScoredBox(b.box, b.conf * c) for b in fr.boxes] for fr in v.frames])
        a = viterbi_link(v, LinkConfig(lambda0=lam))
        b = viterbi_link(scaled, LinkConfig(lambda0=lam * c))
        assert [x.box for x in a.path.boxes] == [x.box for x in b.path.boxes]
        assert b.score == pytest.approx(c * a.score, rel=1e-12, abs=1e-12)


def test_extract_one_box_per_frame():
    v = video_from([[sb(0.3)], [sb(0.4)]])
    assert len(extract_paths(v)) == 1


def test_extract_respects_cap(rng):
    v = random_video(rng, max_t=5, min_boxes=2, max_boxes=2)
    assert len(extract_paths(v, LinkConfig(max_paths=1))) == 1


def test_two_paths_partition_boxes(rng):
    for _ in range(30):
        frames = [[ScoredBox(b, float(rng.uniform(0, 1))) for b in gradcheck.random_boxes(rng, 2)]
                  for _ in range(4)]
        v = video_from(frames)
        paths = extract_paths(v)
        assert len(paths) == 2
        for t in range(4):
            used = {id(p.path.boxes[t]) for p in paths}
            assert used == {id(b) for b in frames[t]}
        assert abs(paths[0].score - brute_force_best(v, 1.0)) < 1e-9


@given(st.integers(0, 2**32 - 1))
def test_extracted_paths_are_disjoint_and_full(seed):
    rng = np.random.default_rng(seed)
    v = random_video(rng, max_t=5, max_boxes=5)
    paths = extract_paths(v)
    assert 1 <= len(paths) <= min(len(fr.boxes) for fr in v.frames)
    for t, fr in enumerate(v.frames):
        ids = [id(p.path.boxes[t]) for p in paths]
        assert len(set(ids)) == len(ids)
        assert set(ids) <= {id(b) for b in fr.boxes}
    for p in paths:
        assert (p.path.start, p.path.end) == (0, v.length - 1)
        assert p.score == path_score(p.path, 1.0)
    # greedy order: each later path is optimal on what was left, so no later path beats the first
    assert all(p.score <= paths[0].score + 1e-9 for p in paths)


def test_extract_is_deterministic(rng):
    v = random_video(rng, max_t=6, max_boxes=4)
    a, b = extract_paths(v), extract_paths(v)
    assert [(p.score, p.path) for p in a] == [(p.score, p.path) for p in b]


def test_fuse_union_cardinality():
    a = video_from([[sb(0.1), sb(0.2)]])
    b = video_from([[sb(0.3), sb(0.4), sb(0.5)]])
    fused = fuse_streams(a, b)
    assert len(fused.frames[0].boxes) == 5
    assert fused.frames[0].boxes[:2] == a.frames[0].boxes


def test_fuse_with_empty_stream():
    a = video_from([[sb(0.1)], [sb(0.2)]])
    empty = video_from([[], []])
    assert fuse_streams(a, empty) == a


def test_fuse_mismatch_rejected():
    with pytest.raises(ValueError):
        fuse_streams(video_from([[sb(0.1)]]), video_from([[sb(0.1)], [sb(0.1)]]))
    with pytest.raises(ValueError):
        fuse_streams(video_from([[sb(0.1)]], "a"), video_from([[sb(0.1)]], "b"))


def test_fusion_never_lowers_best_score(rng):
    for _ in range(50):
        a = random_video(rng, max_t=4, max_boxes=3)
        b = video_from([[ScoredBox(x, float(rng.uniform(0, 1)))
                         for x in gradcheck.random_boxes(rng, int(rng.integers(1, 4)))]
                        for _ in range(a.length)])
        fused = extract_paths(fuse_streams(a, b))[0].score
        assert fused >= extract_paths(a)[0].score - 1e-12
        assert abs(fused - brute_force_best(fuse_streams(a, b), 1.0)) < 1e-9


def test_link_config_validation():
    with pytest.raises(ValueError):
        LinkConfig(lambda0=-1)
    with pytest.raises(ValueError):
        LinkConfig(max_paths=0)
