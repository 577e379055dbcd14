import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from tubeprop.core import Box2D, ScoredBox, TubePath
from tubeprop.metrics import tube_overlap
from tubeprop.core import GroundTruthTube
from tubeprop.trimming import (
    PeakSet, TrimConfig, find_peaks, path_peaks, segments_from_peaks, smooth, trim,
)

BOX = Box2D(0.5, 0.5, 0.2, 0.2)
series = st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=40)


def make_path(ac, bg, start=0):
    boxes = tuple(ScoredBox(BOX, 1.0, float(a), float(b)) for a, b in zip(ac, bg))
    return TubePath(start, start + len(boxes) - 1, boxes)


def brute_smooth(vals, window):
    half = window // 2
    return [np.mean(vals[max(0, t - half) : t + half + 1]) for t in range(len(vals))]


# --- smoothing ------------------------------------------------------------


def test_smooth_identity():
    assert list(smooth([3, 1, 4, 1, 5], 1)) == [3, 1, 4, 1, 5]


def test_smooth_edge_example():
    assert list(smooth([0, 3, 0], 3)) == pytest.approx([1.5, 1.0, 1.5], abs=1e-15)


def test_smooth_constant():
    assert list(smooth([0.7] * 9, 5)) == [0.7] * 9
    assert list(smooth([0.1] * 4, 3)) == [0.1] * 4


def test_smooth_rejects_bad_window():
    for w in (0, -1, 2, 4):
        with pytest.raises(ValueError):
            smooth([1, 2, 3], w)


@given(series, st.sampled_from([1, 3, 5, 7, 9]))
def test_smooth_matches_brute_force_and_range(vals, window):
    out = smooth(vals, window)
    assert out == pytest.approx(brute_smooth(vals, window), abs=1e-9)
    assert out.min() >= min(vals) - 1e-12 and out.max() <= max(vals) + 1e-12


# --- peaks ----------------------------------------------------------------


def test_peak_examples():
    assert find_peaks([0, 1, 0, 2, 0], 1) == [1, 3]
    assert find_peaks([0, 1, 1, 0], 1) == [1]
    assert find_peaks([0, 1, 2, 3, 4], 1) == [4]
    assert find_peaks([2.0] * 6, 2) == []


def brute_peaks(vals, n):
    """Windowed-max definition, then keep the first of each run of equal adjacent peaks."""
    cand = [t for t in range(len(vals))
            if vals[t] == max(vals[max(0, t - n) : t + n + 1])]
    if max(vals) == min(vals):
        return []
    out = []
    for t in cand:
        if out and t - 1 in cand and vals[t - 1] == vals[t]:
            continue
        out.append(t)
    return out


@given(st.lists(st.integers(0, 4), min_size=1, max_size=30), st.integers(1, 4))
def test_peaks_match_brute_force(vals, n):
    # small integers make plateaus and ties common, and are compared exactly
    assert find_peaks([float(v) for v in vals], n) == brute_peaks(vals, n)


@given(series, st.integers(1, 6))
def test_peaks_sorted_unique_in_range(vals, n):
    p = find_peaks(vals, n)
    assert p == sorted(set(p))
    assert all(0 <= t < len(vals) for t in p)


# --- trimming -------------------------------------------------------------


def test_algorithm_example():
    assert segments_from_peaks(PeakSet(ac=(9,), bg=(4, 15)), 20) == [(4, 15)]


def test_start_clamps_to_path_start():
    assert segments_from_peaks(PeakSet(ac=(2,), bg=(6,)), 10) == [(0, 6)]
    assert segments_from_peaks(PeakSet(ac=(8,), bg=(6,)), 10) == [(6, 9)]


def test_duplicate_pairs_emitted_once():
    assert segments_from_peaks(PeakSet(ac=(3, 5), bg=(1, 8)), 10) == [(1, 8)]


def tent(length, peaks):
    """Strictly falls away from the nearest listed frame."""
    t = np.arange(length)
    d = np.min(np.abs(t[:, None] - np.asarray(peaks)[None, :]), axis=1)
    return 1.0 / (1.0 + d)


def test_trim_example_via_scores():
    # an evenly flat stretch wider than the window would itself count as a
    # peak, so both profiles fall away from their peaks
    ac = tent(20, [9])
    bg = tent(20, [4, 15])
    segs, labels = trim(make_path(ac, bg, start=100), TrimConfig(1, 3))
    assert [(s.start, s.end) for s in segs] == [(104, 115)]
    assert list(labels) == [0] * 4 + [1] * 12 + [0] * 4


def test_no_actionness_peak_returns_whole_path():
    path = make_path([0.3] * 12, np.linspace(0, 1, 12))
    segs, labels = trim(path)
    assert segs == [path] and labels.all()


def test_two_action_profile():
    t = np.arange(30)
    in1, in2 = (t >= 5) & (t <= 10), (t >= 20) & (t <= 25)
    ac = np.where(in1 | in2, 0.9, 0.1)
    bg = 0.1 + 0.8 * tent(30, [0, 15, 29])
    path = make_path(ac, bg)
    segs, _ = trim(path, TrimConfig(smooth_window=1, neighborhood=5))
    assert [(s.start, s.end) for s in segs] == [(0, 15), (15, 29)]
    assert trim(path)[0] == segs  # default smoothing finds the same peaks
    for seg, (gs, ge) in zip(segs, [(5, 10), (20, 25)]):
        gt = GroundTruthTube(gs, ge, (BOX,) * (ge - gs + 1))
        assert tube_overlap(seg, gt) >= 0.3


@given(st.lists(st.floats(0, 1), min_size=3, max_size=40), st.lists(st.floats(0, 1), min_size=40),
       st.sampled_from([1, 3, 5]), st.integers(1, 5))
def test_segments_follow_peaks(ac, bg, window, n):
    bg = bg[: len(ac)]
    path = make_path(ac, bg)
    cfg = TrimConfig(window, n)
    peaks = path_peaks(path, cfg)
    segs, labels = trim(path, cfg)
    assert len(labels) == len(path)
    covered = np.zeros(len(path), bool)
    for s in segs:
        lo, hi = s.start - path.start, s.end - path.start
        covered[lo : hi + 1] = True
        assert lo in peaks.bg or lo == 0
        assert hi in peaks.bg or hi == len(path) - 1
        assert not peaks.ac or any(lo <= p <= hi for p in peaks.ac)
    assert np.array_equal(covered, labels.astype(bool))


@given(st.lists(st.floats(0, 1), min_size=3, max_size=40), st.lists(st.floats(0, 1), min_size=40),
       st.sampled_from([1, 3, 5]), st.integers(1, 5))
def test_retrim_is_idempotent(ac, bg, window, n):
    cfg = TrimConfig(window, n)
    path = make_path(ac, bg[: len(ac)])
    for seg in trim(path, cfg)[0]:
        inner = [p for p in path_peaks(seg, cfg).bg if 0 < p < len(seg) - 1]
        if not inner:
            assert trim(seg, cfg)[0] == [seg]


def test_no_interior_background_peak_keeps_whole_path():
    t = np.arange(40)
    ac = 1.0 / (1.0 + np.abs(t - 17))
    bg = np.linspace(0.9, 0.1, 40)  # only a boundary peak at frame 0
    path = make_path(ac, bg)
    assert trim(path)[0] == [path]
