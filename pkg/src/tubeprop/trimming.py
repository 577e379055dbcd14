"""Cutting video-long paths down to action segments.

Both score series of a path (actionness and background) are smoothed with a
centered running average and their peaks located. Each actionness peak opens a
segment that runs from the nearest background peak before it to the nearest
background peak after it (path ends when there is none).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import TubePath

# values closer than this count as equal when comparing smoothed scores
EQ_TOL = 1e-12


@dataclass(frozen=True)
class TrimConfig:
    smooth_window: int = 5
    neighborhood: int = 5

    def __post_init__(self):
        if self.smooth_window < 1 or self.smooth_window % 2 == 0:
            raise ValueError(f"smooth_window must be odd and >= 1, got {self.smooth_window}")
        if self.neighborhood < 1:
            raise ValueError(f"neighborhood must be >= 1, got {self.neighborhood}")


@dataclass(frozen=True)
class PeakSet:
    ac: tuple[int, ...]
    bg: tuple[int, ...]


def smooth(series: Sequence[float], window: int) -> np.ndarray:
    """Centered running mean; near the ends only the existing neighbors are averaged."""
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 1, got {window}")
    vals = [float(v) for v in series]
    if not vals:
        raise ValueError("empty series")
    half = window // 2
    n = len(vals)
    out = np.empty(n)
    for t in range(n):
        chunk = vals[max(0, t - half) : min(n, t + half + 1)]
        # averaging offsets from one member keeps constant stretches exact
        out[t] = chunk[0] + math.fsum(v - chunk[0] for v in chunk) / len(chunk)
    return out


def find_peaks(series: Sequence[float], n: int) -> list[int]:
    """Indices that equal the maximum of their clipped [t-n, t+n] window.

    Runs of adjacent equal-valued peaks keep only their leftmost index; a
    constant series has no peaks.
    """
    if n < 1:
        raise ValueError(f"neighborhood must be >= 1, got {n}")
    s = np.asarray(series, dtype=float)
    if s.size == 0 or s.max() - s.min() <= EQ_TOL:
        return []
    peaks = []
    last = None
    for t in range(s.size):
        lo, hi = max(0, t - n), min(s.size, t + n + 1)
        if s[t] < s[lo:hi].max() - EQ_TOL:
            continue
        if last == t - 1 and abs(s[t] - s[last]) <= EQ_TOL:
            last = t
            continue
        peaks.append(t)
        last = t
    return peaks


def path_peaks(path: TubePath, config: TrimConfig = TrimConfig()) -> PeakSet:
    ac = smooth([b.s_ac for b in path.boxes], config.smooth_window)
    bg = smooth([b.s_bg for b in path.boxes], config.smooth_window)
    return PeakSet(
        tuple(find_peaks(ac, config.neighborhood)), tuple(find_peaks(bg, config.neighborhood))
    )


def segments_from_peaks(peaks: PeakSet, length: int) -> list[tuple[int, int]]:
    """(start, end) offsets, one per actionness peak, duplicates removed, in peak order."""
    bg = np.asarray(peaks.bg, dtype=int)
    out = []
    for p in peaks.ac:
        before = bg[bg < p]
        after = bg[bg > p]
        s = int(before.max()) if before.size else 0
        e = int(after.min()) if after.size else length - 1
        if (s, e) not in out:
            out.append((s, e))
    return out


def trim(path: TubePath, config: TrimConfig = TrimConfig()):
    """Returns ``(segments, labels)``; ``labels`` has one 0/1 entry per path frame.

    Without any actionness peak the whole path comes back as one segment.
    """
    peaks = path_peaks(path, config)
    spans = segments_from_peaks(peaks, len(path))
    if not spans:
        spans = [(0, len(path) - 1)]
    labels = np.zeros(len(path), dtype=np.int8)
    segments = []
    for s, e in spans:
        labels[s : e + 1] = 1
        segments.append(path.segment(path.start + s, path.start + e))
    return segments, labels
