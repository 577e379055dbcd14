"""Line-delimited JSON interchange files.

detections   {"video_id", "frame", "boxes": [{"x","y","w","h","conf","ac","bg"}]}
ground truth {"video_id", "class", "start", "end", "boxes": [{"x","y","w","h"}]}
proposals    ground-truth layout plus "score"; boxes also carry conf/ac/bg

One object per line, UTF-8. Detection frames may come in any order but every
video must list each of its frames 0..T-1 exactly once. Frame features live in
an ``.npz`` archive keyed by video id, one (T, D) array each.
"""

from __future__ import annotations

import json
import math
import zipfile
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import Box2D, FrameDetections, GroundTruthTube, ScoredBox, TubePath, VideoDetections


class FormatError(ValueError):
    def __init__(self, path, line: int | None, field: str | None, message: str):
        where = f"{path}" + (f":{line}" if line is not None else "")
        super().__init__(f"{where}: {field + ': ' if field else ''}{message}")
        self.path = str(path)
        self.line = line
        self.field = field
        self.message = message

    def to_record(self) -> dict:
        return {"error": "format", "file": self.path, "line": self.line,
                "field": self.field, "message": self.message}


def _dumps(rec) -> str:
    return json.dumps(rec, ensure_ascii=False, separators=(",", ":"), allow_nan=False)


def _records(path) -> Iterable[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(path, lineno, None, f"invalid JSON ({e.msg})") from None
            if not isinstance(rec, dict):
                raise FormatError(path, lineno, None, "record is not an object")
            yield lineno, rec


def _get(rec, key, kind, path, lineno, prefix=""):
    if key not in rec:
        raise FormatError(path, lineno, prefix + key, "missing")
    v = rec[key]
    if kind is float:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise FormatError(path, lineno, prefix + key, f"expected a finite number, got {v!r}")
        return float(v)
    if kind is int:
        if isinstance(v, bool) or not isinstance(v, int):
            raise FormatError(path, lineno, prefix + key, f"expected an integer, got {v!r}")
        return v
    if kind is str:
        if not isinstance(v, str):
            raise FormatError(path, lineno, prefix + key, f"expected a string, got {v!r}")
        return v
    if kind is list:
        if not isinstance(v, list):
            raise FormatError(path, lineno, prefix + key, f"expected a list, got {type(v).__name__}")
        return v
    raise TypeError(kind)


def _box(rec, path, lineno, prefix) -> Box2D:
    if not isinstance(rec, dict):
        raise FormatError(path, lineno, prefix.rstrip("."), "box is not an object")
    return Box2D(*(_get(rec, k, float, path, lineno, prefix) for k in ("x", "y", "w", "h")))


def _scored(rec, path, lineno, prefix) -> ScoredBox:
    box = _box(rec, path, lineno, prefix)
    return ScoredBox(box, *(_get(rec, k, float, path, lineno, prefix) for k in ("conf", "ac", "bg")))


def box_record(b: Box2D) -> dict:
    return {"x": b.x, "y": b.y, "w": b.w, "h": b.h}


def scored_record(sb: ScoredBox) -> dict:
    return {**box_record(sb.box), "conf": sb.conf, "ac": sb.s_ac, "bg": sb.s_bg}


# --- detections -----------------------------------------------------------


def read_detections(path) -> dict[str, VideoDetections]:
    frames: dict[str, dict[int, tuple[ScoredBox, ...]]] = defaultdict(dict)
    first_line: dict[str, int] = {}
    for lineno, rec in _records(path):
        vid = _get(rec, "video_id", str, path, lineno)
        t = _get(rec, "frame", int, path, lineno)
        if t < 0:
            raise FormatError(path, lineno, "frame", f"negative frame index {t}")
        raw = _get(rec, "boxes", list, path, lineno)
        boxes = tuple(_scored(b, path, lineno, f"boxes[{i}].") for i, b in enumerate(raw))
        if t in frames[vid]:
            raise FormatError(path, lineno, "frame", f"video {vid!r} repeats frame {t}")
        frames[vid][t] = boxes
        first_line.setdefault(vid, lineno)
    out = {}
    for vid in sorted(frames):
        got = frames[vid]
        missing = sorted(set(range(max(got) + 1)) - set(got))
        if missing:
            raise FormatError(path, first_line[vid], "frame",
                              f"video {vid!r} is missing frames {missing[:10]}")
        out[vid] = VideoDetections(
            vid, tuple(FrameDetections(t, got[t]) for t in range(len(got)))
        )
    return out


def write_detections(path, videos: Iterable[VideoDetections]):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for v in sorted(videos, key=lambda v: v.video_id):
            for fr in v.frames:
                fh.write(_dumps({"video_id": v.video_id, "frame": fr.frame_index,
                                 "boxes": [scored_record(b) for b in fr.boxes]}) + "\n")


# --- ground truth ---------------------------------------------------------


def read_ground_truth(path) -> dict[str, list[GroundTruthTube]]:
    out: dict[str, list[GroundTruthTube]] = defaultdict(list)
    for lineno, rec in _records(path):
        vid = _get(rec, "video_id", str, path, lineno)
        label = _get(rec, "class", str, path, lineno)
        s = _get(rec, "start", int, path, lineno)
        e = _get(rec, "end", int, path, lineno)
        raw = _get(rec, "boxes", list, path, lineno)
        if s < 0 or e < s:
            raise FormatError(path, lineno, "start", f"bad span [{s}, {e}]")
        if len(raw) != e - s + 1:
            raise FormatError(path, lineno, "boxes", f"{len(raw)} boxes for span [{s}, {e}]")
        boxes = tuple(_box(b, path, lineno, f"boxes[{i}].") for i, b in enumerate(raw))
        out[vid].append(GroundTruthTube(s, e, boxes, label, vid))
    return dict(sorted(out.items()))


def write_ground_truth(path, tubes: Iterable[GroundTruthTube]):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for g in sorted(tubes, key=lambda g: (g.video_id, g.start, g.end, g.class_label)):
            fh.write(_dumps({"video_id": g.video_id, "class": g.class_label, "start": g.start,
                             "end": g.end, "boxes": [box_record(b) for b in g.boxes]}) + "\n")


# --- proposals ------------------------------------------------------------


def read_proposals(path) -> dict[str, list[tuple[TubePath, float]]]:
    out: dict[str, list[tuple[TubePath, float]]] = defaultdict(list)
    for lineno, rec in _records(path):
        vid = _get(rec, "video_id", str, path, lineno)
        s = _get(rec, "start", int, path, lineno)
        e = _get(rec, "end", int, path, lineno)
        score = _get(rec, "score", float, path, lineno)
        raw = _get(rec, "boxes", list, path, lineno)
        if s < 0 or e < s:
            raise FormatError(path, lineno, "start", f"bad span [{s}, {e}]")
        if len(raw) != e - s + 1:
            raise FormatError(path, lineno, "boxes", f"{len(raw)} boxes for span [{s}, {e}]")
        boxes = []
        for i, b in enumerate(raw):
            prefix = f"boxes[{i}]."
            if isinstance(b, dict) and "conf" in b:
                boxes.append(_scored(b, path, lineno, prefix))
            else:
                boxes.append(ScoredBox(_box(b, path, lineno, prefix), 0.0))
        out[vid].append((TubePath(s, e, tuple(boxes)), score))
    return dict(sorted(out.items()))


def write_proposals(path, proposals: dict[str, Sequence[tuple[TubePath, float]]]):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for vid in sorted(proposals):
            for p, score in proposals[vid]:
                fh.write(_dumps({"video_id": vid, "class": None, "start": p.start, "end": p.end,
                                 "score": score, "boxes": [scored_record(b) for b in p.boxes]}) + "\n")


# --- features and reports -------------------------------------------------


def read_features(path) -> dict[str, np.ndarray]:
    with np.load(path, allow_pickle=False) as z:
        return {k: np.asarray(z[k], float) for k in sorted(z.files)}


def write_features(path, features: dict[str, np.ndarray]):
    """Same layout as ``np.savez`` but with fixed entry dates, so reruns are byte-identical."""
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for key in sorted(features):
            info = zipfile.ZipInfo(key + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
            with zf.open(info, "w", force_zip64=True) as fh:
                np.lib.format.write_array(fh, np.asarray(features[key], float), allow_pickle=False)


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n",
                          encoding="utf-8")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))
