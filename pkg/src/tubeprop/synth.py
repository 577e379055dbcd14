"""Synthetic untrimmed videos: one rectangle moving over a noisy background.

Every random draw goes through ``numpy.random.Generator(PCG64(seed))`` so a
seed reproduces a video bit for bit on any platform numpy supports.

Besides the rendered frames, a generated video carries its ground-truth tube
(the rectangle, restricted to the action segment) and an "oracle" detection
set: one box exactly on the rectangle in every frame plus a few distractor
boxes. The rectangle's scores follow the transition pattern the trimmer
relies on: actionness rises toward the middle of the action, background
score spikes at the two action boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import Box2D, FrameDetections, GroundTruthTube, ScoredBox, VideoDetections, mirror_box


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class SyntheticSpec:
    length: int = 50
    frame_size: int = 16
    start_box: Box2D = Box2D(0.5, 0.5, 0.25, 0.25)
    velocity: tuple[float, float] = (0.0, 0.0)
    action: tuple[int, int] | None = None  # None: the whole video
    noise: float = 0.0
    seed: int = 0
    class_label: str = "action"
    video_id: str = "vid0000"
    distractors: int = 2
    score_noise: float = 0.0
    background_noise: float = 0.05
    idle_intensity: float = 0.5

    def __post_init__(self):
        if self.length < 1:
            raise ValueError(f"length must be >= 1, got {self.length}")
        if self.action is None:
            object.__setattr__(self, "action", (0, self.length - 1))
        a_s, a_e = self.action
        if not 0 <= a_s <= a_e < self.length:
            raise ValueError(f"action segment {self.action} outside [0, {self.length - 1}]")
        if self.frame_size < 1:
            raise ValueError("frame_size must be >= 1")
        if self.noise < 0 or self.score_noise < 0 or self.background_noise < 0:
            raise ValueError("noise amplitudes must be >= 0")

    @property
    def trimmed(self) -> bool:
        return self.action == (0, self.length - 1)


@dataclass(eq=False)
class SyntheticVideo:
    spec: SyntheticSpec
    features: np.ndarray  # (T, frame_size ** 2)
    ground_truth: GroundTruthTube
    detections: VideoDetections
    boxes: list[Box2D] = field(default_factory=list)  # rectangle in every frame

    @property
    def video_id(self) -> str:
        return self.spec.video_id


def _trajectory(spec: SyntheticSpec, rng) -> list[Box2D]:
    b = spec.start_box
    out = []
    for t in range(spec.length):
        jitter = rng.uniform(-spec.noise, spec.noise, size=2) if spec.noise > 0 else (0.0, 0.0)
        x = b.x + spec.velocity[0] * t + jitter[0]
        y = b.y + spec.velocity[1] * t + jitter[1]
        x = min(max(x, b.w / 2), 1 - b.w / 2)
        y = min(max(y, b.h / 2), 1 - b.h / 2)
        out.append(Box2D(x, y, b.w, b.h))
    return out


def render(box: Box2D, size: int, intensity: float = 1.0) -> np.ndarray:
    """Area-coverage rendering of a box onto a ``size`` x ``size`` grid."""
    x1, y1, x2, y2 = (v * size for v in box.corners())
    edges = np.arange(size + 1, dtype=float)
    cover_x = np.clip(np.minimum(edges[1:], x2) - np.maximum(edges[:-1], x1), 0, 1)
    cover_y = np.clip(np.minimum(edges[1:], y2) - np.maximum(edges[:-1], y1), 0, 1)
    return intensity * np.outer(cover_y, cover_x)


def score_profiles(length: int, action: tuple[int, int]):
    """(conf, actionness, background) series for the rectangle's box.

    Actionness decays as 1/(1+u) away from the middle of the action;
    background decays the same way away from the nearest action boundary.
    Both are strictly monotone on each side of their maxima, so a running
    mean keeps a single peak per rise.
    """
    a_s, a_e = action
    t = np.arange(length, dtype=float)
    mid = (a_s + a_e) / 2
    half = max((a_e - a_s) / 2, 1.0)
    u = np.abs(t - mid)
    d = np.minimum(np.abs(t - a_s), np.abs(t - a_e))
    inside = (t >= a_s) & (t <= a_e)
    s_ac = 0.1 + 0.8 * half / (half + u)
    s_bg = 0.1 + 0.8 * 3.0 / (3.0 + d)
    conf = np.where(inside, 0.9, 0.6)
    return conf, s_ac, s_bg


def generate_synthetic(spec: SyntheticSpec) -> SyntheticVideo:
    rng = make_rng(spec.seed)
    boxes = _trajectory(spec, rng)
    a_s, a_e = spec.action
    size = spec.frame_size

    feats = np.empty((spec.length, size * size))
    for t, b in enumerate(boxes):
        acting = a_s <= t <= a_e
        img = rng.uniform(0.0, spec.background_noise, size=(size, size)) if spec.background_noise else np.zeros((size, size))
        img += render(b, size, 1.0 if acting else spec.idle_intensity)
        feats[t] = img.ravel()

    conf, s_ac, s_bg = score_profiles(spec.length, spec.action)
    if spec.score_noise > 0:
        conf = conf + rng.uniform(-spec.score_noise, spec.score_noise, spec.length)
        s_ac = s_ac + rng.uniform(-spec.score_noise, spec.score_noise, spec.length)
        s_bg = s_bg + rng.uniform(-spec.score_noise, spec.score_noise, spec.length)

    frames = []
    for t, b in enumerate(boxes):
        dets = []
        for _ in range(spec.distractors):
            w, h = rng.uniform(0.1, 0.3, size=2)
            x, y = rng.uniform(w / 2, 1 - w / 2), rng.uniform(h / 2, 1 - h / 2)
            dets.append(ScoredBox(Box2D(x, y, w, h), float(rng.uniform(0.05, 0.35)),
                                  float(rng.uniform(0.0, 0.2)), float(rng.uniform(0.6, 0.9))))
        slot = int(rng.integers(0, spec.distractors + 1))
        dets.insert(slot, ScoredBox(b, float(conf[t]), float(s_ac[t]), float(s_bg[t])))
        frames.append(FrameDetections(t, tuple(dets)))

    gt = GroundTruthTube(a_s, a_e, tuple(boxes[a_s : a_e + 1]), spec.class_label, spec.video_id)
    return SyntheticVideo(spec, feats, gt, VideoDetections(spec.video_id, tuple(frames)), boxes)


def sample_spec(rng: np.random.Generator, video_id: str, length: int = 50,
                untrimmed: bool = True, min_action: int = 10, max_action: int | None = None,
                classes=("class0", "class1"), **overrides) -> SyntheticSpec:
    """Random trajectory and action segment; the class follows the rectangle's shape."""
    max_action = max_action or max(min_action, int(0.6 * length))
    max_action = min(max_action, length)
    w, h = rng.uniform(0.15, 0.35, size=2)
    x = rng.uniform(w / 2, 1 - w / 2)
    y = rng.uniform(h / 2, 1 - h / 2)
    vx, vy = rng.uniform(-0.3, 0.3, size=2) / length
    if untrimmed:
        n = int(rng.integers(min(min_action, length), max_action + 1))
        a_s = int(rng.integers(0, length - n + 1))
        action = (a_s, a_s + n - 1)
    else:
        action = (0, length - 1)
    label = classes[0] if w >= h or len(classes) == 1 else classes[1]
    kw = dict(
        length=length, start_box=Box2D(x, y, w, h), velocity=(float(vx), float(vy)),
        action=action, noise=0.005, score_noise=0.02, seed=int(rng.integers(0, 2**31 - 1)),
        class_label=label, video_id=video_id,
    )
    kw.update(overrides)
    return SyntheticSpec(**kw)


def make_dataset(n: int, seed: int, length: int = 50, untrimmed_fraction: float = 0.25,
                 prefix: str = "vid", **overrides) -> list[SyntheticVideo]:
    """``n`` videos; about ``untrimmed_fraction`` of them have a partial action segment."""
    rng = make_rng(seed)
    out = []
    for i in range(n):
        untrimmed = bool(rng.uniform() < untrimmed_fraction)
        spec = sample_spec(rng, f"{prefix}{i:04d}", length=length, untrimmed=untrimmed, **overrides)
        out.append(generate_synthetic(spec))
    return out


def mirror_video(video: SyntheticVideo) -> SyntheticVideo:
    """Horizontally flipped copy: frames flipped left-right, every box mirrored."""
    size = video.spec.frame_size
    feats = video.features.reshape(-1, size, size)[:, :, ::-1].reshape(video.features.shape)
    gt = video.ground_truth
    gt = replace(gt, boxes=tuple(mirror_box(b) for b in gt.boxes))
    frames = tuple(
        FrameDetections(fr.frame_index, tuple(replace(sb, box=mirror_box(sb.box)) for sb in fr.boxes))
        for fr in video.detections.frames
    )
    return SyntheticVideo(
        video.spec, feats.copy(), gt, VideoDetections(video.detections.video_id, frames),
        [mirror_box(b) for b in video.boxes],
    )
