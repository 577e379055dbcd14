"""Toy-scale training of the static and recurrent heads on synthetic videos."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .config import PipelineConfig
from .grid import GridTensor, encode_target, tensor_size
from .head import (
    AdamState, adam_update, bptt, init_dense, init_lstm, init_rnn, recurrent_forward,
    static_batch_gradient,
)
from .core import GroundTruthTube, mirror_box
from .synth import SyntheticVideo, make_rng

log = logging.getLogger(__name__)


@dataclass
class TrainResult:
    model: dict
    losses: list[float] = field(default_factory=list)  # mean per-frame loss, per epoch


@dataclass(eq=False)
class TrainingVideo:
    features: np.ndarray  # (T, D); D must be a square frame when mirroring
    tubes: Sequence[GroundTruthTube]

    @property
    def length(self) -> int:
        return len(self.features)

    @classmethod
    def from_synthetic(cls, v: SyntheticVideo) -> TrainingVideo:
        return cls(v.features, [v.ground_truth])

    def mirrored(self) -> TrainingVideo:
        side = int(round(np.sqrt(self.features.shape[1])))
        if side * side != self.features.shape[1]:
            raise ValueError("mirroring needs square frames")
        feats = self.features.reshape(-1, side, side)[:, :, ::-1].reshape(self.features.shape)
        tubes = [replace(g, boxes=tuple(mirror_box(b) for b in g.boxes)) for g in self.tubes]
        return TrainingVideo(feats.copy(), tubes)


def frame_gt(video: TrainingVideo, t: int) -> list:
    return [g.box_at(t) for g in video.tubes if g.start <= t <= g.end]


def init_model(config: PipelineConfig, n_in: int, rng) -> dict:
    k, b = config.grid_k, config.boxes_per_cell
    out = tensor_size(k, b)
    dims = {"D": n_in, "H": 0, "K": k, "B": b}
    if config.head == "static":
        return {"head": "static", "dims": dims, "cell": None,
                "readout": init_dense(rng, n_in, out), "seed": config.seed}
    dims["H"] = config.hidden
    if config.head == "lstm":
        cell = init_lstm(rng, n_in, config.hidden, config.modulation)
        readout = init_dense(rng, config.hidden, out)
    else:
        cell = init_rnn(rng, n_in, config.hidden, config.hidden)
        readout = init_dense(rng, config.hidden, out)
    return {"head": config.head, "dims": dims, "cell": cell, "readout": readout,
            "seed": config.seed}


def _pack(model):
    parts = [model["readout"]] if model["cell"] is None else [model["cell"], model["readout"]]
    return np.concatenate([p.flatten() for p in parts])


def _unpack(model, vec):
    if model["cell"] is None:
        return {**model, "readout": model["readout"].unflatten(vec)}
    n = model["cell"].size
    return {**model, "cell": model["cell"].unflatten(vec[:n]),
            "readout": model["readout"].unflatten(vec[n:])}


def train_toy(config: PipelineConfig, videos: Sequence) -> TrainResult:
    """Adam on the grid loss; learning rate drops after ``config.decay_epoch`` epochs.

    ``videos`` holds :class:`TrainingVideo` or :class:`SyntheticVideo` items.
    """
    rng = make_rng(config.seed)
    k, b = config.grid_k, config.boxes_per_cell
    videos = [TrainingVideo.from_synthetic(v) if isinstance(v, SyntheticVideo) else v
              for v in videos]
    if config.mirror:
        videos = videos + [v.mirrored() for v in videos]
    n_in = videos[0].features.shape[1]
    model = init_model(config, n_in, rng)
    state = AdamState.for_size(_pack(model).size, lr=config.learning_rate)
    weights = config.loss_weights()
    result = TrainResult(model)

    if config.head == "static":
        frames = np.concatenate([v.features for v in videos])
        gts = [frame_gt(v, t) for v in videos for t in range(v.length)]
        # with one predictor per cell, responsibility never depends on the prediction
        fixed = None
        if b == 1:
            zero = GridTensor.zeros(k, b)
            fixed = [encode_target(g, zero) for g in gts]
        for epoch in range(config.epochs):
            state = _with_lr(state, config.learning_rate_at(epoch))
            order = rng.permutation(len(frames))
            readout = model["readout"]
            vec = readout.flatten()
            total = 0.0
            for lo in range(0, len(order), config.batch_size):
                idx = order[lo : lo + config.batch_size]
                xs = frames[idx]
                if fixed is not None:
                    tg = [fixed[i] for i in idx]
                else:
                    preds = xs @ readout.w.T + readout.b
                    tg = [encode_target(gts[i], GridTensor(k, b, p)) for i, p in zip(idx, preds)]
                grads, loss = static_batch_gradient(readout, xs, tg, weights)
                total += loss
                vec, state = adam_update(state, vec, grads.flatten() / len(idx))
                readout = readout.unflatten(vec)
            model = {**model, "readout": readout}
            result.losses.append(total / len(frames))
            log.info("epoch %d loss %.5f", epoch, result.losses[-1])
    else:
        chunks = [(v, lo) for v in videos for lo in range(0, v.length, config.seq_len)]
        n_frames = sum(v.length for v in videos)
        for epoch in range(config.epochs):
            state = _with_lr(state, config.learning_rate_at(epoch))
            order = rng.permutation(len(chunks))
            vec = _pack(model)
            total = 0.0
            for lo in range(0, len(order), config.batch_size):
                acc = np.zeros_like(vec)
                count = 0
                for ci in order[lo : lo + config.batch_size]:
                    v, start = chunks[ci]
                    xs = v.features[start : start + config.seq_len]
                    preds = recurrent_forward(model["cell"], model["readout"], xs)
                    tg = [encode_target(frame_gt(v, start + i), GridTensor(k, b, p))
                          for i, p in enumerate(preds)]
                    g_cell, g_read, loss = bptt(model["cell"], model["readout"], xs, tg, weights)
                    acc += np.concatenate([g_cell.flatten(), g_read.flatten()])
                    count += len(xs)
                    total += loss
                vec, state = adam_update(state, vec, acc / count)
                model = _unpack(model, vec)
            result.losses.append(total / n_frames)
            log.info("epoch %d loss %.5f", epoch, result.losses[-1])
    result.model = model
    return result


def _with_lr(state: AdamState, lr: float) -> AdamState:
    return state if state.lr == lr else replace(state, lr=lr)
