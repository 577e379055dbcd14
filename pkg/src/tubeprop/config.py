"""Pipeline configuration, read from a single JSON object.

Every key is optional; missing keys take the defaults below. Unknown keys are
rejected so that typos do not silently fall back to defaults.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

from .head import LossWeights
from .io import FormatError
from .linking import LinkConfig
from .trimming import TrimConfig


@dataclass(frozen=True)
class PipelineConfig:
    # grid
    grid_k: int = 7
    boxes_per_cell: int = 2
    # loss
    lambda_coord: float = 5.0
    lambda_noobj: float = 0.5
    # linking
    lambda0: float = 1.0
    max_paths: int = 100
    # trimming
    trim: bool = True
    smooth_window: int = 5
    neighborhood: int = 5
    # toy training
    head: str = "static"
    hidden: int = 32
    modulation: str = "sigmoid"
    epochs: int = 100
    batch_size: int = 32
    seq_len: int = 10
    learning_rate: float = 1e-4
    decayed_learning_rate: float = 1e-5
    decay_epoch: int = 20
    mirror: bool = True
    # synthetic data
    feature_size: int = 16
    video_length: int = 50
    untrimmed_fraction: float = 0.25
    # evaluation
    recall_threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.grid_k < 1 or self.boxes_per_cell < 1:
            raise ValueError("grid_k and boxes_per_cell must be >= 1")
        if self.head not in ("static", "lstm", "rnn"):
            raise ValueError(f"head must be static, lstm or rnn, got {self.head!r}")
        if self.epochs < 0 or self.batch_size < 1 or self.seq_len < 1 or self.hidden < 1:
            raise ValueError("training schedule values out of range")
        if not (self.learning_rate > 0 and self.decayed_learning_rate > 0):
            raise ValueError("learning rates must be positive")
        if not 0.0 <= self.untrimmed_fraction <= 1.0:
            raise ValueError("untrimmed_fraction must lie in [0, 1]")
        if not 0.0 <= self.recall_threshold <= 1.0:
            raise ValueError("recall_threshold must lie in [0, 1]")
        # delegate the remaining range checks
        self.link_config()
        self.trim_config()
        self.loss_weights()

    def link_config(self) -> LinkConfig:
        return LinkConfig(self.lambda0, self.max_paths)

    def trim_config(self) -> TrimConfig:
        return TrimConfig(self.smooth_window, self.neighborhood)

    def loss_weights(self) -> LossWeights:
        return LossWeights(self.lambda_coord, self.lambda_noobj)

    def learning_rate_at(self, epoch: int) -> float:
        return self.learning_rate if epoch < self.decay_epoch else self.decayed_learning_rate

    def to_dict(self) -> dict:
        return asdict(self)


def config_from_dict(raw: dict, source="<config>") -> PipelineConfig:
    known = {f.name: f for f in fields(PipelineConfig)}
    kw = {}
    for key, value in raw.items():
        if key not in known:
            raise FormatError(source, None, key, "unknown config key")
        want = type(getattr(PipelineConfig, key))
        if want is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, want) or (want is int and isinstance(value, bool)):
            raise FormatError(source, None, key, f"expected {want.__name__}, got {value!r}")
        kw[key] = value
    try:
        return PipelineConfig(**kw)
    except ValueError as e:
        raise FormatError(source, None, None, str(e)) from None


def load_config(path=None, **overrides) -> PipelineConfig:
    raw = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as e:
                raise FormatError(path, e.lineno, None, f"invalid JSON ({e.msg})") from None
        if not isinstance(raw, dict):
            raise FormatError(path, None, None, "config must be a JSON object")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(raw, path or "<config>")
