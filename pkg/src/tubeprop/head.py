"""Desk-scale regression heads and their training math.

Three per-frame heads map a feature vector to a grid tensor:

* static: one dense layer, ``y = W x + b``;
* recurrent (LSTM): gated cell, then a dense readout of the hidden state;
* recurrent (plain RNN): sigmoid cell with its own sigmoid output ``z``, then a
  dense readout of ``z``.

Everything is double precision numpy. Gradients are derived by hand and are
checked against central differences in the test suite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .grid import FrameTarget, GridTensor, cell_depth, tensor_size

LAMBDA_COORD = 5.0
LAMBDA_NOOBJ = 0.5


def sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


# --- parameter containers -------------------------------------------------


class _Params:
    """Shared flatten/unflatten over the ndarray fields, in declaration order."""

    def arrays(self) -> list[tuple[str, np.ndarray]]:
        return [
            (f.name, getattr(self, f.name))
            for f in fields(self)
            if isinstance(getattr(self, f.name), np.ndarray)
        ]

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for _, a in self.arrays()])

    def unflatten(self, vec: np.ndarray):
        vec = np.asarray(vec, dtype=float)
        out, i = {}, 0
        for name, a in self.arrays():
            out[name] = vec[i : i + a.size].reshape(a.shape).copy()
            i += a.size
        if i != vec.size:
            raise ValueError(f"vector of {vec.size} entries for {i} parameters")
        return replace(self, **out)

    def zeros_like(self):
        return replace(self, **{n: np.zeros_like(a) for n, a in self.arrays()})

    @property
    def size(self) -> int:
        return sum(a.size for _, a in self.arrays())


@dataclass(eq=False)
class DenseParams(_Params):
    w: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)

    def __post_init__(self):
        if self.w.ndim != 2 or self.b.shape != (self.w.shape[0],):
            raise ValueError(f"dense shapes disagree: w{self.w.shape} b{self.b.shape}")


@dataclass(eq=False)
class RnnParams(_Params):
    w_xh: np.ndarray  # (H, D)
    w_hh: np.ndarray  # (H, H)
    b_h: np.ndarray  # (H,)
    w_hz: np.ndarray  # (Z, H)
    b_z: np.ndarray  # (Z,)

    def __post_init__(self):
        h = self.w_xh.shape[0]
        ok = (
            self.w_hh.shape == (h, h)
            and self.b_h.shape == (h,)
            and self.w_hz.shape[1:] == (h,)
            and self.b_z.shape == (self.w_hz.shape[0],)
        )
        if not ok:
            raise ValueError("rnn parameter shapes disagree")

    @property
    def hidden(self) -> int:
        return self.w_xh.shape[0]


GATES = ("i", "f", "o", "c")


@dataclass(eq=False)
class LstmParams(_Params):
    w_xi: np.ndarray
    w_xf: np.ndarray
    w_xo: np.ndarray
    w_xc: np.ndarray
    w_hi: np.ndarray
    w_hf: np.ndarray
    w_ho: np.ndarray
    w_hc: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_c: np.ndarray
    # "sigmoid" follows the printed cell equations; "tanh" is the usual LSTM
    modulation: str = "sigmoid"

    def __post_init__(self):
        h, d = self.w_xi.shape
        for g in GATES:
            if getattr(self, "w_x" + g).shape != (h, d):
                raise ValueError(f"w_x{g} should be {(h, d)}")
            if getattr(self, "w_h" + g).shape != (h, h):
                raise ValueError(f"w_h{g} should be {(h, h)}")
            if getattr(self, "b_" + g).shape != (h,):
                raise ValueError(f"b_{g} should be {(h,)}")
        if self.modulation not in ("sigmoid", "tanh"):
            raise ValueError(f"unknown modulation {self.modulation!r}")

    @property
    def hidden(self) -> int:
        return self.w_xi.shape[0]

    @property
    def input_size(self) -> int:
        return self.w_xi.shape[1]


@dataclass(frozen=True, eq=False)
class LstmState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden: int) -> LstmState:
        return cls(np.zeros(hidden), np.zeros(hidden))


@dataclass(frozen=True)
class LossWeights:
    lambda_coord: float = LAMBDA_COORD
    lambda_noobj: float = LAMBDA_NOOBJ

    def __post_init__(self):
        if not (self.lambda_coord > 0 and self.lambda_noobj > 0):
            raise ValueError("loss weights must be positive")


@dataclass(frozen=True, eq=False)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lr: float = 1e-4

    @classmethod
    def for_size(cls, n: int, **hyper) -> AdamState:
        return cls(np.zeros(n), np.zeros(n), **hyper)


# --- initialization -------------------------------------------------------


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    s = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-s, s, size=shape)


def init_dense(rng, n_in: int, n_out: int) -> DenseParams:
    return DenseParams(_uniform(rng, (n_out, n_in), n_in), _uniform(rng, n_out, n_in))


def init_rnn(rng, n_in: int, hidden: int, n_z: int) -> RnnParams:
    fan = n_in + hidden
    return RnnParams(
        _uniform(rng, (hidden, n_in), fan),
        _uniform(rng, (hidden, hidden), fan),
        _uniform(rng, hidden, fan),
        _uniform(rng, (n_z, hidden), hidden),
        _uniform(rng, n_z, hidden),
    )


def init_lstm(rng, n_in: int, hidden: int, modulation: str = "sigmoid") -> LstmParams:
    fan = n_in + hidden
    kw = {}
    for g in GATES:
        kw["w_x" + g] = _uniform(rng, (hidden, n_in), fan)
    for g in GATES:
        kw["w_h" + g] = _uniform(rng, (hidden, hidden), fan)
    for g in GATES:
        kw["b_" + g] = _uniform(rng, hidden, fan)
    return LstmParams(**kw, modulation=modulation)


# --- forward steps --------------------------------------------------------


def _check_len(v: np.ndarray, n: int, what: str):
    if v.shape != (n,):
        raise ValueError(f"{what} has shape {v.shape}, expected ({n},)")


def rnn_step(params: RnnParams, x, h_prev):
    x, h_prev = np.asarray(x, float), np.asarray(h_prev, float)
    _check_len(x, params.w_xh.shape[1], "input")
    _check_len(h_prev, params.hidden, "hidden state")
    h = sigmoid(params.w_xh @ x + params.w_hh @ h_prev + params.b_h)
    z = sigmoid(params.w_hz @ h + params.b_z)
    return h, z


def _lstm_gates(params: LstmParams, x, h_prev):
    pre = {g: getattr(params, "w_x" + g) @ x + getattr(params, "w_h" + g) @ h_prev
           + getattr(params, "b_" + g) for g in GATES}
    i, f, o = sigmoid(pre["i"]), sigmoid(pre["f"]), sigmoid(pre["o"])
    g = sigmoid(pre["c"]) if params.modulation == "sigmoid" else np.tanh(pre["c"])
    return i, f, o, g


def lstm_step(params: LstmParams, x, state: LstmState):
    """One cell update; returns ``(new_state, h)``."""
    x = np.asarray(x, float)
    _check_len(x, params.input_size, "input")
    _check_len(state.h, params.hidden, "hidden state")
    _check_len(state.c, params.hidden, "memory cell")
    i, f, o, g = _lstm_gates(params, x, state.h)
    c = f * state.c + i * g
    h = o * np.tanh(c)
    return LstmState(h, c), h


def static_step(params: DenseParams, x, k: int, b: int) -> GridTensor:
    x = np.asarray(x, float)
    _check_len(x, params.w.shape[1], "input")
    if params.w.shape[0] != tensor_size(k, b):
        raise ValueError(
            f"dense head emits {params.w.shape[0]} values, grid k={k} b={b} "
            f"needs {tensor_size(k, b)}"
        )
    return GridTensor(k, b, params.w @ x + params.b)


# --- loss -----------------------------------------------------------------


def _split(values: np.ndarray, b: int):
    """Box blocks (..., K, K, B, 5) and scores (..., K, K, 2) of a grid array."""
    return values[..., : b * 5].reshape(values.shape[:-1] + (b, 5)), values[..., b * 5 :]


def loss_terms_array(pred, target, obj, resp, noresp, b: int, weights=LossWeights()):
    """The five loss terms over arrays with any leading batch shape.

    ``pred``/``target`` are (..., K, K, B*5+2); ``obj`` is (..., K, K);
    ``resp``/``noresp`` are (..., K, K, B).
    """
    pb, ps = _split(pred, b)
    tb, ts = _split(target, b)
    resp = resp.astype(float)
    noresp = noresp.astype(float)
    xy = np.sum(resp * ((pb[..., 0] - tb[..., 0]) ** 2 + (pb[..., 1] - tb[..., 1]) ** 2))
    pw = np.sqrt(np.maximum(pb[..., 2], 0.0))
    ph = np.sqrt(np.maximum(pb[..., 3], 0.0))
    tw = np.sqrt(np.maximum(tb[..., 2], 0.0))
    th = np.sqrt(np.maximum(tb[..., 3], 0.0))
    wh = np.sum(resp * ((ph - th) ** 2 + (pw - tw) ** 2))
    conf_obj = np.sum(resp * (pb[..., 4] - tb[..., 4]) ** 2)
    conf_noobj = np.sum(noresp * (pb[..., 4] - tb[..., 4]) ** 2)
    cls = np.sum(obj.astype(float)[..., None] * (ps - ts) ** 2)
    return (
        weights.lambda_coord * xy,
        weights.lambda_coord * wh,
        conf_obj,
        weights.lambda_noobj * conf_noobj,
        cls,
    )


def loss_gradient_array(pred, target, obj, resp, noresp, b: int, weights=LossWeights()):
    pb, ps = _split(pred, b)
    tb, ts = _split(target, b)
    resp = resp.astype(float)
    noresp = noresp.astype(float)
    lc = weights.lambda_coord
    gb = np.zeros_like(pb)
    gb[..., 0] = 2 * lc * resp * (pb[..., 0] - tb[..., 0])
    gb[..., 1] = 2 * lc * resp * (pb[..., 1] - tb[..., 1])
    for ch in (2, 3):
        p = pb[..., ch]
        pos = p > 0
        root = np.sqrt(np.where(pos, p, 1.0))
        troot = np.sqrt(np.maximum(tb[..., ch], 0.0))
        # d/dp (sqrt(p) - t)^2 = (sqrt(p) - t) / sqrt(p); zero at or below the clamp
        gb[..., ch] = np.where(pos, lc * resp * (root - troot) / root, 0.0)
    gb[..., 4] = 2 * (resp + weights.lambda_noobj * noresp) * (pb[..., 4] - tb[..., 4])
    gs = 2 * obj.astype(float)[..., None] * (ps - ts)
    return np.concatenate([gb.reshape(pred.shape[:-1] + (b * 5,)), gs], axis=-1)


def _mask_arrays(target: FrameTarget):
    m = target.mask
    return m.cell_has_object, m.responsible, m.not_responsible


def _check_pair(pred: GridTensor, target: FrameTarget):
    t = target.target
    if (pred.k, pred.b) != (t.k, t.b):
        raise ValueError(f"prediction k={pred.k} b={pred.b} vs target k={t.k} b={t.b}")


def grid_loss(pred: GridTensor, target: FrameTarget, weights: LossWeights = LossWeights()):
    """Weighted sum-squared grid loss; returns ``(loss, (t1, t2, t3, t4, t5))``."""
    _check_pair(pred, target)
    terms = loss_terms_array(
        pred.values, target.target.values, *_mask_arrays(target), pred.b, weights
    )
    terms = tuple(float(t) for t in terms)
    return sum(terms), terms


def loss_gradient(pred: GridTensor, target: FrameTarget, weights: LossWeights = LossWeights()):
    """d loss / d pred, shaped like ``pred.values``."""
    _check_pair(pred, target)
    return loss_gradient_array(
        pred.values, target.target.values, *_mask_arrays(target), pred.b, weights
    )


# --- backpropagation through time ----------------------------------------


def _stack_targets(targets: Sequence[FrameTarget]):
    return (
        np.stack([t.target.values for t in targets]),
        np.stack([t.mask.cell_has_object for t in targets]),
        np.stack([t.mask.responsible for t in targets]),
        np.stack([t.mask.not_responsible for t in targets]),
    )


def _lstm_forward(params: LstmParams, xs):
    hdim = params.hidden
    h, c = np.zeros(hdim), np.zeros(hdim)
    cache = []
    for x in xs:
        i, f, o, g = _lstm_gates(params, x, h)
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        cache.append((x, h, c, i, f, o, g, tc))
        h, c = h_new, c_new
        yield h, cache


def _lstm_backward(params: LstmParams, cache, dhs):
    grads = params.zeros_like()
    dh_next = np.zeros(params.hidden)
    dc_next = np.zeros(params.hidden)
    for t in reversed(range(len(cache))):
        x, h_prev, c_prev, i, f, o, g, tc = cache[t]
        dh = dhs[t] + dh_next
        do = dh * tc
        dc = dh * o * (1 - tc * tc) + dc_next
        da = {
            "i": dc * g * i * (1 - i),
            "f": dc * c_prev * f * (1 - f),
            "o": do * o * (1 - o),
            "c": dc * i * (g * (1 - g) if params.modulation == "sigmoid" else 1 - g * g),
        }
        dh_next = np.zeros(params.hidden)
        for k in GATES:
            getattr(grads, "w_x" + k)[...] += np.outer(da[k], x)
            getattr(grads, "w_h" + k)[...] += np.outer(da[k], h_prev)
            getattr(grads, "b_" + k)[...] += da[k]
            dh_next += getattr(params, "w_h" + k).T @ da[k]
        dc_next = dc * f
    return grads


def _rnn_forward(params: RnnParams, xs):
    h = np.zeros(params.hidden)
    outs, cache = [], []
    for x in xs:
        h_new, z = rnn_step(params, x, h)
        cache.append((x, h, h_new, z))
        outs.append(z)
        h = h_new
    return outs, cache


def _rnn_backward(params: RnnParams, cache, dzs):
    grads = params.zeros_like()
    dh_next = np.zeros(params.hidden)
    for t in reversed(range(len(cache))):
        x, h_prev, h, z = cache[t]
        du = dzs[t] * z * (1 - z)
        grads.w_hz += np.outer(du, h)
        grads.b_z += du
        dh = params.w_hz.T @ du + dh_next
        da = dh * h * (1 - h)
        grads.w_xh += np.outer(da, x)
        grads.w_hh += np.outer(da, h_prev)
        grads.b_h += da
        dh_next = params.w_hh.T @ da
    return grads


def recurrent_forward(cell, readout: DenseParams, sequence):
    """Grid arrays (T, K*K*(B*5+2)) for a feature sequence, starting from a zero state."""
    xs = [np.asarray(x, float) for x in sequence]
    if isinstance(cell, LstmParams):
        feats = [h for h, _ in _lstm_forward(cell, xs)]
    else:
        feats, _ = _rnn_forward(cell, xs)
    return np.stack([readout.w @ f + readout.b for f in feats])


def bptt(cell, readout: DenseParams, sequence, targets: Sequence[FrameTarget],
         weights: LossWeights = LossWeights()):
    """Unrolled loss and gradients for a recurrent head.

    Returns ``(cell_grads, readout_grads, total_loss)``; the gradient objects
    have the same types and shapes as the parameters.
    """
    if len(sequence) != len(targets):
        raise ValueError(f"{len(sequence)} frames but {len(targets)} targets")
    if not len(sequence):
        raise ValueError("empty sequence")
    k, b = targets[0].target.k, targets[0].target.b
    if readout.w.shape[0] != tensor_size(k, b):
        raise ValueError("readout width does not match the target grid")
    xs = [np.asarray(x, float) for x in sequence]

    if isinstance(cell, LstmParams):
        cache = None
        feats = []
        for h, cache in _lstm_forward(cell, xs):
            feats.append(h)
    elif isinstance(cell, RnnParams):
        feats, cache = _rnn_forward(cell, xs)
    else:
        raise TypeError(f"unsupported cell {type(cell).__name__}")

    feats = np.stack(feats)
    preds = feats @ readout.w.T + readout.b
    shape = (len(xs), k, k, cell_depth(b))
    tv, obj, resp, noresp = _stack_targets(targets)
    total = float(sum(loss_terms_array(preds.reshape(shape), tv, obj, resp, noresp, b, weights)))
    dy = loss_gradient_array(preds.reshape(shape), tv, obj, resp, noresp, b, weights)
    dy = dy.reshape(len(xs), -1)

    g_read = DenseParams(dy.T @ feats, dy.sum(axis=0))
    dfeat = dy @ readout.w
    if isinstance(cell, LstmParams):
        g_cell = _lstm_backward(cell, cache, dfeat)
    else:
        g_cell = _rnn_backward(cell, cache, dfeat)
    return g_cell, g_read, total


def static_batch_gradient(params: DenseParams, xs, targets: Sequence[FrameTarget],
                          weights: LossWeights = LossWeights()):
    """Summed loss and dense-head gradients over a batch of independent frames."""
    xs = np.asarray(xs, float)
    k, b = targets[0].target.k, targets[0].target.b
    preds = (xs @ params.w.T + params.b).reshape(len(xs), k, k, cell_depth(b))
    tv, obj, resp, noresp = _stack_targets(targets)
    total = float(sum(loss_terms_array(preds, tv, obj, resp, noresp, b, weights)))
    dy = loss_gradient_array(preds, tv, obj, resp, noresp, b, weights).reshape(len(xs), -1)
    return DenseParams(dy.T @ xs, dy.sum(axis=0)), total


# --- optimizer ------------------------------------------------------------


def adam_update(state: AdamState, params, grads):
    """Bias-corrected Adam step; returns ``(new_params, new_state)``."""
    params = np.asarray(params, float)
    grads = np.asarray(grads, float)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError(
            f"shape mismatch: params {params.shape}, grads {grads.shape}, "
            f"state {state.m.shape}"
        )
    t = state.step + 1
    m = state.beta1 * state.m + (1 - state.beta1) * grads
    v = state.beta2 * state.v + (1 - state.beta2) * grads * grads
    m_hat = m / (1 - state.beta1**t)
    v_hat = v / (1 - state.beta2**t)
    new = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new, replace(state, m=m, v=v, step=t)


# --- checkpoints ----------------------------------------------------------

CHECKPOINT_FORMAT = "tubeprop-checkpoint"
CHECKPOINT_VERSION = 1


def save_checkpoint(path, head: str, dims: dict, seed: int, parts: Sequence[tuple[str, _Params]],
                    modulation: str | None = None):
    """Write a JSON checkpoint; see README for the layout."""
    arrays = []
    for prefix, p in parts:
        for name, a in p.arrays():
            arrays.append({"name": f"{prefix}.{name}", "shape": list(a.shape),
                           "data": [float(v) for v in a.ravel()]})
    rec = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "head": head,
        "dims": {key: int(dims[key]) for key in ("D", "H", "K", "B")},
        "seed": int(seed),
        "modulation": modulation,
        "params": arrays,
    }
    Path(path).write_text(json.dumps(rec, indent=1) + "\n", encoding="utf-8")


def load_checkpoint(path):
    """Returns ``(head, dims, seed, {"cell": params | None, "readout": DenseParams})``."""
    rec = json.loads(Path(path).read_text(encoding="utf-8"))
    if rec.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    if rec.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {rec.get('version')}")
    arrays = {a["name"]: np.asarray(a["data"], float).reshape(a["shape"]) for a in rec["params"]}
    head = rec["head"]
    readout = DenseParams(arrays["readout.w"], arrays["readout.b"])
    cell = None
    if head == "lstm":
        cell = LstmParams(**{f.name: arrays["cell." + f.name] for f in fields(LstmParams)
                             if f.name != "modulation"}, modulation=rec["modulation"])
    elif head == "rnn":
        cell = RnnParams(**{f.name: arrays["cell." + f.name] for f in fields(RnnParams)})
    elif head != "static":
        raise ValueError(f"{path}: unknown head {head!r}")
    return head, rec["dims"], rec["seed"], {"cell": cell, "readout": readout}
