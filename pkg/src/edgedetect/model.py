"""Edge-Detect network: recurrent block, batch norm, dense head, sigmoid output.

Layer order for a window ``X`` of shape ``(T, input)``::

    rnn_0 .. rnn_{L-1}          (each non-final layer feeds its full sequence
                                 through its own batch norm to the next layer)
    h_T  -> batchnorm            (final-timestep state of the last layer)
         -> dense linear -> batchnorm -> relu
         -> output linear -> sigmoid = p_attack
"""

from dataclasses import dataclass, field, replace

import numpy as np

from edgedetect.nn.activations import sigmoid
from edgedetect.nn.cells import (
    CELL_KINDS,
    CellParams,
    cell_param_count,
    cell_shapes,
    init_cell,
    sequence_backward,
    sequence_forward,
)
from edgedetect.nn.layers import batchnorm, batchnorm_backward, dense_backward, dense_forward

DEFAULT_THRESHOLD = 0.8
LOSS_CLAMP = 1e-7

NORMAL = "normal"
ATTACK = "attack"


class NonFiniteLossError(FloatingPointError):
    """Raised when the training loss becomes NaN or infinite."""

    def __init__(self, message, batch_index=None, epoch=None):
        super().__init__(message)
        self.batch_index = batch_index
        self.epoch = epoch


@dataclass(frozen=True)
class ModelConfig:
    cell_kind: str = "FastGRNN"
    rnn_layers: int = 1
    hidden_size: int = 128
    dense_size: int = 128
    input_size: int = 25
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        if self.cell_kind not in CELL_KINDS:
            raise ValueError(f"cell_kind must be one of {CELL_KINDS}, got {self.cell_kind!r}")
        for name in ("rnn_layers", "hidden_size", "dense_size", "input_size"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
            if value > 0xFFFF:
                raise ValueError(f"{name}={value} exceeds the 16-bit limit of the model file")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must lie in (0, 1), got {self.threshold}")


def edge_detect_config(cell_kind="FastGRNN", input_size=25, threshold=DEFAULT_THRESHOLD):
    """Single recurrent layer of 128 cells plus a 128-unit dense layer."""
    return ModelConfig(cell_kind, 1, 128, 128, input_size, threshold)


def deep_defense_config(cell_kind="GRU", input_size=25, threshold=DEFAULT_THRESHOLD):
    """Four recurrent layers of 64 cells with the same dense head."""
    return ModelConfig(cell_kind, 4, 64, 128, input_size, threshold)


def _tensor_shapes(config):
    """Ordered ``name -> (shape, trainable)`` for a configuration."""
    shapes = {}
    d = config.input_size
    h = config.hidden_size
    for layer in range(config.rnn_layers):
        for name, shape in cell_shapes(config.cell_kind, d, h).items():
            shapes[f"rnn{layer}.{name}"] = (shape, True)
        _bn_shapes(shapes, f"bn{layer}", h)
        d = h
    shapes["dense.W"] = ((config.dense_size, h), True)
    shapes["dense.b"] = ((config.dense_size,), True)
    _bn_shapes(shapes, "bn_dense", config.dense_size)
    shapes["out.W"] = ((1, config.dense_size), True)
    shapes["out.b"] = ((1,), True)
    return shapes


def _bn_shapes(shapes, prefix, width):
    shapes[f"{prefix}.gamma"] = ((width,), True)
    shapes[f"{prefix}.beta"] = ((width,), True)
    shapes[f"{prefix}.running_mean"] = ((width,), False)
    shapes[f"{prefix}.running_var"] = ((width,), False)


@dataclass
class ModelParams:
    """All tensors of a configured network, keyed by dotted name.

    Batch-norm running statistics live in ``tensors`` too but are buffers,
    not trainable parameters.
    """

    config: ModelConfig
    tensors: dict = field(default_factory=dict)

    def __post_init__(self):
        shapes = _tensor_shapes(self.config)
        if not self.tensors:
            self.tensors = {n: np.zeros(s) for n, (s, _) in shapes.items()}
            return
        if list(self.tensors) != list(shapes):
            missing = set(shapes) - set(self.tensors)
            extra = set(self.tensors) - set(shapes)
            raise ValueError(f"tensor set mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for name, (shape, _) in shapes.items():
            arr = np.asarray(self.tensors[name], dtype=np.float64)
            if arr.shape != shape:
                raise ValueError(f"{name}: shape {arr.shape} != expected {shape}")
            self.tensors[name] = arr

    @property
    def trainable_names(self):
        return [n for n, (_, t) in _tensor_shapes(self.config).items() if t]

    @property
    def buffer_names(self):
        return [n for n, (_, t) in _tensor_shapes(self.config).items() if not t]

    def cell(self, layer):
        cfg = self.config
        d = cfg.input_size if layer == 0 else cfg.hidden_size
        prefix = f"rnn{layer}."
        tensors = {n[len(prefix):]: a for n, a in self.tensors.items() if n.startswith(prefix)}
        return CellParams(cfg.cell_kind, d, cfg.hidden_size, tensors)

    def copy(self):
        return ModelParams(self.config, {n: a.copy() for n, a in self.tensors.items()})

    def with_threshold(self, threshold):
        return ModelParams(replace(self.config, threshold=threshold), self.tensors)


def build_model(config, seed=0):
    """Initialize parameters deterministically from ``seed``."""
    rng = np.random.default_rng(seed)
    params = ModelParams(config)
    t = params.tensors
    d = config.input_size
    for layer in range(config.rnn_layers):
        cell = init_cell(config.cell_kind, d, config.hidden_size, rng)
        for name, arr in cell.tensors.items():
            t[f"rnn{layer}.{name}"] = arr
        d = config.hidden_size
    for prefix in [f"bn{i}" for i in range(config.rnn_layers)] + ["bn_dense"]:
        t[f"{prefix}.gamma"][:] = 1.0
        t[f"{prefix}.running_var"][:] = 1.0
    bound = 1.0 / np.sqrt(config.hidden_size)
    t["dense.W"] = rng.uniform(-bound, bound, size=t["dense.W"].shape)
    bound = 1.0 / np.sqrt(config.dense_size)
    t["out.W"] = rng.uniform(-bound, bound, size=t["out.W"].shape)
    return params


def param_count(params):
    """Exact number of trainable scalars (running statistics excluded)."""
    return sum(int(params.tensors[n].size) for n in params.trainable_names)


def closed_form_param_count(config):
    """Trainable count computed from layer formulas alone."""
    h, dn = config.hidden_size, config.dense_size
    total = cell_param_count(config.cell_kind, config.input_size, h)
    total += (config.rnn_layers - 1) * cell_param_count(config.cell_kind, h, h)
    total += config.rnn_layers * 2 * h
    total += dn * h + dn + 2 * dn
    total += dn + 1
    return total


def recurrent_param_count(config):
    h = config.hidden_size
    return (cell_param_count(config.cell_kind, config.input_size, h)
            + (config.rnn_layers - 1) * cell_param_count(config.cell_kind, h, h))


# --- forward / backward -----------------------------------------------------

def _bn(params, prefix, x, mode, new_buffers):
    t = params.tensors
    out, cache, mean, var = batchnorm(
        x, t[f"{prefix}.gamma"], t[f"{prefix}.beta"],
        t[f"{prefix}.running_mean"], t[f"{prefix}.running_var"], mode=mode,
    )
    new_buffers[f"{prefix}.running_mean"] = mean
    new_buffers[f"{prefix}.running_var"] = var
    return out, cache


def _forward(params, X, mode):
    cfg = params.config
    t = params.tensors
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[2] != cfg.input_size:
        raise ValueError(
            f"expected windows of shape (batch, T, {cfg.input_size}), got {X.shape}"
        )
    B, T, _ = X.shape
    new_buffers = {}
    caches = {"B": B, "T": T}
    seq = X
    for layer in range(cfg.rnn_layers):
        cell = params.cell(layer)
        H, rnn_cache = sequence_forward(cell, seq)
        caches[f"rnn{layer}"] = (cell, rnn_cache)
        if layer < cfg.rnn_layers - 1:
            flat, bn_cache = _bn(params, f"bn{layer}", H.reshape(B * T, -1), mode, new_buffers)
            seq = flat.reshape(B, T, -1)
        else:
            last, bn_cache = _bn(params, f"bn{layer}", H[:, -1, :], mode, new_buffers)
        caches[f"bn{layer}"] = bn_cache
    dense_pre, dense_cache = dense_forward(last, t["dense.W"], t["dense.b"], "linear")
    normed, bnd_cache = _bn(params, "bn_dense", dense_pre, mode, new_buffers)
    act = np.maximum(normed, 0.0)
    logit, out_cache = dense_forward(act, t["out.W"], t["out.b"], "linear")
    logit = logit[:, 0]
    caches.update(dense=dense_cache, bn_dense=(bnd_cache, normed), out=out_cache)
    return sigmoid(logit), caches, new_buffers


def predict_proba(params, X):
    """Inference-mode attack probabilities for a ``(batch, T, input)`` array."""
    p, _, _ = _forward(params, X, "infer")
    return p


def forward(params, window, mode="infer"):
    """Attack probability for one window ``(T, input)`` or a batch of them."""
    X = np.asarray(window, dtype=np.float64)
    single = X.ndim == 2
    if single:
        X = X[None]
    p, _, _ = _forward(params, X, mode)
    return float(p[0]) if single else p


def bce_loss(p, y, pos_weight=1.0):
    """Mean binary cross-entropy with probabilities clamped away from 0 and 1."""
    y = np.asarray(y, dtype=np.float64)
    pc = np.clip(p, LOSS_CLAMP, 1.0 - LOSS_CLAMP)
    w = np.where(y > 0.5, pos_weight, 1.0)
    return float(np.mean(-w * (y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))))


def bptt_gradients(params, X, y, mode="train", pos_weight=1.0, batch_index=None):
    """Mean BCE loss and its exact gradient w.r.t. every trainable tensor.

    Returns ``(loss, grads, new_buffers)``. ``new_buffers`` carries the
    running statistics a train-mode pass would store; ``params`` is not
    modified.
    """
    cfg = params.config
    t = params.tensors
    y = np.asarray(y, dtype=np.float64)
    p, caches, new_buffers = _forward(params, X, mode)
    loss = bce_loss(p, y, pos_weight)
    if not np.isfinite(loss):
        raise NonFiniteLossError(f"non-finite loss in batch {batch_index}", batch_index=batch_index)
    B, T = caches["B"], caches["T"]
    w = np.where(y > 0.5, pos_weight, 1.0)
    inside = (p > LOSS_CLAMP) & (p < 1.0 - LOSS_CLAMP)
    dlogit = (w * (p - y) * inside / B)[:, None]

    grads = {}
    dact, grads["out.W"], grads["out.b"] = dense_backward(dlogit, caches["out"])
    bnd_cache, normed = caches["bn_dense"]
    dnormed = dact * (normed > 0)
    ddense, grads["bn_dense.gamma"], grads["bn_dense.beta"] = batchnorm_backward(dnormed, bnd_cache)
    dlast, grads["dense.W"], grads["dense.b"] = dense_backward(ddense, caches["dense"])

    top = cfg.rnn_layers - 1
    dlast, grads[f"bn{top}.gamma"], grads[f"bn{top}.beta"] = batchnorm_backward(dlast, caches[f"bn{top}"])
    dH = np.zeros((B, T, cfg.hidden_size))
    dH[:, -1, :] = dlast
    for layer in range(top, -1, -1):
        cell, rnn_cache = caches[f"rnn{layer}"]
        cell_grads, dX = sequence_backward(cell, dH, rnn_cache)
        for name, g in cell_grads.items():
            grads[f"rnn{layer}.{name}"] = g
        if layer > 0:
            below = layer - 1
            dflat, grads[f"bn{below}.gamma"], grads[f"bn{below}.beta"] = batchnorm_backward(
                dX.reshape(B * T, -1), caches[f"bn{below}"]
            )
            dH = dflat.reshape(B, T, -1)
    ordered = {n: grads[n] for n in params.trainable_names}
    return loss, ordered, new_buffers


@dataclass(frozen=True)
class Prediction:
    p_attack: float
    verdict: str
    index: int = -1

    def to_dict(self):
        return {"index": self.index, "p_attack": self.p_attack, "verdict": self.verdict}


def classify(p_attack, threshold=DEFAULT_THRESHOLD):
    """``"attack"`` iff ``p_attack >= threshold`` (boundary inclusive)."""
    if not (0.0 <= threshold <= 1.0):
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    return ATTACK if p_attack >= threshold else NORMAL
