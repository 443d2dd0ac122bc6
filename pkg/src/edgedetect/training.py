"""Mini-batch training (Adam or SGD, early stopping) and evaluation."""

import logging
import time
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.model_selection import train_test_split

from edgedetect.metrics import report_from_scores
from edgedetect.model import NonFiniteLossError, bce_loss, bptt_gradients, predict_proba

logger = logging.getLogger(__name__)

EVAL_CHUNK = 2048


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 64
    learning_rate: float = 1e-3
    lr_decay: float = 1.0
    seed: int = 0
    early_stop_patience: int = 5
    validation_fraction: float = 0.1
    optimizer: str = "Adam"
    loss_kind: str = "BCE"
    pos_weight: float = 1.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (batch norm needs batch statistics)")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.lr_decay <= 0:
            raise ValueError("lr_decay must be > 0")
        if self.early_stop_patience < 1:
            raise ValueError("early_stop_patience must be >= 1")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in [0, 1)")
        if self.optimizer not in ("Adam", "SGD"):
            raise ValueError(f"optimizer must be 'Adam' or 'SGD', got {self.optimizer!r}")
        if self.loss_kind != "BCE":
            raise ValueError(f"only BCE loss is supported, got {self.loss_kind!r}")
        if self.pos_weight <= 0:
            raise ValueError("pos_weight must be > 0")


class SGD:
    def __init__(self, lr):
        self.lr = lr

    def step(self, tensors, grads):
        for name, g in grads.items():
            tensors[name] -= self.lr * g


class Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, tensors, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            if name not in self.m:
                self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            tensors[name] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _batches(n, batch_size, rng):
    order = rng.permutation(n)
    starts = list(range(0, n, batch_size))
    # a trailing batch of one cannot be batch-normalized; fold it into the previous one
    if len(starts) > 1 and n - starts[-1] < 2:
        starts.pop()
    bounds = starts[1:] + [n]
    return [order[s:e] for s, e in zip(starts, bounds)]


def _infer_loss(params, X, y, pos_weight=1.0):
    p = predict_scores(params, X)
    return p, bce_loss(p, y, pos_weight)


def predict_scores(params, X, chunk=EVAL_CHUNK):
    """Inference-mode ``p_attack`` for every window, evaluated in chunks."""
    X = np.asarray(X) if not hasattr(X, "data") else X.data
    if len(X) == 0:
        return np.empty(0)
    return np.concatenate([predict_proba(params, X[i:i + chunk]) for i in range(0, len(X), chunk)])


def train(model, X, y, cfg=TrainConfig(), X_val=None, y_val=None):
    """Fit ``model`` on windows ``X`` ``(n, T, input)`` with labels ``y``.

    The input model is not modified. Unless explicit validation data is
    given, a stratified ``validation_fraction`` of the windows is held out
    and drives early stopping on validation loss; the best epoch's
    parameters are returned. Returns ``(params, history)``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(X) == 0:
        raise ValueError("no training windows")
    if len(np.unique(y)) < 2:
        raise ValueError("training data must contain both normal and attack windows")
    if X_val is None and cfg.validation_fraction > 0:
        idx = np.arange(len(y))
        tr, va = train_test_split(idx, test_size=cfg.validation_fraction, stratify=y,
                                  random_state=cfg.seed % 2**32)
        tr.sort()
        va.sort()
        X, X_val, y, y_val = X[tr], X[va], y[tr], y[va]
    if len(X) < 2:
        raise ValueError("need at least 2 training windows")

    params = model.copy()
    rng = np.random.default_rng(cfg.seed)
    lr = cfg.learning_rate
    opt = Adam(lr) if cfg.optimizer == "Adam" else SGD(lr)
    history = []
    best, best_loss, stale = params.copy(), np.inf, 0

    for epoch in range(cfg.epochs):
        opt.lr = lr
        total, seen = 0.0, 0
        for b, idx in enumerate(_batches(len(X), cfg.batch_size, rng)):
            try:
                loss, grads, buffers = bptt_gradients(params, X[idx], y[idx], "train",
                                                      cfg.pos_weight, batch_index=b)
            except NonFiniteLossError as exc:
                raise NonFiniteLossError(
                    f"training diverged at epoch {epoch}, batch {b}", batch_index=b, epoch=epoch
                ) from exc
            opt.step(params.tensors, grads)
            for name, value in buffers.items():
                params.tensors[name] = value
            total += loss * len(idx)
            seen += len(idx)
        record = {"epoch": epoch, "learning_rate": lr, "train_loss": total / seen}
        if X_val is not None and len(X_val):
            p, val_loss = _infer_loss(params, X_val, y_val, cfg.pos_weight)
            if not np.isfinite(val_loss):
                raise NonFiniteLossError(f"validation loss diverged at epoch {epoch}", epoch=epoch)
            record["val_loss"] = val_loss
            record["val_accuracy"] = float(np.mean((p >= params.config.threshold) == (y_val == 1)))
            monitor_loss = val_loss
        else:
            monitor_loss = record["train_loss"]
        history.append(record)
        logger.info("epoch %d: %s", epoch, record)

        if monitor_loss < best_loss:
            best, best_loss, stale = params.copy(), monitor_loss, 0
        else:
            stale += 1
            if stale >= cfg.early_stop_patience:
                logger.info("early stop after epoch %d", epoch)
                break
        lr *= cfg.lr_decay
    return best, history


def evaluate(params, X, y, threshold=None):
    """Infer on every window and compute the full :class:`MetricsReport`."""
    threshold = params.config.threshold if threshold is None else threshold
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise ValueError("cannot evaluate on zero windows")
    start = time.perf_counter()
    scores = predict_scores(params, X)
    elapsed = time.perf_counter() - start
    loss = bce_loss(scores, y)
    return report_from_scores(scores, y, threshold, loss, cell=params.config.cell_kind,
                              wall_time=elapsed)


def history_to_dict(cfg, history):
    return {"train_config": asdict(cfg), "epochs": history}
