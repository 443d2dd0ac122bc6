"""Recurrent cells: FastRNN, FastGRNN and the LSTM/GRU baselines.

All cells share one calling convention. ``sequence_forward`` unrolls a cell
over a ``(batch, T, input)`` array and returns every hidden state;
``sequence_backward`` takes the gradient w.r.t. those hidden states and
runs backpropagation through time.

FastRNN::

    h_t = alpha * tanh(W x_t + U h_{t-1} + b) + beta * h_{t-1}

FastGRNN (one ``(W, U)`` pair shared by gate and candidate)::

    a_t = W x_t + U h_{t-1}
    z_t = sigmoid(a_t + b_z)
    c_t = tanh(a_t + b_h)
    h_t = (zeta * (1 - z_t) + nu) * c_t + z_t * h_{t-1}

The residual scalars are stored unconstrained and squashed with a sigmoid
before use, so ``alpha``, ``beta``, ``zeta`` and ``nu`` stay in (0, 1).
LSTM gates are packed ``[i, f, g, o]`` and GRU gates ``[z, r, n]`` with
``h_t = z * h_{t-1} + (1 - z) * n``.
"""

from dataclasses import dataclass, field

import numpy as np

from edgedetect.nn.activations import sigmoid

CELL_KINDS = ("FastRNN", "FastGRNN", "LSTM", "GRU")

_GATES = {"LSTM": 4, "GRU": 3}

# Pre-sigmoid initial values of the residual scalars.
INIT_ALPHA = float(np.log(0.2 / 0.8))    # alpha = 0.2
INIT_BETA = float(np.log(0.9 / 0.1))     # beta = 0.9
INIT_ZETA = 4.0                          # zeta ~= 0.982
INIT_NU = float(np.log(0.05 / 0.95))     # nu = 0.05


@dataclass
class CellParams:
    """Trainable tensors of one recurrent layer.

    ``tensors`` maps a short name (``W``, ``U``, ``b``, ``b_z``, ...) to a
    float64 array. Scalars are stored as shape ``(1,)`` pre-sigmoid values.
    """

    kind: str
    input_size: int
    hidden_size: int
    tensors: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in CELL_KINDS:
            raise ValueError(f"unknown cell kind {self.kind!r}; expected one of {CELL_KINDS}")
        expected = cell_shapes(self.kind, self.input_size, self.hidden_size)
        if self.tensors:
            if set(self.tensors) != set(expected):
                raise ValueError(
                    f"{self.kind} expects tensors {sorted(expected)}, got {sorted(self.tensors)}"
                )
            for name, shape in expected.items():
                arr = np.asarray(self.tensors[name], dtype=np.float64)
                if arr.shape != shape:
                    raise ValueError(f"{self.kind}.{name}: shape {arr.shape} != {shape}")
                self.tensors[name] = arr
        else:
            self.tensors = {n: np.zeros(s) for n, s in expected.items()}

    def __getitem__(self, name):
        return self.tensors[name]

    def scalar(self, name):
        """Effective (post-sigmoid) value of a residual scalar."""
        return float(sigmoid(self.tensors[name][0]))

    def param_count(self):
        return sum(int(a.size) for a in self.tensors.values())


def cell_shapes(kind, input_size, hidden_size):
    d, h = input_size, hidden_size
    if kind == "FastRNN":
        return {"W": (h, d), "U": (h, h), "b": (h,), "alpha": (1,), "beta": (1,)}
    if kind == "FastGRNN":
        return {"W": (h, d), "U": (h, h), "b_z": (h,), "b_h": (h,),
                "zeta": (1,), "nu": (1,)}
    if kind in _GATES:
        g = _GATES[kind]
        return {"W": (g * h, d), "U": (g * h, h), "b": (g * h,)}
    raise ValueError(f"unknown cell kind {kind!r}; expected one of {CELL_KINDS}")


def cell_param_count(kind, input_size, hidden_size):
    """Closed-form trainable scalar count of one layer."""
    d, h = input_size, hidden_size
    if kind == "FastRNN":
        return h * d + h * h + h + 2
    if kind == "FastGRNN":
        return h * d + h * h + 2 * h + 2
    if kind in _GATES:
        return _GATES[kind] * (h * d + h * h + h)
    raise ValueError(f"unknown cell kind {kind!r}; expected one of {CELL_KINDS}")


def init_cell(kind, input_size, hidden_size, rng):
    """Uniform(-1/sqrt(h), 1/sqrt(h)) weights, zero biases."""
    bound = 1.0 / np.sqrt(hidden_size)
    p = CellParams(kind, input_size, hidden_size)
    p.tensors["W"] = rng.uniform(-bound, bound, size=p.tensors["W"].shape)
    p.tensors["U"] = rng.uniform(-bound, bound, size=p.tensors["U"].shape)
    if kind == "FastRNN":
        p.tensors["alpha"][:] = INIT_ALPHA
        p.tensors["beta"][:] = INIT_BETA
    elif kind == "FastGRNN":
        p.tensors["zeta"][:] = INIT_ZETA
        p.tensors["nu"][:] = INIT_NU
    return p


def _check_step(p, x, h_prev):
    if x.shape[-1] != p.input_size:
        raise ValueError(f"input width {x.shape[-1]} != cell input_size {p.input_size}")
    if h_prev.shape[-1] != p.hidden_size:
        raise ValueError(f"state width {h_prev.shape[-1]} != cell hidden_size {p.hidden_size}")


# --- single-step forward/backward per kind ---------------------------------
# Each *_fwd returns (h, c, cache); c is None except for LSTM.
# Each *_bwd(dh, dc, cache, grads) accumulates into grads and returns
# (dx, dh_prev, dc_prev).

def _fastrnn_fwd(p, x, h_prev, c_prev=None):
    alpha, beta = sigmoid(p["alpha"][0]), sigmoid(p["beta"][0])
    cand = np.tanh(x @ p["W"].T + h_prev @ p["U"].T + p["b"])
    h = alpha * cand + beta * h_prev
    return h, None, (x, h_prev, cand, alpha, beta)


def _fastrnn_bwd(p, dh, dc, cache, grads):
    x, h_prev, cand, alpha, beta = cache
    da = dh * alpha * (1.0 - cand * cand)
    grads["W"] += da.T @ x
    grads["U"] += da.T @ h_prev
    grads["b"] += da.sum(axis=0)
    grads["alpha"] += (dh * cand).sum() * alpha * (1.0 - alpha)
    grads["beta"] += (dh * h_prev).sum() * beta * (1.0 - beta)
    return da @ p["W"], dh * beta + da @ p["U"], None


def _fastgrnn_fwd(p, x, h_prev, c_prev=None):
    zeta, nu = sigmoid(p["zeta"][0]), sigmoid(p["nu"][0])
    a = x @ p["W"].T + h_prev @ p["U"].T
    z = sigmoid(a + p["b_z"])
    cand = np.tanh(a + p["b_h"])
    h = (zeta * (1.0 - z) + nu) * cand + z * h_prev
    return h, None, (x, h_prev, z, cand, zeta, nu)


def _fastgrnn_bwd(p, dh, dc, cache, grads):
    x, h_prev, z, cand, zeta, nu = cache
    dcand = dh * (zeta * (1.0 - z) + nu)
    dz = dh * (h_prev - zeta * cand)
    daz = dz * z * (1.0 - z)
    dah = dcand * (1.0 - cand * cand)
    da = daz + dah
    grads["W"] += da.T @ x
    grads["U"] += da.T @ h_prev
    grads["b_z"] += daz.sum(axis=0)
    grads["b_h"] += dah.sum(axis=0)
    grads["zeta"] += (dh * (1.0 - z) * cand).sum() * zeta * (1.0 - zeta)
    grads["nu"] += (dh * cand).sum() * nu * (1.0 - nu)
    return da @ p["W"], dh * z + da @ p["U"], None


def _lstm_fwd(p, x, h_prev, c_prev):
    hs = p.hidden_size
    a = x @ p["W"].T + h_prev @ p["U"].T + p["b"]
    i = sigmoid(a[:, :hs])
    f = sigmoid(a[:, hs:2 * hs])
    g = np.tanh(a[:, 2 * hs:3 * hs])
    o = sigmoid(a[:, 3 * hs:])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return h, c, (x, h_prev, c_prev, i, f, g, o, tc)


def _lstm_bwd(p, dh, dc, cache, grads):
    x, h_prev, c_prev, i, f, g, o, tc = cache
    do = dh * tc
    dct = dc + dh * o * (1.0 - tc * tc)
    da = np.concatenate([
        dct * g * i * (1.0 - i),
        dct * c_prev * f * (1.0 - f),
        dct * i * (1.0 - g * g),
        do * o * (1.0 - o),
    ], axis=1)
    grads["W"] += da.T @ x
    grads["U"] += da.T @ h_prev
    grads["b"] += da.sum(axis=0)
    return da @ p["W"], da @ p["U"], dct * f


def _gru_fwd(p, x, h_prev, c_prev=None):
    hs = p.hidden_size
    W, U, b = p["W"], p["U"], p["b"]
    ax = x @ W.T + b
    azr = ax[:, :2 * hs] + h_prev @ U[:2 * hs].T
    z = sigmoid(azr[:, :hs])
    r = sigmoid(azr[:, hs:])
    rh = r * h_prev
    n = np.tanh(ax[:, 2 * hs:] + rh @ U[2 * hs:].T)
    h = z * h_prev + (1.0 - z) * n
    return h, None, (x, h_prev, z, r, rh, n)


def _gru_bwd(p, dh, dc, cache, grads):
    hs = p.hidden_size
    W, U = p["W"], p["U"]
    x, h_prev, z, r, rh, n = cache
    dan = dh * (1.0 - z) * (1.0 - n * n)
    drh = dan @ U[2 * hs:]
    daz = dh * (h_prev - n) * z * (1.0 - z)
    dar = drh * h_prev * r * (1.0 - r)
    dazr = np.concatenate([daz, dar], axis=1)
    da = np.concatenate([dazr, dan], axis=1)
    grads["W"] += da.T @ x
    grads["U"][:2 * hs] += dazr.T @ h_prev
    grads["U"][2 * hs:] += dan.T @ rh
    grads["b"] += da.sum(axis=0)
    dh_prev = dh * z + drh * r + dazr @ U[:2 * hs]
    return da @ W, dh_prev, None


_STEPS = {
    "FastRNN": (_fastrnn_fwd, _fastrnn_bwd),
    "FastGRNN": (_fastgrnn_fwd, _fastgrnn_bwd),
    "LSTM": (_lstm_fwd, _lstm_bwd),
    "GRU": (_gru_fwd, _gru_bwd),
}


def _as_batch(v):
    v = np.asarray(v, dtype=np.float64)
    return (v[None, :], True) if v.ndim == 1 else (v, False)


def fastrnn_step(x, h_prev, p):
    """One FastRNN update. Accepts a single vector or a ``(batch, n)`` array."""
    if p.kind != "FastRNN":
        raise ValueError(f"fastrnn_step needs FastRNN params, got {p.kind}")
    return _single_step(p, x, h_prev)


def fastgrnn_step(x, h_prev, p):
    """One FastGRNN update. Accepts a single vector or a ``(batch, n)`` array."""
    if p.kind != "FastGRNN":
        raise ValueError(f"fastgrnn_step needs FastGRNN params, got {p.kind}")
    return _single_step(p, x, h_prev)


def baseline_cell_step(kind, x, state, p):
    """One LSTM or GRU update.

    For LSTM ``state`` is an ``(h, c)`` pair and an ``(h, c)`` pair is
    returned; for GRU it is the hidden vector.
    """
    if kind not in _GATES:
        raise ValueError(f"baseline cells are LSTM or GRU, got {kind!r}")
    if p.kind != kind:
        raise ValueError(f"params are {p.kind}, requested {kind}")
    if kind == "LSTM":
        h_prev, c_prev = state
        xb, single = _as_batch(x)
        hb, _ = _as_batch(h_prev)
        cb, _ = _as_batch(c_prev)
        _check_step(p, xb, hb)
        if cb.shape != hb.shape:
            raise ValueError(f"cell state shape {cb.shape} != hidden shape {hb.shape}")
        h, c, _ = _lstm_fwd(p, xb, hb, cb)
        return (h[0], c[0]) if single else (h, c)
    return _single_step(p, x, state)


def _single_step(p, x, h_prev):
    xb, single = _as_batch(x)
    hb, _ = _as_batch(h_prev)
    _check_step(p, xb, hb)
    if xb.shape[0] != hb.shape[0]:
        raise ValueError(f"batch mismatch: input {xb.shape[0]} vs state {hb.shape[0]}")
    h, _, _ = _STEPS[p.kind][0](p, xb, hb, None)
    return h[0] if single else h


def sequence_forward(p, X, h0=None):
    """Unroll a cell over ``X`` of shape ``(batch, T, input)``.

    Returns ``(H, cache)`` with ``H`` of shape ``(batch, T, hidden)``.
    The initial state is zero unless ``h0`` is given.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[2] != p.input_size:
        raise ValueError(f"sequence input shape {X.shape} incompatible with input_size {p.input_size}")
    B, T, _ = X.shape
    fwd = _STEPS[p.kind][0]
    h = np.zeros((B, p.hidden_size)) if h0 is None else np.asarray(h0, dtype=np.float64)
    c = np.zeros((B, p.hidden_size)) if p.kind == "LSTM" else None
    H = np.empty((B, T, p.hidden_size))
    caches = []
    for t in range(T):
        h, c, step_cache = fwd(p, X[:, t, :], h, c)
        H[:, t, :] = h
        caches.append(step_cache)
    return H, caches


def sequence_backward(p, dH, caches):
    """Backpropagate through time.

    ``dH`` is the loss gradient w.r.t. every hidden state. Returns
    ``(grads, dX)`` where ``grads`` matches ``p.tensors`` by name.
    """
    bwd = _STEPS[p.kind][1]
    B, T, hs = dH.shape
    grads = {n: np.zeros_like(a) for n, a in p.tensors.items()}
    dX = np.empty((B, T, p.input_size))
    dh_next = np.zeros((B, hs))
    dc_next = np.zeros((B, hs)) if p.kind == "LSTM" else None
    for t in range(T - 1, -1, -1):
        dx, dh_next, dc_next = bwd(p, dH[:, t, :] + dh_next, dc_next, caches[t], grads)
        dX[:, t, :] = dx
    return grads, dX
