"""Independent oracles used across the test suite."""

import numpy as np

from edgedetect.model import bce_loss, bptt_gradients, build_model, predict_proba, _forward

FD_STEP = 1e-6


def central_difference(f, arr, step=FD_STEP):
    """Numerical gradient of scalar ``f()`` w.r.t. every entry of ``arr`` (perturbed in place)."""
    grad = np.zeros_like(arr)
    for i in range(arr.size):
        old = arr.flat[i]
        arr.flat[i] = old + step
        up = f()
        arr.flat[i] = old - step
        down = f()
        arr.flat[i] = old
        grad.flat[i] = (up - down) / (2 * step)
    return grad


def relative_error(analytic, numeric):
    return np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric)))


def train_mode_loss(params, X, y):
    """Mean BCE of a train-mode forward pass, computed without the backward code."""
    p, _, _ = _forward(params, X, "train")
    return bce_loss(p, y)


def perturbed_model(config, seed, scale=0.3):
    params = build_model(config, seed)
    rng = np.random.default_rng(seed + 1000)
    for name in params.trainable_names:
        params.tensors[name] += rng.normal(0.0, scale, size=params.tensors[name].shape)
    return params


def worst_gradient_error(params, X, y):
    _, grads, _ = bptt_gradients(params, X, y)
    worst = 0.0
    for name in params.trainable_names:
        numeric = central_difference(lambda: train_mode_loss(params, X, y), params.tensors[name])
        worst = max(worst, relative_error(grads[name], numeric))
    return worst


def brute_force_auc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    wins = 0.0
    for a in pos:
        for b in neg:
            if a > b:
                wins += 1.0
            elif a == b:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def batch_verdicts(params, windows, threshold):
    p = predict_proba(params, windows.data)
    return ["attack" if v >= threshold else "normal" for v in p], p


def synthetic_windows(n_packets=600, T=8, seed=0, attack_fraction=0.5):
    """Engineered windows and labels from the synthetic generator."""
    from edgedetect.features import engineer_records, fit_feature_spec, make_windows
    from edgedetect.ingest import generate_synthetic

    records = generate_synthetic(n_packets, attack_fraction, seed=seed)
    spec = fit_feature_spec(records)
    X, y = engineer_records(records, spec)
    w = make_windows(X, y, T)
    return np.ascontiguousarray(w.data), w.labels, spec, records


def tensor_errors(params, X, y, mode):
    """Per trainable tensor: (unit-floored elementwise error, norm-wise relative error)."""
    from edgedetect.model import bptt_gradients

    _, grads, _ = bptt_gradients(params, X, y, mode=mode)

    def loss():
        p, _, _ = _forward(params, X, mode)
        return bce_loss(p, y)

    out = {}
    for name in params.trainable_names:
        numeric = central_difference(loss, params.tensors[name])
        analytic = grads[name]
        scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
        normwise = np.linalg.norm(analytic - numeric) / scale if scale > 0 else 0.0
        out[name] = (relative_error(analytic, numeric), normwise)
    return out
