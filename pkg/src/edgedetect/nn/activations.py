"""Elementwise nonlinearities and their derivatives."""

import numpy as np
from scipy.special import expit

ACTIVATIONS = ("tanh", "relu", "sigmoid", "linear")


def sigmoid(x):
    return expit(x)


def tanh(x):
    return np.tanh(x)


def relu(x):
    return np.maximum(x, 0.0)


def activation(kind, x):
    """Apply the named activation elementwise; shape is preserved."""
    x = np.asarray(x, dtype=np.float64)
    if kind == "tanh":
        return np.tanh(x)
    if kind == "sigmoid":
        return expit(x)
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "linear":
        return x.copy()
    raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


def activation_grad(kind, out, x=None):
    """Derivative of the activation, expressed through its output ``out``.

    ReLU uses the pre-activation ``x`` when given (subgradient 0 at x == 0).
    """
    if kind == "tanh":
        return 1.0 - out * out
    if kind == "sigmoid":
        return out * (1.0 - out)
    if kind == "relu":
        ref = out if x is None else x
        return (ref > 0).astype(np.float64)
    if kind == "linear":
        return np.ones_like(out)
    raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")
