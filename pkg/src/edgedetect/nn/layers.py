"""Dense and batch-normalization layers (forward and backward)."""

import numpy as np

from edgedetect.nn.activations import activation, activation_grad

BN_EPS = 1e-5
BN_MOMENTUM = 0.9


def dense_forward(x, weight, bias, act="linear"):
    """Compute ``act(x @ weight.T + bias)`` for a ``(batch, in)`` input.

    Returns ``(out, cache)``; the cache feeds :func:`dense_backward`.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ValueError(
            f"dense shape mismatch: input {x.shape} vs weight {weight.shape}"
        )
    if bias.shape != (weight.shape[0],):
        raise ValueError(f"dense bias shape {bias.shape} != ({weight.shape[0]},)")
    pre = x @ weight.T + bias
    out = activation(act, pre)
    return out, (x, weight, pre, out, act)


def dense_backward(dout, cache):
    """Return ``(dx, dweight, dbias)``."""
    x, weight, pre, out, act = cache
    dpre = dout * activation_grad(act, out, pre)
    return dpre @ weight, dpre.T @ x, dpre.sum(axis=0)


def batchnorm(x, gamma, beta, running_mean, running_var, mode="infer",
              eps=BN_EPS, momentum=BN_MOMENTUM):
    """Batch normalization over axis 0 of a ``(batch, features)`` array.

    Pure: the updated running statistics are returned instead of written
    in place. Returns ``(out, cache, new_running_mean, new_running_var)``.
    Running variance is updated with the unbiased batch variance.
    """
    x = np.asarray(x, dtype=np.float64)
    if mode == "train":
        n = x.shape[0]
        if n < 2:
            raise ValueError("batchnorm in train mode needs a batch of at least 2")
        mean = x.mean(axis=0)
        var = x.var(axis=0)
        new_mean = momentum * running_mean + (1.0 - momentum) * mean
        new_var = momentum * running_var + (1.0 - momentum) * var * (n / (n - 1))
    elif mode == "infer":
        mean, var = running_mean, running_var
        new_mean, new_var = running_mean, running_var
    else:
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * inv_std
    out = gamma * xhat + beta
    return out, (xhat, inv_std, gamma, mode), new_mean, new_var


def batchnorm_backward(dout, cache):
    """Return ``(dx, dgamma, dbeta)``.

    In train mode the batch statistics depend on ``x`` and the full
    normalization Jacobian is applied; in infer mode the statistics are
    constants.
    """
    xhat, inv_std, gamma, mode = cache
    dgamma = (dout * xhat).sum(axis=0)
    dbeta = dout.sum(axis=0)
    dxhat = dout * gamma
    if mode == "infer":
        return dxhat * inv_std, dgamma, dbeta
    n = dout.shape[0]
    dx = (inv_std / n) * (
        n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0)
    )
    return dx, dgamma, dbeta
