"""Input validation helpers shared by the estimators and the CLI."""

import numpy as np

from edgedetect.ingest import PacketRecord


def check_windows(X, n_features=None, window_length=None):
    """Return ``X`` as a finite float64 ``(n, T, features)`` array."""
    if hasattr(X, "data") and hasattr(X, "labels"):
        X = X.data
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3:
        raise ValueError(f"expected windows shaped (n, T, features), got ndim={X.ndim}")
    if n_features is not None and X.shape[2] != n_features:
        raise ValueError(f"X has {X.shape[2]} features per packet, expected {n_features}")
    if window_length is not None and X.shape[1] != window_length:
        raise ValueError(f"X has windows of length {X.shape[1]}, expected {window_length}")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains NaN or infinite values")
    return X


def check_binary_labels(y, n=None):
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"y must be 1-dimensional, got shape {y.shape}")
    if n is not None and len(y) != n:
        raise ValueError(f"y has {len(y)} labels for {n} samples")
    if not np.all(np.isin(y, (0, 1))):
        raise ValueError("labels must be 0 (normal) or 1 (attack)")
    return y.astype(np.int64)


def as_rows(X):
    """Raw cell rows from a list of :class:`PacketRecord` or a 2-D array-like."""
    if len(X) and isinstance(X[0], PacketRecord):
        return [r.values for r in X]
    arr = np.asarray(X, dtype=object)
    if arr.ndim != 2:
        raise ValueError(f"expected records or a 2-D array of raw cells, got ndim={arr.ndim}")
    return [tuple(str(c) for c in row) for row in arr]
