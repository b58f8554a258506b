"""Input checks shared by the estimators and the CLI."""

from __future__ import annotations

import numpy as np

__all__ = ["check_signal", "check_signals", "check_controls", "check_positive_int"]


def check_signal(x, name="x", min_length=1):
    """Finite 1-D float64 array of at least ``min_length`` samples."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-D signal, got shape {arr.shape}")
    if arr.shape[0] < min_length:
        raise ValueError(f"{name} has {arr.shape[0]} samples, need at least {min_length}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def check_signals(X, name="X", min_length=1):
    """List of signals from a 2-D array, a 1-D array or a list of arrays."""
    if isinstance(X, np.ndarray) and X.ndim == 2:
        X = list(X)
    elif isinstance(X, np.ndarray) and X.ndim == 1 and X.dtype != object:
        X = [X]
    return [check_signal(x, f"{name}[{i}]", min_length) for i, x in enumerate(X)]


def check_controls(controls, n_items, num_controls):
    """``(n_items, num_controls)`` array in ``[0, 1]``; None when unused."""
    if num_controls == 0:
        return None
    if controls is None:
        raise ValueError(f"model expects {num_controls} controls per item")
    c = np.asarray(controls, dtype=np.float64)
    if c.ndim == 1:
        c = np.broadcast_to(c, (n_items, c.shape[0]))
    if c.shape != (n_items, num_controls):
        raise ValueError(f"controls shape {c.shape} != ({n_items}, {num_controls})")
    if not np.isfinite(c).all() or c.min() < 0 or c.max() > 1:
        raise ValueError("normalized controls must lie in [0, 1]")
    return np.ascontiguousarray(c)


def check_positive_int(value, name):
    if int(value) != value or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
