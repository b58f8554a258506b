"""Central finite-difference gradient checking."""

from __future__ import annotations

import numpy as np

from .tensor import Tape

__all__ = ["grad_check", "relative_error"]


def _magnitude(analytic, numeric):
    return max(np.max(np.abs(analytic), initial=0.0), np.max(np.abs(numeric), initial=0.0))


def relative_error(analytic, numeric, scale=None):
    """``max|a - n| / max(max|a|, max|n|)``, 0 when both vanish.

    An explicit ``scale`` replaces the denominator.
    """
    if scale is None:
        scale = _magnitude(analytic, numeric)
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric)) / scale)


def grad_check(loss_fn, tensors, eps=1e-5, normalize="tensor"):
    """Compare tape gradients against central differences.

    Parameters
    ----------
    loss_fn : callable
        Zero-argument function building a scalar loss from ``tensors``.
        Must be deterministic.
    tensors : dict[str, Tensor]
        Leaves to check; each must have ``requires_grad`` set and hold
        float64 data.
    eps : float
        Finite-difference step.
    normalize : {"tensor", "global"}
        Denominator of the relative error: each tensor's own gradient
        magnitude, or the largest gradient magnitude over all checked
        tensors. The global form keeps tensors whose gradient is almost
        zero (where central differences are dominated by rounding) from
        reporting meaningless ratios.

    Returns
    -------
    dict[str, float]
        Per-tensor max relative error (see :func:`relative_error`).
    """
    for t in tensors.values():
        if t.data.dtype != np.float64:
            raise TypeError("grad_check needs double precision tensors")
        t.grad = None
    with Tape() as tape:
        loss = loss_fn()
    tape.backward(loss)
    analytic = {
        name: (np.zeros_like(t.data) if t.grad is None else t.grad.copy())
        for name, t in tensors.items()
    }
    numerics = {}
    for name, t in tensors.items():
        numeric = np.empty_like(t.data)
        flat, out = t.data.reshape(-1), numeric.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            up = float(loss_fn().data)
            flat[idx] = orig - eps
            down = float(loss_fn().data)
            flat[idx] = orig
            out[idx] = (up - down) / (2 * eps)
        numerics[name] = numeric
    scale = None
    if normalize == "global":
        scale = max(_magnitude(analytic[n], numerics[n]) for n in tensors)
    elif normalize != "tensor":
        raise ValueError(f"unknown normalization {normalize!r}")
    return {n: relative_error(analytic[n], numerics[n], scale) for n in tensors}
