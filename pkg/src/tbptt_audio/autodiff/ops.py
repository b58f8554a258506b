"""Primitive differentiable ops.

Tensors are channel-first: ``(batch, channels, time)`` for signals and
``(batch, features)`` for vectors. No op pads; temporal ops shorten their
input and the caller is responsible for alignment.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from .tensor import ShapeError, Tensor, record

__all__ = [
    "add",
    "mul",
    "scale",
    "total",
    "mean",
    "weighted_sum",
    "narrow",
    "concat",
    "reshape",
    "conv1d",
    "prelu",
    "max_pool",
    "upsample_linear",
    "film",
    "dense",
    "lstm_step",
    "lstm",
]


def _same_shape(op, a, b):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def add(a, b):
    _same_shape("add", a, b)
    return record("add", a.data + b.data, (a, b), lambda g: (g, g))


def mul(a, b):
    _same_shape("mul", a, b)
    x, y = a.data, b.data
    return record("mul", x * y, (a, b), lambda g: (g * y, g * x))


def scale(a, factor):
    return record("scale", a.data * factor, (a,), lambda g: (g * factor,))


def total(a):
    shape = a.shape
    return record("sum", np.sum(a.data), (a,), lambda g: (np.broadcast_to(g, shape).copy(),))


def mean(a):
    n = a.data.size
    shape = a.shape
    return record("mean", np.mean(a.data), (a,), lambda g: (np.full(shape, g / n, dtype=a.dtype),))


def weighted_sum(a, weights):
    """``sum(a * weights)`` with a constant array of weights."""
    w = np.asarray(weights, dtype=a.dtype)
    if w.shape != a.shape:
        raise ShapeError(f"weighted_sum: weights {w.shape} vs tensor {a.shape}")
    return record("weighted_sum", np.sum(a.data * w), (a,), lambda g: (g * w,))


def narrow(x, axis, start, stop=None):
    """Slice ``x[..., start:stop, ...]`` along one axis."""
    size = x.shape[axis]
    stop = size if stop is None else stop
    if not 0 <= start <= stop <= size:
        raise ShapeError(f"narrow: [{start}:{stop}] out of range for axis of size {size}")
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    shape, dtype = x.shape, x.dtype

    def backward(g):
        dx = np.zeros(shape, dtype=dtype)
        dx[index] = g
        return (dx,)

    return record("narrow", x.data[index], (x,), backward)


def concat(tensors, axis):
    tensors = tuple(tensors)
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        out = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            index = [slice(None)] * g.ndim
            index[axis] = slice(lo, hi)
            out.append(g[tuple(index)])
        return tuple(out)

    data = np.concatenate([t.data for t in tensors], axis=axis)
    return record("concat", data, tensors, backward)


def reshape(x, shape):
    old = x.shape
    return record("reshape", x.data.reshape(shape), (x,), lambda g: (g.reshape(old),))


def conv1d(x, weight, bias=None, dilation=1, site="conv1d"):
    """Valid (unpadded) dilated convolution.

    ``x`` is ``(B, Cin, T)``, ``weight`` is ``(Cout, Cin, k)``. The output has
    ``T - (k - 1) * dilation`` samples; output ``t`` reads input
    ``t .. t + (k - 1) * dilation``.
    """
    xd, w = x.data, weight.data
    if xd.ndim != 3 or w.ndim != 3 or xd.shape[1] != w.shape[1]:
        raise ShapeError(f"{site}: input {xd.shape} incompatible with weight {w.shape}")
    k = w.shape[2]
    span = (k - 1) * dilation
    t_out = xd.shape[2] - span
    if t_out < 1:
        raise ShapeError(
            f"{site}: input length {xd.shape[2]} too short for receptive span {span + 1}"
        )
    # (B, Cin, t_out, k) view of every receptive field; one GEMM per pass
    cols = sliding_window_view(xd, span + 1, axis=2)[:, :, :, ::dilation]
    out = np.ascontiguousarray(np.tensordot(w, cols, axes=([1, 2], [1, 3])).transpose(1, 0, 2))
    inputs = (x, weight)
    if bias is not None:
        out += bias.data[None, :, None]
        inputs = (x, weight, bias)

    def backward(g):
        dx = None
        if x.requires_grad:
            dx = np.zeros_like(xd)
            if xd.shape[1] > 1:
                dcols = np.tensordot(w, g, axes=([0], [1]))  # (Cin, k, B, t_out)
                for j in range(k):
                    s = j * dilation
                    dx[:, :, s : s + t_out] += dcols[:, j].transpose(1, 0, 2)
            else:
                for j in range(k):
                    s = j * dilation
                    dx[:, :, s : s + t_out] += np.matmul(w[:, :, j].T, g)
        if w.shape[1] * k > 8:
            dw = np.tensordot(g, cols, axes=([0, 2], [0, 2]))
        else:
            dw = np.empty_like(w)
            for j in range(k):
                s = j * dilation
                dw[:, :, j] = np.tensordot(g, xd[:, :, s : s + t_out], axes=([0, 2], [0, 2]))
        if bias is None:
            return dx, dw
        return dx, dw, g.sum(axis=(0, 2))

    return record(site, out, inputs, backward)


def prelu(x, slope):
    """Per-channel parametric ReLU; channels on axis 1."""
    xd, a = x.data, slope.data
    if a.shape != (xd.shape[1],):
        raise ShapeError(f"prelu: slope {a.shape} for {xd.shape[1]} channels")
    shape = (1, -1) + (1,) * (xd.ndim - 2)
    a_b = a.reshape(shape)
    neg = xd < 0
    out = np.where(neg, a_b * xd, xd)
    reduce_axes = (0,) + tuple(range(2, xd.ndim))

    def backward(g):
        dx = np.where(neg, a_b * g, g)
        da = np.sum(np.where(neg, g * xd, 0), axis=reduce_axes)
        return dx, da

    return record("prelu", out, (x, slope), backward)


def max_pool(x, pool):
    """Non-overlapping max over ``pool``-sample windows along time."""
    xd = x.data
    b, c, t = xd.shape
    if t % pool:
        raise ShapeError(f"max_pool: length {t} not divisible by pool size {pool}")
    frames = xd.reshape(b, c, t // pool, pool)
    arg = np.argmax(frames, axis=3)[..., None]
    out = np.take_along_axis(frames, arg, axis=3)[..., 0]

    def backward(g):
        dx = np.zeros_like(frames)
        np.put_along_axis(dx, arg, g[..., None], axis=3)
        return (dx.reshape(b, c, t),)

    return record("max_pool", out, (x,), backward)


def upsample_linear(frames, factor):
    """Linear interpolation between consecutive frames.

    Frame ``i`` lands on output index ``i * factor``; the samples between two
    frames ramp linearly, and the last ``factor - 1`` samples hold the final
    frame. Output length is ``F * factor``.
    """
    f = frames.data
    b, c, n = f.shape
    w = (np.arange(factor, dtype=f.dtype) / factor)[None, None, None, :]
    nxt = np.concatenate([f[:, :, 1:], f[:, :, -1:]], axis=2)
    out = f[..., None] * (1 - w) + nxt[..., None] * w

    def backward(g):
        g = g.reshape(b, c, n, factor)
        df = np.sum(g * (1 - w), axis=3)
        dn = np.sum(g * w, axis=3)
        df[:, :, 1:] += dn[:, :, :-1]
        df[:, :, -1] += dn[:, :, -1]
        return (df,)

    return record("upsample_linear", out.reshape(b, c, n * factor), (frames,), backward)


def film(x, gamma, beta=None):
    """Feature-wise affine modulation ``gamma * x + beta``.

    ``gamma``/``beta`` are ``(B, C)`` (constant over time) or ``(B, C, T)``
    (temporal). ``beta=None`` gives scale-only modulation.
    """
    xd, gd = x.data, gamma.data
    temporal = gd.ndim == 3
    if gd.shape != (xd.shape if temporal else xd.shape[:2]):
        raise ShapeError(f"film: modulation {gd.shape} does not fit input {xd.shape}")
    g_b = gd if temporal else gd[:, :, None]
    out = g_b * xd
    inputs = (x, gamma)
    if beta is not None:
        if beta.shape != gd.shape:
            raise ShapeError(f"film: beta {beta.shape} vs gamma {gd.shape}")
        out = out + (beta.data if temporal else beta.data[:, :, None])
        inputs = (x, gamma, beta)

    def backward(g):
        dx = g * g_b
        dgamma = g * xd if temporal else np.sum(g * xd, axis=2)
        if beta is None:
            return dx, dgamma
        return dx, dgamma, (g if temporal else np.sum(g, axis=2))

    return record("film", out, inputs, backward)


def dense(x, weight, bias=None):
    """Affine map ``x @ weight.T + bias`` on ``(B, F)`` inputs."""
    xd, w = x.data, weight.data
    if xd.ndim != 2 or w.shape[1] != xd.shape[1]:
        raise ShapeError(f"dense: input {xd.shape} incompatible with weight {w.shape}")
    out = xd @ w.T
    inputs = (x, weight)
    if bias is not None:
        out = out + bias.data
        inputs = (x, weight, bias)

    def backward(g):
        grads = (g @ w, g.T @ xd)
        return grads if bias is None else grads + (g.sum(axis=0),)

    return record("dense", out, inputs, backward)


def lstm_step(x_t, h, c, w_ih, w_hh, bias):
    """One LSTM cell update; gate order (input, forget, cell, output).

    Returns ``(h', c')``; the step output equals ``h'``.
    """
    xd, hd, cd = x_t.data, h.data, c.data
    hidden = hd.shape[1]
    z = xd @ w_ih.data.T + hd @ w_hh.data.T + bias.data
    i = expit(z[:, :hidden])
    f = expit(z[:, hidden : 2 * hidden])
    u = np.tanh(z[:, 2 * hidden : 3 * hidden])
    o = expit(z[:, 3 * hidden :])
    c_new = f * cd + i * u
    tc = np.tanh(c_new)
    h_new = o * tc

    def backward(gh, gc):
        dc = gc + gh * o * (1 - tc * tc)
        dz = np.concatenate(
            [
                dc * u * i * (1 - i),
                dc * cd * f * (1 - f),
                dc * i * (1 - u * u),
                gh * tc * o * (1 - o),
            ],
            axis=1,
        )
        return (
            dz @ w_ih.data,
            dz @ w_hh.data,
            dc * f,
            dz.T @ xd,
            dz.T @ hd,
            dz.sum(axis=0),
        )

    return record("lstm_step", (h_new, c_new), (x_t, h, c, w_ih, w_hh, bias), backward)


def lstm(x, h0, c0, w_ih, w_hh, bias):
    """LSTM over a frame sequence as a single op.

    ``x`` is ``(B, F, T)``; returns ``(h_seq (B, H, T), h_T, c_T)``.
    Equivalent to chaining :func:`lstm_step`, with the time loop kept inside
    one tape node.
    """
    xs = np.ascontiguousarray(x.data.transpose(2, 0, 1))
    n_steps, batch, _ = xs.shape
    hidden = h0.shape[1]
    wi, wh = w_ih.data, w_hh.data
    dtype = xs.dtype
    zx = xs @ wi.T + bias.data
    hs = np.empty((n_steps + 1, batch, hidden), dtype=dtype)
    cs = np.empty((n_steps + 1, batch, hidden), dtype=dtype)
    gates = np.empty((n_steps, batch, 4 * hidden), dtype=dtype)
    tcs = np.empty((n_steps, batch, hidden), dtype=dtype)
    hs[0], cs[0] = h0.data, c0.data
    for t in range(n_steps):
        z = zx[t] + hs[t] @ wh.T
        a = gates[t]
        a[:, : 2 * hidden] = expit(z[:, : 2 * hidden])
        a[:, 2 * hidden : 3 * hidden] = np.tanh(z[:, 2 * hidden : 3 * hidden])
        a[:, 3 * hidden :] = expit(z[:, 3 * hidden :])
        cs[t + 1] = a[:, hidden : 2 * hidden] * cs[t] + a[:, :hidden] * a[:, 2 * hidden : 3 * hidden]
        tcs[t] = np.tanh(cs[t + 1])
        hs[t + 1] = a[:, 3 * hidden :] * tcs[t]
    h_seq = np.ascontiguousarray(hs[1:].transpose(1, 2, 0))

    def backward(g_seq, g_h, g_c):
        g_seq = g_seq.transpose(2, 0, 1)
        dz = np.empty_like(gates)
        dh = g_h.copy()
        dc = g_c.copy()
        for t in range(n_steps - 1, -1, -1):
            a = gates[t]
            i, f = a[:, :hidden], a[:, hidden : 2 * hidden]
            u, o = a[:, 2 * hidden : 3 * hidden], a[:, 3 * hidden :]
            dh = dh + g_seq[t]
            tc = tcs[t]
            dc = dc + dh * o * (1 - tc * tc)
            d = dz[t]
            d[:, :hidden] = dc * u * i * (1 - i)
            d[:, hidden : 2 * hidden] = dc * cs[t] * f * (1 - f)
            d[:, 2 * hidden : 3 * hidden] = dc * i * (1 - u * u)
            d[:, 3 * hidden :] = dh * tc * o * (1 - o)
            dc = dc * f
            dh = d @ wh
        flat = dz.reshape(-1, 4 * hidden)
        dx = (dz @ wi).transpose(1, 2, 0)
        dwi = flat.T @ xs.reshape(-1, xs.shape[2])
        dwh = flat.T @ hs[:-1].reshape(-1, hidden)
        return dx, dh, dc, dwi, dwh, flat.sum(axis=0)

    return record(
        "lstm", (h_seq, hs[-1].copy(), cs[-1].copy()), (x, h0, c0, w_ih, w_hh, bias), backward
    )
