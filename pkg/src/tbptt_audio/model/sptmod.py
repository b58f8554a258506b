"""The modulation-based effect processor.

Two paths run side by side. The modulation path starts from the input
audio and, block by block, applies a dilated convolution, a PReLU and a
temporal modulation: frames are max-pooled, conditioned on the user controls,
fed through an LSTM and interpolated back to the sample rate. The audio path
only ever multiplies the input by per-sample gains read from each block's
LSTM output, so silence stays silent.

The recurrent modulation for the samples of frame ``i`` interpolates
between the LSTM outputs of frames ``i - 2`` and ``i - 1``. Every gain
therefore depends on fully pooled past frames only, which keeps the model
causal and lets a stream be cut into buffers of any length.

Tensors are right-aligned: the last sample of every intermediate tensor
corresponds to the newest input sample, and all crops remove leading
samples.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import Module, ModuleList, Parameter, ShapeError, Tensor, kaiming_uniform, ops
from .context import BlockState, ContractError, RecurrentContext
from .layers import LSTM, ControlFiLM, Conv1d, PReLU
from .lengths import solve_lengths

__all__ = ["ModBlock", "SPTMod", "make_cached_context", "as_signal"]


def as_signal(x, dtype):
    """``(B, T)`` array/Tensor to a ``(B, 1, T)`` Tensor of ``dtype``."""
    if isinstance(x, Tensor):
        if x.ndim == 2:
            return ops.reshape(x, (x.shape[0], 1, x.shape[1]))
        return x
    arr = np.asarray(x, dtype=dtype)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim == 2:
        arr = arr[:, None, :]
    if arr.ndim != 3 or arr.shape[1] != 1:
        raise ShapeError(f"expected mono audio shaped (B, T), got {arr.shape}")
    return Tensor(arr)


def _controls_tensor(controls, batch, num_controls, dtype):
    if num_controls == 0:
        return None
    if controls is None:
        raise ValueError(f"model expects {num_controls} controls")
    if isinstance(controls, Tensor):
        return controls
    arr = np.asarray(controls, dtype=dtype)
    if arr.ndim == 1:
        arr = np.broadcast_to(arr, (batch, arr.shape[0]))
    if arr.shape != (batch, num_controls):
        raise ShapeError(f"controls {arr.shape} do not match ({batch}, {num_controls})")
    return Tensor(np.ascontiguousarray(arr))


class _Head(Module):
    """Pointwise projection of the LSTM output to ``out`` channels."""

    def __init__(self, rng, hidden, out, dtype, weight_scale=1.0):
        super().__init__()
        self.weight = Parameter(weight_scale * kaiming_uniform(rng, (out, hidden, 1), hidden, dtype))
        self.bias = Parameter(np.zeros(out, dtype=dtype))

    def __call__(self, x, site):
        return ops.conv1d(x, self.weight, self.bias, site=site)


class ModBlock(Module):
    def __init__(self, rng, cfg, in_channels, num_controls, last, dtype):
        super().__init__()
        self.cfg = cfg
        self.conv = Conv1d(rng, in_channels, cfg.out_channels, cfg.kernel, cfg.dilation, dtype)
        self.act = PReLU(cfg.out_channels, dtype)
        if num_controls:
            self.cond = ControlFiLM(rng, num_controls, cfg.film_hidden, cfg.out_channels, dtype)
        else:
            self.cond = None
        self.lstm = LSTM(rng, cfg.out_channels, cfg.lstm_hidden, dtype)
        # Gains start close to 1: small weights, unit bias.
        self.gain = _Head(rng, cfg.lstm_hidden, 1, dtype, weight_scale=0.1)
        self.gain.bias.data[:] = 1.0
        if last:
            self.mod = None
        else:
            self.mod = _Head(rng, cfg.lstm_hidden, 2 * cfg.out_channels, dtype)
            self.mod.bias.data[: cfg.out_channels] = 1.0

    def _frames(self, v, film):
        frames = ops.max_pool(v, self.cfg.pool)
        if film is not None:
            frames = ops.film(frames, *film)
        return frames

    def forward(self, mod_in, controls, state, name, crop=None):
        """Run the modulation side of the block.

        Returns ``(modulation (B,H,T), aligned activations (B,C,T), new state)``.
        ``crop`` is the pooling crop of a fresh pass; None means the block
        continues from ``state``'s caches.
        """
        p = self.cfg.pool
        span = self.conv.span
        film = self.cond(controls) if self.cond is not None else None
        if crop is not None:
            v = self.act(self.conv(mod_in, site=f"{name}.conv"))
            v = ops.narrow(v, 2, crop)
            n = v.shape[2]
            n_frames = n // p
            if n_frames < 3:
                raise ShapeError(f"{name}: {n} samples after cropping, need 3 frames of {p}")
            pooled = ops.narrow(v, 2, 0, n_frames * p)
            h_seq, h_t, c_t = self.lstm(self._frames(pooled, film), state.h, state.c)
            mod = ops.narrow(ops.upsample_linear(h_seq, p), 2, 0, n - 2 * p)
            aligned = ops.narrow(v, 2, 2 * p)
            pending = ops.narrow(v, 2, n_frames * p)
            last2 = ops.narrow(h_seq, 2, n_frames - 2)
        else:
            full = ops.concat([state.conv, mod_in], axis=2)
            v = self.act(self.conv(full, site=f"{name}.conv"))
            buf = ops.concat([state.pending, v], axis=2)
            rho, n = state.pending.shape[2], v.shape[2]
            n_frames = (rho + n) // p
            if n_frames:
                pooled = ops.narrow(buf, 2, 0, n_frames * p)
                h_new, h_t, c_t = self.lstm(self._frames(pooled, film), state.h, state.c)
                seq = ops.concat([state.last2, h_new], axis=2)
            else:
                h_t, c_t, seq = state.h, state.c, state.last2
            mod = ops.narrow(ops.upsample_linear(seq, p), 2, rho, rho + n)
            aligned = v
            pending = ops.narrow(buf, 2, n_frames * p)
            last2 = ops.narrow(seq, 2, n_frames)
            mod_in = full
        conv_cache = ops.narrow(mod_in, 2, mod_in.shape[2] - span)
        return mod, aligned, BlockState(h_t, c_t, conv_cache, pending, last2)


class SPTMod(Module):
    """Effect processor with a padding-free fresh mode and a cached mode.

    Parameters
    ----------
    config : SptmodConfig
    L_out : int
        Output length of a fresh (padding-free) pass; sets the length plan.
    seed : int
        Seed of the weight initialization.
    dtype : numpy dtype
        ``float64`` for exact checks, ``float32`` for training runs.
    """

    def __init__(self, config, L_out, seed=0, dtype=np.float64):
        super().__init__()
        rng = np.random.default_rng(seed)
        self.config = config
        self.dtype = np.dtype(dtype)
        self.plan = solve_lengths(config, L_out)
        blocks = []
        in_ch = 1
        for j, b in enumerate(config.blocks):
            last = j == len(config.blocks) - 1
            blocks.append(ModBlock(rng, b, in_ch, config.num_controls, last, self.dtype))
            in_ch = b.out_channels
        self.blocks = ModuleList(blocks)

    @property
    def L_nopad(self):
        return self.plan.L_nopad

    def set_output_length(self, L_out):
        self.plan = solve_lengths(self.config, L_out)

    def fresh_context(self, batch):
        return RecurrentContext.fresh(self.config, batch, self.dtype)

    def forward(self, x, controls=None, ctx=None, mode="nopad", extend=False):
        """Process one buffer.

        ``mode="nopad"`` expects exactly ``L_nopad`` samples (more if
        ``extend``; the extra samples lengthen the output one for one) and
        uses only the LSTM states of ``ctx`` (zero when ``ctx`` is None).
        ``mode="cached"`` accepts any positive length and continues from a
        primed ``ctx``. Returns ``(output (B, T_out) Tensor, new context)``.
        """
        x = as_signal(x, self.dtype)
        batch, length = x.shape[0], x.shape[2]
        cond = _controls_tensor(controls, batch, self.config.num_controls, self.dtype)
        if ctx is None:
            ctx = self.fresh_context(batch)
        if ctx.batch != batch:
            raise ShapeError(f"context batch {ctx.batch} != input batch {batch}")
        plan = self.plan
        if mode == "nopad":
            if length != plan.L_nopad and not (extend and length > plan.L_nopad):
                raise ShapeError(f"padding-free pass needs {plan.L_nopad} input samples, got {length}")
        elif mode == "cached":
            if not ctx.primed:
                raise ContractError("cached pass needs a context primed by a previous pass")
            if length < 1:
                raise ShapeError("cached pass needs at least one sample")
        else:
            raise ValueError(f"unknown padding mode {mode!r}")
        fresh = mode == "nopad"

        audio, mod = x, x
        states = []
        for j, block in enumerate(self.blocks):
            name = f"block{j}"
            crop = plan.crops[f"{name}.pool"] if fresh else None
            modulation, aligned, state = block.forward(mod, cond, ctx.blocks[j], name, crop)
            gain = block.gain(modulation, site=f"{name}.gain_head")
            if fresh:
                audio = ops.narrow(audio, 2, plan.crops[f"{name}.audio"])
                gain = ops.narrow(gain, 2, plan.crops[f"{name}.gain"])
            audio = ops.mul(audio, gain)
            if block.mod is not None:
                c = block.cfg.out_channels
                params = block.mod(modulation, site=f"{name}.mod_head")
                mod = ops.film(
                    aligned, ops.narrow(params, 1, 0, c), ops.narrow(params, 1, c, 2 * c)
                )
            states.append(state)
        if fresh:
            audio = ops.narrow(audio, 2, plan.crops["output"])
        out = ops.reshape(audio, (batch, audio.shape[2]))
        return out, RecurrentContext(states)

    __call__ = forward

    def stream(self, x, controls=None, chunk=None, ctx=None):
        """Inference over a long signal: one fresh pass, then cached chunks.

        Returns the output array of length ``len(x) - L_nopad + L_out``.
        """
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim == 1:
            x = x[None, :]
        chunk = chunk or self.plan.L_out
        n0 = self.plan.L_nopad
        y, ctx = self.forward(x[:, :n0], controls, ctx, mode="nopad")
        outs = [y.data]
        pos = n0
        while pos < x.shape[1]:
            y, ctx = self.forward(x[:, pos : pos + chunk], controls, ctx, mode="cached")
            outs.append(y.data)
            pos += chunk
        return np.concatenate(outs, axis=1), ctx


def make_cached_context(model, warmup_input, controls=None):
    """Context after a padding-free pass over ``warmup_input``.

    The input must hold at least ``L_nopad`` samples; any excess is consumed
    by the same pass, and the outputs are discarded.
    """
    x = np.asarray(warmup_input, dtype=model.dtype)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] < model.L_nopad:
        raise ShapeError(f"warm-up needs at least {model.L_nopad} samples, got {x.shape[1]}")
    _, ctx = model.forward(x, controls, mode="nopad", extend=True)
    return ctx.detach()
