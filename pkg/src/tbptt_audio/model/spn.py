"""State predictor: maps a lookback window to initial LSTM states.

Each block is a valid convolution, a PReLU, control conditioning and a
max-pool. The input length is chosen so the last block leaves exactly one
frame, which a dense layer turns into the processor's flat state vector.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import Module, ModuleList, ShapeError, Tensor, ops
from .context import RecurrentContext
from .layers import ControlFiLM, Conv1d, Dense, PReLU
from .lengths import spn_lookback
from .sptmod import _controls_tensor

__all__ = ["SPN"]


class _SpnBlock(Module):
    def __init__(self, rng, cfg, in_channels, num_controls, dtype):
        super().__init__()
        self.pool = cfg.pool
        self.conv = Conv1d(rng, in_channels, cfg.channels, cfg.kernel, 1, dtype)
        self.act = PReLU(cfg.channels, dtype)
        self.cond = (
            ControlFiLM(rng, num_controls, cfg.film_hidden, cfg.channels, dtype)
            if num_controls
            else None
        )

    def __call__(self, x, controls, site):
        v = self.act(self.conv(x, site=site))
        if self.cond is not None:
            v = ops.film(v, *self.cond(controls))
        return ops.max_pool(v, self.pool)


class SPN(Module):
    """Predicts the processor's initial context from past input and output.

    ``config`` is the processor's :class:`SptmodConfig`; the predictor's own
    shape comes from ``config.spn``. With ``use_reference=False`` the
    reference channel is not read (only the input is seen).
    """

    def __init__(self, config, seed=0, dtype=np.float64):
        super().__init__()
        rng = np.random.default_rng(seed)
        self.config = config
        self.spn_config = config.spn
        self.dtype = np.dtype(dtype)
        self.lookback = spn_lookback(config.spn)
        in_ch = 2 if config.spn.use_reference else 1
        blocks = []
        for _ in range(config.spn.num_blocks):
            blocks.append(_SpnBlock(rng, config.spn, in_ch, config.num_controls, self.dtype))
            in_ch = config.spn.channels
        self.blocks = ModuleList(blocks)
        self.out = Dense(rng, config.spn.channels, config.state_size, self.dtype)

    def features(self, x, reference, controls=None):
        """Activations entering the final dense layer, shaped ``(B, C, frames)``."""
        x = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=self.dtype)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.lookback:
            raise ShapeError(f"state predictor needs {self.lookback} samples, got {x.shape[1]}")
        channels = [x]
        if self.spn_config.use_reference:
            ref = np.asarray(reference, dtype=self.dtype)
            if ref.ndim == 1:
                ref = ref[None, :]
            if ref.shape != x.shape:
                raise ShapeError(f"reference {ref.shape} does not match input {x.shape}")
            channels.append(ref)
        h = Tensor(np.ascontiguousarray(np.stack(channels, axis=1)))
        cond = _controls_tensor(controls, x.shape[0], self.config.num_controls, self.dtype)
        for j, block in enumerate(self.blocks):
            h = block(h, cond, site=f"spn.block{j}.conv")
        return h

    def predict(self, x, reference, controls=None):
        """Initial context (states only, no caches) for a processor pass."""
        h = self.features(x, reference, controls)
        if h.shape[2] != 1:
            raise ShapeError(f"state predictor left {h.shape[2]} frames instead of 1")
        vector = self.out(ops.reshape(h, (h.shape[0], h.shape[1])))
        return RecurrentContext.from_state_vector(self.config, vector)

    __call__ = predict
