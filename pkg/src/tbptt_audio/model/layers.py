"""Parameterized layers built on the autodiff primitives."""

from __future__ import annotations

import numpy as np

from ..autodiff import Module, Parameter, kaiming_uniform, ops

__all__ = ["Conv1d", "PReLU", "Dense", "ControlFiLM", "LSTM"]


class Conv1d(Module):
    def __init__(self, rng, in_channels, out_channels, kernel, dilation=1, dtype=np.float64):
        super().__init__()
        fan_in = in_channels * kernel
        self.dilation = dilation
        self.weight = Parameter(kaiming_uniform(rng, (out_channels, in_channels, kernel), fan_in, dtype))
        self.bias = Parameter(kaiming_uniform(rng, (out_channels,), fan_in, dtype))

    @property
    def span(self):
        return (self.weight.shape[2] - 1) * self.dilation

    def __call__(self, x, site="conv1d"):
        return ops.conv1d(x, self.weight, self.bias, self.dilation, site=site)


class PReLU(Module):
    def __init__(self, channels, dtype=np.float64):
        super().__init__()
        self.slope = Parameter(np.full(channels, 0.25, dtype=dtype))

    def __call__(self, x):
        return ops.prelu(x, self.slope)


class Dense(Module):
    def __init__(self, rng, in_features, out_features, dtype=np.float64):
        super().__init__()
        self.weight = Parameter(kaiming_uniform(rng, (out_features, in_features), in_features, dtype))
        self.bias = Parameter(kaiming_uniform(rng, (out_features,), in_features, dtype))

    def __call__(self, x):
        return ops.dense(x, self.weight, self.bias)


class ControlFiLM(Module):
    """Two dense layers with a PReLU between them, mapping controls to
    per-channel ``(gamma, beta)``.

    The output bias starts at ``gamma = 1, beta = 0`` so a freshly built
    layer is close to the identity.
    """

    def __init__(self, rng, num_controls, hidden, channels, dtype=np.float64):
        super().__init__()
        self.channels = channels
        self.hidden = Dense(rng, num_controls, hidden, dtype)
        self.act = PReLU(hidden, dtype)
        self.out = Dense(rng, hidden, 2 * channels, dtype)
        self.out.bias.data[:channels] = 1.0
        self.out.bias.data[channels:] = 0.0

    def __call__(self, controls):
        z = self.out(self.act(self.hidden(controls)))
        c = self.channels
        return ops.narrow(z, 1, 0, c), ops.narrow(z, 1, c, 2 * c)


class LSTM(Module):
    """Single-layer LSTM over frame sequences; forget-gate bias starts at +1."""

    def __init__(self, rng, in_features, hidden, dtype=np.float64):
        super().__init__()
        self.hidden_size = hidden
        self.w_ih = Parameter(kaiming_uniform(rng, (4 * hidden, in_features), hidden, dtype))
        self.w_hh = Parameter(kaiming_uniform(rng, (4 * hidden, hidden), hidden, dtype))
        bias = kaiming_uniform(rng, (4 * hidden,), hidden, dtype)
        bias[hidden : 2 * hidden] += 1.0
        self.bias = Parameter(bias)

    def __call__(self, frames, h, c):
        return ops.lstm(frames, h, c, self.w_ih, self.w_hh, self.bias)
