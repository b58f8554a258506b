"""Recurrent state and padding caches carried between buffers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor, ops

__all__ = ["BlockState", "RecurrentContext", "ContractError"]


class ContractError(RuntimeError):
    """A forward pass was called with a context that cannot serve it."""


@dataclass
class BlockState:
    """Everything one modulation block needs to continue a stream.

    ``conv`` holds the last ``span`` samples of the block's modulation input,
    ``pending`` the post-activation samples not yet forming a whole pooling
    frame, and ``last2`` the two most recent LSTM outputs the lagged
    interpolation still reads. All three are None in a fresh context.
    """

    h: Tensor
    c: Tensor
    conv: Tensor = None
    pending: Tensor = None
    last2: Tensor = None

    @property
    def primed(self):
        return self.conv is not None and self.pending is not None and self.last2 is not None

    def tensors(self):
        return [t for t in (self.h, self.c, self.conv, self.pending, self.last2) if t is not None]


def _detach(t):
    return None if t is None else t.detach()


class RecurrentContext:
    """LSTM states plus padding caches of one model instance for one stream."""

    def __init__(self, blocks):
        self.blocks = list(blocks)

    @classmethod
    def fresh(cls, config, batch, dtype=np.float64):
        """Zero LSTM states and empty caches."""
        return cls(
            BlockState(
                Tensor(np.zeros((batch, b.lstm_hidden), dtype=dtype)),
                Tensor(np.zeros((batch, b.lstm_hidden), dtype=dtype)),
            )
            for b in config.blocks
        )

    @classmethod
    def from_state_vector(cls, config, vector):
        """Slice a ``(B, sum 2H)`` vector into per-block ``(h, c)``.

        The layout is ``[h_0, c_0, h_1, c_1, ...]``; slicing is
        differentiable so gradients reach whatever produced ``vector``.
        """
        if vector.shape[1] != config.state_size:
            raise ValueError(f"state vector width {vector.shape[1]} != {config.state_size}")
        blocks, pos = [], 0
        for b in config.blocks:
            h = ops.narrow(vector, 1, pos, pos + b.lstm_hidden)
            c = ops.narrow(vector, 1, pos + b.lstm_hidden, pos + 2 * b.lstm_hidden)
            blocks.append(BlockState(h, c))
            pos += 2 * b.lstm_hidden
        return cls(blocks)

    @property
    def primed(self):
        return all(b.primed for b in self.blocks)

    @property
    def batch(self):
        return self.blocks[0].h.shape[0]

    def detach(self):
        """Value copy whose tensors carry no history."""
        return RecurrentContext(
            BlockState(
                b.h.detach(), b.c.detach(), _detach(b.conv), _detach(b.pending), _detach(b.last2)
            )
            for b in self.blocks
        )

    def state_vector(self):
        """Current ``(h, c)`` values flattened in the predictor's layout."""
        parts = []
        for b in self.blocks:
            parts += [b.h.data, b.c.data]
        return np.concatenate(parts, axis=1)

    def tensors(self):
        out = []
        for b in self.blocks:
            out += b.tensors()
        return out
