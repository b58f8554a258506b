"""Tape-based reverse-mode differentiation over numpy arrays.

Operations executed while a :class:`Tape` is active are recorded in execution
order; :meth:`Tape.backward` replays them in reverse and accumulates
gradients into every tensor that requires them. Outside of a tape nothing is
recorded, which is how inference passes run.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "Parameter",
    "Tape",
    "ShapeError",
    "NonFiniteError",
    "active_tape",
    "record",
    "as_tensor",
]

_ACTIVE = []


class ShapeError(ValueError):
    """Raised when an op receives tensors whose shapes violate its contract."""


class NonFiniteError(FloatingPointError):
    """Raised when a NaN or Inf shows up in a forward value or a gradient."""


def check_finite(values, where):
    if not np.isfinite(values).all():
        raise NonFiniteError(f"non-finite values produced by {where}")


class Tensor:
    """A numpy array plus an optional gradient slot."""

    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def detach(self):
        """Value copy with no history; contributes no gradient upstream."""
        return Tensor(self.data.copy())

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tag})"


class Parameter(Tensor):
    """Trainable leaf tensor; gradients accumulate into ``grad``."""

    __slots__ = ()

    def __init__(self, data, name=None):
        super().__init__(data, requires_grad=True, name=name)

    def zero_grad(self):
        self.grad = None


def as_tensor(x, dtype=None):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


class _Node:
    __slots__ = ("outputs", "inputs", "backward", "op")

    def __init__(self, outputs, inputs, backward, op):
        self.outputs = outputs
        self.inputs = inputs
        self.backward = backward
        self.op = op


class Tape:
    """Ordered record of executed ops.

    Use as a context manager; ops run inside the ``with`` block are recorded
    when at least one input requires a gradient::

        with Tape() as tape:
            loss = some_model(x)
        tape.backward(loss)
    """

    def __init__(self):
        self.nodes = []

    def __enter__(self):
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc):
        _ACTIVE.remove(self)
        return False

    def __len__(self):
        return len(self.nodes)

    def backward(self, loss):
        """Populate ``grad`` of every leaf reachable from ``loss``.

        ``loss`` must be a scalar recorded on this tape. Each recorded op is
        visited exactly once, newest first. Gradients of intermediate results
        are released once consumed; leaf gradients accumulate.
        """
        if loss.data.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        check_finite(loss.data, "loss")
        loss.grad = np.ones_like(loss.data)
        for node in reversed(self.nodes):
            out_grads = [o.grad for o in node.outputs]
            if all(g is None for g in out_grads):
                continue
            out_grads = [
                np.zeros_like(o.data) if g is None else g
                for o, g in zip(node.outputs, out_grads)
            ]
            for o in node.outputs:
                o.grad = None
            in_grads = node.backward(*out_grads)
            for t, g in zip(node.inputs, in_grads):
                if g is None or not t.requires_grad:
                    continue
                check_finite(g, f"backward of {node.op}")
                t.grad = g if t.grad is None else t.grad + g
        self.nodes = []


def active_tape():
    return _ACTIVE[-1] if _ACTIVE else None


def record(op, out_data, inputs, backward):
    """Wrap forward result(s) of a primitive and record them if needed.

    ``out_data`` is one array or a tuple of arrays. ``backward`` receives one
    gradient per output and returns one gradient (or None) per input.
    """
    multi = isinstance(out_data, tuple)
    arrays = out_data if multi else (out_data,)
    for a in arrays:
        check_finite(a, op)
    tape = active_tape()
    needs = tape is not None and any(t.requires_grad for t in inputs)
    outputs = tuple(Tensor(a, requires_grad=needs) for a in arrays)
    if needs:
        tape.nodes.append(_Node(outputs, tuple(inputs), backward, op))
    return outputs if multi else outputs[0]
