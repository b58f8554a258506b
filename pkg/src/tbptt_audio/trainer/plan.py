"""Sequence geometry of truncated backpropagation through time.

A long window of ``long_len`` samples is cut into ``N`` consecutive
sub-sequences. The first one is long enough for the state predictor's
lookback plus a padding-free processor pass; the others are ``L`` samples
each and run on cached context.
"""

from __future__ import annotations

import warnings
from collections.abc import Sequence
from dataclasses import asdict, dataclass

import numpy as np

__all__ = ["TbpttPlan", "BatchGroup", "plan_batches", "window_starts", "make_group", "EpochSchedule",
           "ShortItemWarning"]


class ShortItemWarning(UserWarning):
    """An item cannot hold a single long window and was skipped."""


@dataclass(frozen=True)
class TbpttPlan:
    N: int
    B: int
    L: int
    L_nopad: int
    L_lookback: int

    def __post_init__(self):
        for name in ("N", "B", "L", "L_nopad"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.L_lookback < 0:
            raise ValueError(f"L_lookback must be >= 0, got {self.L_lookback}")
        if self.L_nopad < self.L:
            raise ValueError(f"L_nopad ({self.L_nopad}) < L ({self.L})")

    @property
    def L_c(self):
        return self.N * self.L

    @property
    def L_in0(self):
        return self.L + max(self.L_nopad - self.L, self.L_lookback)

    @property
    def long_len(self):
        return self.L_in0 + (self.N - 1) * self.L

    @property
    def step(self):
        return self.L_c

    def sub_lengths(self):
        return (self.L_in0,) + (self.L,) * (self.N - 1)

    def bounds(self):
        """``(start, stop)`` of every sub-sequence inside a long window."""
        out, pos = [], 0
        for n in self.sub_lengths():
            out.append((pos, pos + n))
            pos += n
        return out

    def to_dict(self):
        d = asdict(self)
        d.update(L_c=self.L_c, L_in0=self.L_in0, long_len=self.long_len, step=self.step)
        return d

    @classmethod
    def for_models(cls, model, spn, N, B, L):
        """Plan for a processor whose output length is already ``L``."""
        if model.plan.L_out != L:
            raise ValueError(f"model produces {model.plan.L_out} samples per pass, plan wants {L}")
        return cls(N, B, L, model.L_nopad, spn.lookback if spn is not None else 0)


@dataclass
class BatchGroup:
    """``B`` long windows sliced into ``N`` sub-batches.

    ``inputs[k]`` and ``targets[k]`` are ``(B, len_k)`` arrays; ``controls``
    is ``(B, num_controls)``; ``windows`` lists ``(item index, start)``.
    """

    inputs: list
    targets: list
    controls: np.ndarray
    windows: list

    @property
    def N(self):
        return len(self.inputs)

    @property
    def lengths(self):
        return tuple(x.shape[1] for x in self.inputs)


def window_starts(length, plan):
    if length < plan.long_len:
        return []
    return list(range(0, length - plan.long_len + 1, plan.step))


def make_group(items, windows, plan, dtype=np.float32):
    """Materialize the long windows ``[(item index, start), ...]`` as a group."""
    xs = [[] for _ in range(plan.N)]
    ys = [[] for _ in range(plan.N)]
    ctrl = []
    for i, s in windows:
        x, y, c = items[i]
        for k, (a, b) in enumerate(plan.bounds()):
            xs[k].append(x[s + a : s + b])
            ys[k].append(y[s + a : s + b])
        ctrl.append(c)
    return BatchGroup(
        [np.stack(v).astype(dtype) for v in xs],
        [np.stack(v).astype(dtype) for v in ys],
        np.asarray(ctrl, dtype=dtype),
        list(windows),
    )


def plan_batches(items, plan, epoch_seed, dtype=np.float32, shuffle=True):
    """Epoch schedule: a sequence of :class:`BatchGroup`.

    ``items`` is a sequence of ``(input, target, controls)`` arrays. Long
    windows are taken every ``plan.step`` samples, shuffled with
    ``epoch_seed`` and grouped ``B`` at a time; an incomplete last batch is
    dropped. Items shorter than ``plan.long_len`` are skipped with a
    :class:`ShortItemWarning`.
    """
    windows = []
    for i, (x, y, _) in enumerate(items):
        if len(x) != len(y):
            raise ValueError(f"item {i}: input and target lengths differ")
        starts = window_starts(len(x), plan)
        if not starts:
            warnings.warn(
                f"item {i} has {len(x)} samples, fewer than one window of {plan.long_len}",
                ShortItemWarning,
                stacklevel=2,
            )
        windows += [(i, s) for s in starts]
    if shuffle:
        order = np.random.default_rng(epoch_seed).permutation(len(windows))
        windows = [windows[j] for j in order]
    n_groups = len(windows) // plan.B
    return EpochSchedule(items, [windows[g * plan.B : (g + 1) * plan.B] for g in range(n_groups)], plan, dtype)


class EpochSchedule(Sequence):
    """Batch groups of one epoch, materialized on access."""

    def __init__(self, items, batches, plan, dtype):
        self.items = items
        self.batches = batches
        self.plan = plan
        self.dtype = dtype

    def __len__(self):
        return len(self.batches)

    def __getitem__(self, g):
        if isinstance(g, slice):
            return [self[i] for i in range(*g.indices(len(self)))]
        return make_group(self.items, self.batches[g], self.plan, self.dtype)
