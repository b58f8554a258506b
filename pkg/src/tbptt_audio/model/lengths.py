"""Padding-free length planning.

In a pass without padding every temporal op shortens its input, so the
input must be longer than the output and some tensors must be left-cropped
to line up. Within modulation block ``j`` (input length ``M_j``):

* the convolution leaves ``M_j - span_j`` samples;
* ``c_j`` leading samples are cropped so the pooled stretch ``V_j`` is a
  whole number of ``P_j``-sample frames;
* the recurrent modulation lags two frames, so it covers the last
  ``T_j = V_j - 2 P_j`` samples; ``T_j`` is also the length handed to the
  next block;
* the audio path and the block's gain are cropped to their common length.

The output is finally cropped to ``L_out``. Crops are always removed from
the left so the most recent samples line up.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

__all__ = [
    "ConfigurationError",
    "LengthPlan",
    "solve_lengths",
    "spn_lookback",
    "spn_lengths",
    "tfilm_lag",
]


class ConfigurationError(ValueError):
    """No padding-free plan exists within the search bound."""


def tfilm_lag(pool):
    """Samples consumed by the two-frame lag of the recurrent modulation."""
    return 2 * pool


@dataclass(frozen=True)
class LengthPlan:
    """Lengths and left crops for one padding-free forward pass.

    ``crops`` maps site names (``"block0.pool"``, ``"block0.audio"``,
    ``"block0.gain"``, ..., ``"output"``) to the number of leading samples
    removed there. ``tfilm_lengths[j]`` is ``T_j``; ``pooled_lengths[j]`` is
    the number of frames block ``j`` pools.
    """

    L_out: int
    L_nopad: int
    crops: dict
    pooled_lengths: tuple
    tfilm_lengths: tuple

    @property
    def total_crop(self):
        return sum(self.crops.values())

    def crop_vector(self):
        return tuple(self.crops.values())

    def to_dict(self):
        d = asdict(self)
        d["pooled_lengths"] = list(self.pooled_lengths)
        d["tfilm_lengths"] = list(self.tfilm_lengths)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            L_out=d["L_out"],
            L_nopad=d["L_nopad"],
            crops=dict(d["crops"]),
            pooled_lengths=tuple(d["pooled_lengths"]),
            tfilm_lengths=tuple(d["tfilm_lengths"]),
        )


def _round_up(value, multiple):
    return -(-value // multiple) * multiple


def plan_from_tfilm_lengths(blocks, L_out, tfilm_lengths):
    """Build the plan implied by a choice of ``T_j``; None if infeasible."""
    t = list(tfilm_lengths)
    crops = {}
    for j, b in enumerate(blocks):
        if t[j] % b.pool or t[j] < L_out:
            return None
    x = t[0] + tfilm_lag(blocks[0].pool) + blocks[0].span
    audio = x
    for j, b in enumerate(blocks):
        m_in = x if j == 0 else t[j - 1]
        c = m_in - b.span - (t[j] + tfilm_lag(b.pool))
        if c < 0:
            return None
        common = min(audio, t[j])
        crops[f"block{j}.pool"] = c
        crops[f"block{j}.audio"] = audio - common
        crops[f"block{j}.gain"] = t[j] - common
        audio = common
    crops["output"] = audio - L_out
    pooled = tuple(t[j] // b.pool + 2 for j, b in enumerate(blocks))
    return LengthPlan(L_out, x, crops, pooled, tuple(t))


def _key(plan):
    return (plan.total_crop, plan.L_nopad, plan.tfilm_lengths)


def solve_lengths(config, L_out, max_extra=None):
    """Minimal-crop plan producing exactly ``L_out`` output samples.

    Plans are ranked by total crop, then input length, then the per-block
    lengths ``T_j`` (smaller first). Given the last block's ``T``, choosing
    every earlier ``T`` as small as the constraints allow is optimal (the
    total crop grows with ``T_0``), so
    the search walks the last block's ``T`` upward and stops once a lower
    bound on the total crop exceeds the best plan found.
    """
    blocks = config.blocks if hasattr(config, "blocks") else tuple(config)
    if L_out < 1:
        raise ValueError(f"L_out must be >= 1, got {L_out}")
    last = blocks[-1]
    if max_extra is None:
        max_extra = 64 * max(b.pool for b in blocks) + L_out
    # Spans that separate T_{j-1} from T_j, independent of rounding.
    gaps = [0] + [b.span + tfilm_lag(b.pool) for b in blocks[1:]]
    best = None
    t_last = _round_up(L_out, last.pool)
    while t_last <= _round_up(L_out, last.pool) + max_extra:
        t = [0] * len(blocks)
        t[-1] = t_last
        for j in range(len(blocks) - 1, 0, -1):
            t[j - 1] = _round_up(max(t[j] + gaps[j], L_out), blocks[j - 1].pool)
        plan = plan_from_tfilm_lengths(blocks, L_out, t)
        if plan is not None and (best is None or _key(plan) < _key(best)):
            best = plan
        # total = 2*T_0 - T_last - sum(gaps) + lag_0 + span_0 - L_out
        # and T_0 >= T_last + sum(gaps), so this bound grows with T_last.
        if best is not None:
            bound = t_last + sum(gaps) + tfilm_lag(blocks[0].pool) + blocks[0].span - L_out
            if bound > best.total_crop:
                break
        t_last += last.pool
    if best is None:
        raise ConfigurationError(f"no padding-free plan for L_out={L_out} within the search bound")
    return best


def spn_lengths(config):
    """Per-block input lengths of the state predictor, ending at one frame."""
    lengths = [1]
    for _ in range(config.num_blocks):
        lengths.append(lengths[-1] * config.pool + config.kernel - 1)
    return lengths[::-1]


def spn_lookback(config):
    """Input length the state predictor reduces to exactly one frame."""
    return spn_lengths(config)[0]
