"""Cartesian sweeps over (N, B, L) repeated across cross-validation splits."""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..autodiff import Tape
from ..losses import SpectralConfig, combined_loss
from ..trainer import RunRecord, TbpttPlan, TrainConfig, build_models, train

__all__ = ["GridSpec", "run_grid", "run_id", "run_seed", "calibrate_seconds_per_iteration", "read_records"]


@dataclass
class GridSpec:
    """Sweep definition.

    ``excluded`` holds ``(B, L)`` pairs (skipped for every ``N``) or
    ``(N, B, L)`` triples. ``splits`` lists the split indices to run.
    """

    N_values: list
    B_values: list
    L_values: list
    excluded: list = field(default_factory=list)
    splits: list = field(default_factory=lambda: list(range(10)))
    seeds_per_cell: int = 1

    def is_excluded(self, n, b, l):
        for e in self.excluded:
            e = tuple(e)
            if e == (b, l) or e == (n, b, l):
                return True
        return False

    def cells(self):
        return [
            (n, b, l)
            for n, b, l in itertools.product(sorted(self.N_values), sorted(self.B_values), sorted(self.L_values))
            if not self.is_excluded(n, b, l)
        ]

    def to_dict(self):
        return {
            "N_values": list(self.N_values),
            "B_values": list(self.B_values),
            "L_values": list(self.L_values),
            "excluded": [list(e) for e in self.excluded],
            "splits": list(self.splits),
            "seeds_per_cell": self.seeds_per_cell,
        }


def run_id(n, b, l, split, repeat=0):
    tag = f"N{n}-B{b}-L{l}-split{split}"
    return tag if repeat == 0 else f"{tag}-rep{repeat}"


def run_seed(seed, n, b, l, split, repeat=0):
    """Seed of one run; depends only on its own coordinates."""
    return int(np.random.SeedSequence([seed, n, b, l, split, repeat]).generate_state(1)[0] % (2**31))


def _subset(items, ids, id_list):
    index = {item_id: i for i, item_id in enumerate(ids)}
    return [items[index[i]] for i in id_list]


def run_grid(spec, model_config, items, item_ids, splits, base_config=None, out_dir=None, seed=0,
             spectral=None, cells=None, use_spn=True):
    """Train one model per (cell, split, repeat); returns the RunRecords.

    ``items`` are ``(input, target, controls)`` arrays named by ``item_ids``;
    ``splits`` is a :class:`SplitSet`. With ``out_dir`` every record is
    appended to ``records.jsonl`` as soon as its run ends and best weights go
    to ``checkpoints/``. Exceptions inside a run produce a failed record and
    the sweep continues. ``cells`` overrides the execution order.
    """
    base = base_config or TrainConfig()
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        (out / "checkpoints").mkdir(parents=True, exist_ok=True)
    records = []
    for n, b, l in cells or spec.cells():
        for split in spec.splits:
            train_ids, val_ids, _ = splits[split]
            tr = _subset(items, item_ids, train_ids)
            va = _subset(items, item_ids, val_ids)
            for rep in range(spec.seeds_per_cell):
                rid = run_id(n, b, l, split, rep)
                rseed = run_seed(seed, n, b, l, split, rep)
                cfg = replace(base, N=n, B=b, L=l, seed=rseed)
                log = open(out / "train_log.jsonl", "a") if out is not None else None
                try:
                    model, spn = build_models(model_config, l, cfg.precision, rseed, use_spn)
                    ckpt = out / "checkpoints" / rid if out is not None else None
                    rec = train(model, spn, tr, va, cfg, run_id=rid, log=log, checkpoint_path=ckpt,
                                spectral=spectral)
                except Exception as exc:  # a broken cell must not stop the sweep
                    rec = RunRecord(rid, cfg.to_dict(), {}, status="failed", error=f"{type(exc).__name__}: {exc}")
                finally:
                    if log is not None:
                        log.close()
                rec.meta.update(split=split, repeat=rep, cell=[n, b, l])
                records.append(rec)
                if out is not None:
                    with open(out / "records.jsonl", "a") as fh:
                        fh.write(rec.to_json() + "\n")
    return records


def read_records(path):
    with open(path) as fh:
        return [RunRecord.from_dict(json.loads(line)) for line in fh if line.strip()]


def calibrate_seconds_per_iteration(model_config, n, b, l, iterations=20, precision="single", seed=0,
                                    spectral=None, use_spn=True):
    """Median wall time of one training iteration on random data.

    Runs ``iterations`` forward/backward passes of the cached sub-sequence
    shape (the warm-start pass is timed separately and weighted by ``1/N``).
    """
    model, spn = build_models(model_config, l, precision, seed, use_spn)
    plan = TbpttPlan.for_models(model, spn, n, b, l)
    rng = np.random.default_rng(seed)
    dtype = model.dtype
    x = (0.1 * rng.standard_normal((b, plan.L_in0 + l))).astype(dtype)
    c = rng.random((b, model.config.num_controls)).astype(dtype) if model.config.num_controls else None
    spectral = spectral or SpectralConfig()
    params = model.parameters() + (spn.parameters() if spn is not None else [])

    def timed(fn):
        t0 = time.perf_counter()
        with Tape() as tape:
            loss = fn()
        tape.backward(loss.tensor)
        for p in params:
            p.grad = None
        return time.perf_counter() - t0

    def first():
        ctx = spn.predict(x[:, : plan.L_lookback], x[:, : plan.L_lookback], c) if spn is not None else None
        y, _ = model.forward(x[:, plan.L_in0 - plan.L_nopad : plan.L_in0], c, ctx, mode="nopad")
        return combined_loss(x[:, plan.L_in0 - l : plan.L_in0], y, spectral)

    _, ctx = model.forward(x[:, plan.L_in0 - plan.L_nopad : plan.L_in0], c, mode="nopad")
    ctx = ctx.detach()

    def cached():
        y, _ = model.forward(x[:, plan.L_in0 :], c, ctx, mode="cached")
        return combined_loss(x[:, plan.L_in0 :], y, spectral)

    t_first = float(np.median([timed(first) for _ in range(max(1, iterations // n))]))
    t_cached = float(np.median([timed(cached) for _ in range(iterations)])) if n > 1 else 0.0
    return (t_first + (n - 1) * t_cached) / n
