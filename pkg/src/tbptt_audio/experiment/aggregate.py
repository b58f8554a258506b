"""Per-cell statistics over runs and their table layout."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

__all__ = [
    "CellStats",
    "median",
    "mad",
    "aggregate",
    "estimate_train_time",
    "emit_tables",
    "read_table",
    "TABLE_KINDS",
]

TABLE_KINDS = ("median", "mad", "hours")


def median(values):
    """Sort-based median; the mean of the two central values for even counts."""
    v = sorted(float(x) for x in values)
    if not v:
        raise ValueError("median of an empty sequence")
    n = len(v)
    mid = n // 2
    return v[mid] if n % 2 else (v[mid - 1] + v[mid]) / 2


def mad(values):
    """Median absolute deviation from the median."""
    m = median(values)
    return median(abs(float(x) - m) for x in values)


@dataclass
class CellStats:
    N: int
    B: int
    L: int
    median_loss: float
    mad_loss: float
    median_train_hours: float
    runs: int
    run_ids: list

    @property
    def L_c(self):
        return self.N * self.L

    def to_dict(self):
        d = asdict(self)
        d["L_c"] = self.L_c
        return d


def estimate_train_time(record, sec_per_iter=None):
    """Hours to reach the minimum ST loss within a 5 % margin.

    Uses the first evaluation whose ST loss is at most 1.05 times the best
    one. ``sec_per_iter`` defaults to the run's own measured value.
    """
    traj = record.st_trajectory()
    if not traj:
        return None
    sec = record.seconds_per_iteration if sec_per_iter is None else sec_per_iter
    if sec is None:
        return None
    best = min(loss for _, loss in traj)
    for iteration, loss in traj:
        if loss <= 1.05 * best:
            return iteration * sec / 3600.0


def aggregate(records, sec_per_iter=None):
    """``({(N, B, L): CellStats}, notes)`` over completed runs.

    ``sec_per_iter`` may be a number or a ``{(N, B, L): seconds}`` mapping
    from a calibration pass; by default each run's own timing is used.
    """
    cells = {}
    for r in records:
        key = (r.config["N"], r.config["B"], r.config["L"])
        cells.setdefault(key, []).append(r)
    stats, notes = {}, []
    for key in sorted(cells):
        done = [r for r in cells[key] if r.status == "completed" and r.best_st_loss is not None]
        failed = len(cells[key]) - len(done)
        if failed:
            notes.append(f"N={key[0]} B={key[1]} L={key[2]}: {failed} run(s) failed")
        if not done:
            notes.append(f"N={key[0]} B={key[1]} L={key[2]}: omitted, no completed run")
            continue
        sec = sec_per_iter.get(key) if isinstance(sec_per_iter, dict) else sec_per_iter
        losses = [r.best_st_loss for r in done]
        hours = [h for h in (estimate_train_time(r, sec) for r in done) if h is not None]
        stats[key] = CellStats(
            *key,
            median_loss=median(losses),
            mad_loss=mad(losses),
            median_train_hours=median(hours) if hours else None,
            runs=len(done),
            run_ids=[r.run_id for r in done],
        )
    return stats, notes


_FIELDS = {"median": "median_loss", "mad": "mad_loss", "hours": "median_train_hours"}


def _fmt(v):
    return "" if v is None else repr(float(v))


def emit_tables(stats, out_dir, N_values=None, B_values=None, L_values=None, fmt="csv", notes=()):
    """Write one table per ``N`` and statistic, plus a JSON index.

    CSV layout: the first row holds the ``L`` values (ascending), the second
    the matching ``L_c = N L``; then one row per ``B`` (ascending). Missing
    cells (excluded or without completed runs) are left blank. The JSON
    index maps every cell to the runs behind it. Returns written paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    Ns = sorted(set(N_values or (k[0] for k in stats)))
    Bs = sorted(set(B_values or (k[1] for k in stats)))
    Ls = sorted(set(L_values or (k[2] for k in stats)))
    written = []
    if fmt == "csv":
        for n in Ns:
            for kind in TABLE_KINDS:
                path = out / f"{kind}_N{n}.csv"
                with open(path, "w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow(["L"] + [str(l) for l in Ls])
                    w.writerow(["B\\L_c"] + [str(n * l) for l in Ls])
                    for b in Bs:
                        row = [str(b)]
                        for l in Ls:
                            cell = stats.get((n, b, l))
                            row.append(_fmt(getattr(cell, _FIELDS[kind])) if cell else "")
                        w.writerow(row)
                written.append(path)
    elif fmt != "json":
        raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")
    index = {
        "N_values": Ns,
        "B_values": Bs,
        "L_values": Ls,
        "cells": [stats[k].to_dict() for k in sorted(stats)],
        "notes": list(notes),
    }
    path = out / "tables.json"
    path.write_text(json.dumps(index, indent=2))
    written.append(path)
    return written


def read_table(path):
    """Parse an emitted CSV back into ``{(B, L): value}`` (blank cells skipped)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    Ls = [int(v) for v in rows[0][1:]]
    out = {}
    for row in rows[2:]:
        b = int(row[0])
        for l, v in zip(Ls, row[1:]):
            if v != "":
                out[(b, l)] = float(v)
    return out
