"""Command line entry point: ``tbptt-audio <verb> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .autodiff import load_checkpoint
from .data import (
    SPLIT_COUNTS,
    build_dataset,
    load_dataset,
    make_splits,
    read_wav,
    save_dataset,
    write_wav,
)
from .experiment import DESK, GridSpec, aggregate, emit_tables, read_records, run_desk, run_grid
from .model import PRESETS, SPTMod, SptmodConfig, preset, solve_lengths, spn_lookback
from .trainer import TrainConfig, training_items

PRESET_CHOICES = sorted(PRESETS)
DATASET_CHOICES = ("snapshot", "threshold-ratio", "full")


def _split_counts(n_items, text):
    if text:
        return tuple(int(v) for v in text.split(","))
    if n_items in SPLIT_COUNTS:
        return SPLIT_COUNTS[n_items]
    val = max(1, n_items // 8)
    return (n_items - 2 * val, val, val)


def _add_dataset_args(p):
    p.add_argument("--dataset", choices=DATASET_CHOICES, default="snapshot")
    p.add_argument("--manifest", type=Path, help="load a dataset written by generate-dataset instead")
    p.add_argument("--items", type=int, help="use only the first ITEMS items")
    p.add_argument("--duration", type=float, help="truncate every item to DURATION seconds")
    p.add_argument("--split-counts", help="train,validation,test sizes (default by item count)")


def _add_train_args(p):
    p.add_argument("--preset", choices=PRESET_CHOICES, default="sptmod24")
    p.add_argument("--precision", choices=("single", "double"), default="single")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--lr", type=float, default=5e-4)
    p.add_argument("--patience", type=int, default=76800)
    p.add_argument("--max-iterations", type=int, default=1_000_000)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--max-seconds", type=float)
    p.add_argument("--eval-every", type=int)
    p.add_argument("--no-spn", action="store_true", help="train without the state predictor")


def _dataset(args):
    """``(items, ids, splits)`` for train/grid."""
    if args.manifest is not None:
        loaded, manifest = load_dataset(args.manifest)
        if args.items:
            loaded = loaded[: args.items]
        ids = [it.id for it in loaded]
        items = training_items(loaded)
        seed = manifest["seed"]
    else:
        ds = build_dataset(args.dataset, seed=args.seed, n_items=args.items, duration=args.duration, cache=False)
        ids = ds.ids
        items = training_items(ds[i] for i in range(len(ds)))
        seed = args.seed
    splits = make_splits(ids, _split_counts(len(ids), args.split_counts), seed=seed)
    return items, ids, splits


def _base_config(args):
    return TrainConfig(
        lr=args.lr, patience=args.patience, max_iterations=args.max_iterations, precision=args.precision,
        seed=args.seed, eval_every=args.eval_every, max_epochs=args.max_epochs, max_seconds=args.max_seconds,
    )


def cmd_generate_dataset(args):
    ds = build_dataset(args.dataset, seed=args.seed, n_items=args.items, duration=args.duration, cache=False)
    splits = make_splits(ds.ids, _split_counts(len(ds), args.split_counts), seed=args.seed, n_splits=args.splits)
    path = save_dataset(ds, args.out, splits)
    print(f"wrote {len(ds)} items to {path}")


def cmd_solve_lengths(args):
    cfg = preset(args.preset)
    out = {
        "preset": args.preset,
        "L_lookback": spn_lookback(cfg.spn),
        "plans": [solve_lengths(cfg, l).to_dict() for l in args.l or [4096]],
    }
    print(json.dumps(out, indent=2))


def _grid(args, n_values, b_values, l_values, n_splits, excluded=()):
    items, ids, splits = _dataset(args)
    spec = GridSpec(n_values, b_values, l_values, excluded=list(excluded), splits=list(range(n_splits)))
    args.out.mkdir(parents=True, exist_ok=True)
    records = run_grid(spec, preset(args.preset), items, ids, splits, _base_config(args), args.out,
                       seed=args.seed, use_spn=not args.no_spn)
    stats, notes = aggregate(records)
    emit_tables(stats, args.out / "tables", n_values, b_values, l_values, notes=notes)
    (args.out / "grid.json").write_text(json.dumps({"grid": spec.to_dict(), "splits": splits.to_dict()}, indent=2))
    for r in records:
        print(f"{r.run_id}: {r.status} best_st_loss={r.best_st_loss} iterations={r.iterations}")
    return records


def cmd_train(args):
    items, ids, splits = _dataset(args)
    spec = GridSpec([args.n], [args.b], [args.l], splits=[args.split])
    args.out.mkdir(parents=True, exist_ok=True)
    for r in run_grid(spec, preset(args.preset), items, ids, splits, _base_config(args), args.out,
                      seed=args.seed, use_spn=not args.no_spn):
        print(f"{r.run_id}: {r.status} best_st_loss={r.best_st_loss} iterations={r.iterations}")


def _pair(text):
    b, l = text.split(":")
    return (int(b), int(l))


def cmd_grid(args):
    _grid(args, args.n or [1], args.b or [8], args.l or [4096], args.splits, [_pair(e) for e in args.exclude])


def cmd_aggregate(args):
    records = read_records(args.records)
    stats, notes = aggregate(records)
    paths = emit_tables(stats, args.out, notes=notes)
    for note in notes:
        print(note)
    print("\n".join(str(p) for p in paths))


def cmd_desk(args):
    overrides = {k: v for k, v in (("max_seconds", args.max_seconds), ("lr", args.lr),
                                   ("eval_every", args.eval_every), ("seed", args.seed)) if v is not None}
    if args.no_spn:
        overrides["use_spn"] = False
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "train_log.jsonl", "w") as log:
        result = run_desk(log=log, checkpoint_path=args.out / "checkpoint", **overrides)
    rec = result.pop("record")
    (args.out / "record.json").write_text(rec.to_json())
    summary = {k: result[k] for k in ("initial_loss", "final_loss", "best_st_esr", "cpu_seconds", "config")}
    (args.out / "summary.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps({k: v for k, v in summary.items() if k != "config"}, indent=2))


def load_model(checkpoint):
    state, meta = load_checkpoint(checkpoint)
    config = SptmodConfig.from_dict(meta["model_config"])
    dtype = np.float32 if meta.get("precision", "single") == "single" else np.float64
    model = SPTMod(config, meta["L"], dtype=dtype)
    model.load_state_dict({k[len("model.") :]: v for k, v in state.items() if k.startswith("model.")})
    return model, meta


def cmd_infer(args):
    model, meta = load_model(args.checkpoint)
    audio = read_wav(args.input)
    controls = None
    if model.config.num_controls:
        if args.controls is None:
            raise SystemExit(f"this model needs --controls with {model.config.num_controls} values in [0, 1]")
        controls = np.array([float(v) for v in args.controls.split(",")])[None, :]
    y, _ = model.stream(audio.samples, controls, chunk=args.chunk or meta["L"])
    write_wav(args.output, y[0], audio.sample_rate)
    print(f"wrote {y.shape[1]} samples to {args.output} (first {model.L_nopad - meta['L']} input samples used as warm-up)")


def build_parser():
    parser = argparse.ArgumentParser(prog="tbptt-audio", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("generate-dataset", help="render a synthetic dataset to WAV files and a manifest")
    p.add_argument("--dataset", choices=DATASET_CHOICES, default="snapshot")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--items", type=int)
    p.add_argument("--duration", type=float)
    p.add_argument("--splits", type=int, default=10)
    p.add_argument("--split-counts")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_generate_dataset)

    p = sub.add_parser("solve-lengths", help="print the length plan of a preset")
    p.add_argument("--preset", choices=PRESET_CHOICES, default="sptmod24")
    p.add_argument("--l", type=int, action="append")
    p.set_defaults(func=cmd_solve_lengths)

    p = sub.add_parser("train", help="train one model on one split")
    _add_dataset_args(p)
    _add_train_args(p)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--b", type=int, default=8)
    p.add_argument("--l", type=int, default=4096)
    p.add_argument("--split", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grid", help="sweep N x B x L over several splits")
    _add_dataset_args(p)
    _add_train_args(p)
    p.add_argument("--n", type=int, action="append")
    p.add_argument("--b", type=int, action="append")
    p.add_argument("--l", type=int, action="append")
    p.add_argument("--splits", type=int, default=10, help="number of splits to run")
    p.add_argument("--exclude", action="append", default=[], metavar="B:L")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("desk", help="desk-scale run: mini model on a synthetic snapshot dataset")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--max-seconds", type=float, help=f"training time budget (default {DESK['max_seconds']:g})")
    p.add_argument("--lr", type=float)
    p.add_argument("--eval-every", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--no-spn", action="store_true")
    p.set_defaults(func=cmd_desk)

    p = sub.add_parser("aggregate", help="median/MAD/time tables from records.jsonl")
    p.add_argument("--records", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("infer", help="stream a WAV file through a checkpoint")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--output", type=Path, required=True)
    p.add_argument("--controls", help="comma-separated normalized controls")
    p.add_argument("--chunk", type=int)
    p.set_defaults(func=cmd_infer)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
