"""Desk-scale end-to-end run: the mini model on a synthetic snapshot dataset."""

from __future__ import annotations

import time

import numpy as np

from ..data import CompressorSettings, build_dataset, snapshot_settings
from ..losses import SpectralConfig
from ..trainer import TbpttPlan, TrainConfig, build_models, train, training_items, validate_st

__all__ = ["DESK", "desk_settings", "run_desk"]

DESK = {
    "preset": "mini",
    "threshold": -12.0,
    "ratio": 4.0,
    "attack": 0.01,
    "release": 0.3,
    "n_items": 8,
    "n_val": 2,
    "N": 2,
    "B": 4,
    "L": 4096,
    "lr": 5e-4,
    "eval_every": 800,
    "max_seconds": 1560.0,
    "precision": "single",
    "use_spn": True,
    "seed": 0,
}


def desk_settings(cfg=DESK):
    base = snapshot_settings().to_dict()
    base.update({k: float(cfg[k]) for k in ("threshold", "ratio", "attack", "release")})
    return CompressorSettings(**base)


def run_desk(log=None, checkpoint_path=None, **overrides):
    """Train the desk configuration once.

    Returns a dict with the :class:`RunRecord` (``record``), the ST combined
    loss of the untrained model (``initial_loss``), the ST loss of the
    restored best model (``final_loss``), the lowest streamed item ESR over
    all evaluations (``best_st_esr``) and the process CPU time.
    """
    cfg = {**DESK, **overrides}
    t0 = time.process_time()
    ds = build_dataset("snapshot", seed=cfg["seed"], settings=desk_settings(cfg), n_items=cfg["n_items"])
    items = training_items(ds)
    train_items, val_items = items[: -cfg["n_val"]], items[-cfg["n_val"] :]
    model, spn = build_models(cfg["preset"], cfg["L"], cfg["precision"], cfg["seed"], cfg["use_spn"])
    plan = TbpttPlan.for_models(model, spn, cfg["N"], cfg["B"], cfg["L"])
    spectral = SpectralConfig()
    initial = validate_st(model, spn, val_items, plan, spectral, model.dtype)
    config = TrainConfig(
        N=cfg["N"], B=cfg["B"], L=cfg["L"], lr=cfg["lr"], patience=10**6 - 1, precision=cfg["precision"],
        seed=cfg["seed"], eval_every=cfg["eval_every"], max_seconds=cfg["max_seconds"],
    )
    record = train(model, spn, train_items, val_items, config, run_id="desk", log=log,
                   checkpoint_path=checkpoint_path, spectral=spectral)
    esrs = [e["st"]["item_esr"] for e in record.evaluations]
    return {
        "record": record,
        "initial": initial,
        "initial_loss": initial["total"],
        "final_loss": record.best_st_loss,
        "best_st_esr": float(np.min(esrs)) if esrs else float("nan"),
        "cpu_seconds": time.process_time() - t0,
        "config": cfg,
    }
