"""TBPTT training loop, WT/ST validation and early stopping."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..autodiff import NonFiniteError, Tape, save_checkpoint
from ..losses import SpectralConfig, combined_loss
from ..model import SPN, SPTMod, preset
from .optim import Adam
from .plan import TbpttPlan, make_group, plan_batches, window_starts

__all__ = [
    "PRECISIONS",
    "TrainConfig",
    "RunRecord",
    "build_models",
    "training_items",
    "tbptt_group_step",
    "validate",
    "validate_wt",
    "validate_st",
    "train",
]

PRECISIONS = {"single": np.float32, "double": np.float64}


@dataclass
class TrainConfig:
    """Optimization settings of one run.

    ``patience`` and ``max_iterations`` count weight updates. ``eval_every``
    validates every that many updates (rounded up to whole groups) instead of
    once per epoch; ``max_epochs`` and ``max_seconds`` are extra budgets for
    desk-scale runs.
    """

    N: int = 1
    B: int = 8
    L: int = 4096
    lr: float = 5e-4
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    patience: int = 76800
    max_iterations: int = 1_000_000
    precision: str = "single"
    seed: int = 0
    eval_every: int = None
    max_epochs: int = None
    max_seconds: float = None

    def __post_init__(self):
        if self.patience >= self.max_iterations:
            raise ValueError("patience must be smaller than the iteration cap")
        if self.precision not in PRECISIONS:
            raise ValueError(f"precision must be one of {sorted(PRECISIONS)}, got {self.precision!r}")
        self.betas = tuple(self.betas)

    @property
    def dtype(self):
        return PRECISIONS[self.precision]

    def to_dict(self):
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d


@dataclass
class RunRecord:
    run_id: str
    config: dict
    plan: dict
    status: str = "running"
    error: str = None
    iterations: int = 0
    train_losses: list = field(default_factory=list)
    evaluations: list = field(default_factory=list)
    best_iteration: int = None
    best_st_loss: float = None
    best_st_esr: float = None
    best_wt_loss: float = None
    seconds_per_iteration: float = None
    wall_seconds: float = None
    checkpoint: str = None
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def st_trajectory(self):
        return [(e["iteration"], e["st"]["total"]) for e in self.evaluations]


def build_models(model_config, L, precision="single", seed=0, use_spn=True):
    """Processor with output length ``L`` plus its state predictor."""
    if isinstance(model_config, str):
        model_config = preset(model_config)
    dtype = PRECISIONS[precision]
    model = SPTMod(model_config, L, seed=seed, dtype=dtype)
    spn = SPN(model_config, seed=seed + 1, dtype=dtype) if use_spn else None
    return model, spn


def training_items(dataset_items):
    """``(input, target, controls)`` arrays from :class:`DatasetItem` objects."""
    return [(it.input.samples, it.target.samples, it.controls.array()) for it in dataset_items]


def _controls(model, c):
    return c if model.config.num_controls else None


def _initial_context(spn, x, y, controls, plan):
    if spn is None:
        return None
    lb = plan.L_lookback
    return spn.predict(x[:, :lb], y[:, :lb], controls)


def _first_pass(model, spn, x, y, controls, plan):
    """SPN on the first ``L_lookback`` samples, processor on the last ``L_nopad``."""
    ctx = _initial_context(spn, x, y, controls, plan)
    return model.forward(x[:, x.shape[1] - plan.L_nopad :], _controls(model, controls), ctx, mode="nopad")


def tbptt_group_step(model, spn, group, optimizer, plan, spectral=None, on_gradients=None):
    """Train on one batch group: ``N`` forward/backward/update iterations.

    After every update the context is value-copied without history, so the
    next iteration's gradient stops at the carried states and caches. The
    context is dropped at the end of the group. ``on_gradients(k, ctx_in,
    grads)`` is called before each update with the context the iteration
    started from and a copy of the parameter gradients.
    """
    params = optimizer.params
    losses = []
    ctx = None
    for k in range(group.N):
        x, y = group.inputs[k], group.targets[k]
        c = group.controls
        with Tape() as tape:
            if k == 0:
                out, new_ctx = _first_pass(model, spn, x, y, c, plan)
            else:
                out, new_ctx = model.forward(x, _controls(model, c), ctx, mode="cached")
            loss = combined_loss(y[:, y.shape[1] - plan.L :], out, spectral)
        if not np.isfinite(loss.total):
            raise NonFiniteError(f"loss became {loss.total} at sub-sequence {k}")
        optimizer.zero_grad()
        tape.backward(loss.tensor)
        if on_gradients is not None:
            grads = {i: None if p.grad is None else p.grad.copy() for i, p in enumerate(params)}
            on_gradients(k, ctx, grads)
        optimizer.step()
        losses.append(float(loss.total))
        ctx = new_ctx.detach()
    return losses


def _accumulate(acc, breakdown, weight):
    for key, value in breakdown.as_dict().items():
        acc[key] = acc.get(key, 0.0) + weight * float(value)


def _finish(acc, weight):
    return {k: v / weight for k, v in acc.items()} if weight else {}


def validate_wt(model, spn, items, plan, spectral=None, dtype=np.float32):
    """Windowed validation: every long window is warm-started on its own."""
    windows = [(i, s) for i, (x, _, _) in enumerate(items) for s in window_starts(len(x), plan)]
    groups = [make_group(items, windows[g : g + plan.B], plan, dtype) for g in range(0, len(windows), plan.B)]
    acc, weight = {}, 0
    for group in groups:
        ctx = None
        b = group.controls.shape[0]
        for k in range(group.N):
            x, y = group.inputs[k], group.targets[k]
            if k == 0:
                out, ctx = _first_pass(model, spn, x, y, group.controls, plan)
            else:
                out, ctx = model.forward(x, _controls(model, group.controls), ctx, mode="cached")
            _accumulate(acc, combined_loss(y[:, y.shape[1] - plan.L :], out.data, spectral), b)
            weight += b
    return _finish(acc, weight)


def _by_length(items):
    groups = {}
    for i, (x, _, _) in enumerate(items):
        groups.setdefault(len(x), []).append(i)
    return list(groups.values())


def validate_st(model, spn, items, plan, spectral=None, dtype=np.float32):
    """Streaming validation: each item runs start to finish on one context.

    The first ``L_in0`` samples warm-start the stream exactly like the first
    sub-sequence of a training group; the rest is processed in cached
    buffers of ``L`` samples (a trailing partial buffer is not scored).
    Reports the mean loss over buffers and ``item_esr``, the mean over items
    of the error-to-signal ratio of the whole streamed output.
    """
    acc, weight = {}, 0
    item_esr = []
    for idx in _by_length(items):
        length = len(items[idx[0]][0])
        if length < plan.L_in0:
            continue
        x = np.stack([items[i][0] for i in idx]).astype(dtype)
        y = np.stack([items[i][1] for i in idx]).astype(dtype)
        c = np.stack([items[i][2] for i in idx]).astype(dtype)
        b = len(idx)
        pos = plan.L_in0
        out, ctx = _first_pass(model, spn, x[:, :pos], y[:, :pos], c, plan)
        outs = [out.data]
        _accumulate(acc, combined_loss(y[:, pos - plan.L : pos], out.data, spectral), b)
        weight += b
        while pos + plan.L <= length:
            out, ctx = model.forward(x[:, pos : pos + plan.L], _controls(model, c), ctx, mode="cached")
            outs.append(out.data)
            _accumulate(acc, combined_loss(y[:, pos : pos + plan.L], out.data, spectral), b)
            weight += b
            pos += plan.L
        y_hat = np.concatenate(outs, axis=1).astype(np.float64)
        ref = y[:, plan.L_in0 - plan.L : pos].astype(np.float64)
        item_esr += list(np.sum((ref - y_hat) ** 2, axis=1) / np.sum(ref**2, axis=1))
    result = _finish(acc, weight)
    result["item_esr"] = float(np.mean(item_esr)) if item_esr else float("nan")
    return result


def validate(model, spn, items, plan, mode, spectral=None, dtype=np.float32):
    if mode.upper() == "WT":
        return validate_wt(model, spn, items, plan, spectral, dtype)
    if mode.upper() == "ST":
        return validate_st(model, spn, items, plan, spectral, dtype)
    raise ValueError(f"validation mode must be WT or ST, got {mode!r}")


def _snapshot(modules):
    return [{k: v.copy() for k, v in m.state_dict().items()} for m in modules]


def _restore(modules, states):
    for m, s in zip(modules, states):
        m.load_state_dict(s)


def train(model, spn, train_items, val_items, config, run_id="run", log=None,
          checkpoint_path=None, spectral=None):
    """Optimize ``model`` (and ``spn``) with TBPTT; returns a :class:`RunRecord`.

    Validation runs in both WT and ST modes; early stopping and the retained
    weights follow the ST total loss. The best weights are loaded back into
    the models before returning. A non-finite loss or gradient ends the run
    with ``status="failed"``.
    """
    spectral = spectral or SpectralConfig()
    plan = TbpttPlan.for_models(model, spn, config.N, config.B, config.L)
    modules = [m for m in (model, spn) if m is not None]
    params = [p for m in modules for p in m.parameters()]
    optimizer = Adam(params, config.lr, config.betas, config.eps)
    record = RunRecord(run_id, config.to_dict(), plan.to_dict())
    dtype = config.dtype
    best_state = _snapshot(modules)
    step_times = []
    t_start = time.perf_counter()

    def emit(event, **payload):
        if log is not None:
            log.write(json.dumps({"run_id": run_id, "event": event, **payload}, sort_keys=True) + "\n")
            log.flush()

    def evaluate(epoch):
        wt = validate_wt(model, spn, val_items, plan, spectral, dtype)
        st = validate_st(model, spn, val_items, plan, spectral, dtype)
        entry = {"epoch": epoch, "iteration": record.iterations, "wt": wt, "st": st}
        record.evaluations.append(entry)
        emit("validation", epoch=epoch, iteration=record.iterations, wt=wt["total"], st=st["total"],
             st_item_esr=st["item_esr"])
        improved = record.best_st_loss is None or st["total"] < record.best_st_loss
        if improved:
            record.best_st_loss = st["total"]
            record.best_st_esr = st["item_esr"]
            record.best_wt_loss = wt["total"]
            record.best_iteration = record.iterations
            best_state[:] = _snapshot(modules)
        return improved

    emit("start", config=config.to_dict(), plan=plan.to_dict())
    stop = None
    epoch = 0
    since_eval = 0
    try:
        while stop is None:
            groups = plan_batches(train_items, plan, np.random.SeedSequence([config.seed, epoch]), dtype)
            if not groups:
                raise ValueError("no complete batch group fits the training items")
            for group in groups:
                t0 = time.perf_counter()
                record.train_losses += tbptt_group_step(model, spn, group, optimizer, plan, spectral)
                step_times.append((time.perf_counter() - t0) / group.N)
                record.iterations += group.N
                since_eval += group.N
                if config.eval_every and since_eval >= config.eval_every:
                    since_eval = 0
                    improved = evaluate(epoch)
                    if not improved and record.iterations - record.best_iteration >= config.patience:
                        stop = "patience"
                if record.iterations >= config.max_iterations:
                    stop = stop or "iteration_cap"
                if config.max_seconds and time.perf_counter() - t_start >= config.max_seconds:
                    stop = stop or "time_budget"
                if stop:
                    break
            if not config.eval_every or stop in ("iteration_cap", "time_budget"):
                improved = evaluate(epoch)
                if not improved and record.iterations - record.best_iteration >= config.patience:
                    stop = stop or "patience"
            epoch += 1
            if config.max_epochs and epoch >= config.max_epochs:
                stop = stop or "epoch_cap"
        record.status = "completed"
        record.meta["stop_reason"] = stop
    except (NonFiniteError, FloatingPointError, ValueError) as exc:
        record.status = "failed"
        record.error = f"{type(exc).__name__}: {exc}"
    _restore(modules, best_state)
    record.meta["epochs"] = epoch
    record.seconds_per_iteration = float(np.median(step_times)) if step_times else None
    record.wall_seconds = time.perf_counter() - t_start
    if checkpoint_path is not None and record.status == "completed":
        state = {f"model.{k}": v for k, v in model.state_dict().items()}
        if spn is not None:
            state.update({f"spn.{k}": v for k, v in spn.state_dict().items()})
        meta = {
            "run_id": run_id,
            "model_config": model.config.to_dict(),
            "L": config.L,
            "precision": config.precision,
            "use_spn": spn is not None,
            "best_iteration": record.best_iteration,
        }
        record.checkpoint = str(save_checkpoint(checkpoint_path, state, meta))
    emit("end", status=record.status, iterations=record.iterations, best_st_loss=record.best_st_loss)
    return record
