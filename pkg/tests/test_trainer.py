import io
import json
import warnings

import numpy as np
import pytest

from tbptt_audio.autodiff import Tape, Tensor, load_checkpoint
from tbptt_audio.losses import SpectralConfig, combined_loss
from tbptt_audio.model import SPN, SPTMod, BlockState, ModBlockConfig, RecurrentContext, SpnConfig, SptmodConfig
from tbptt_audio.trainer import (
    Adam,
    ShortItemWarning,
    TbpttPlan,
    TrainConfig,
    adam_update,
    make_group,
    plan_batches,
    tbptt_group_step,
    train,
    validate_st,
    validate_wt,
)

SPEC = SpectralConfig((16, 32))
L = 64


def tiny_config(num_controls=2):
    blocks = (
        ModBlockConfig(3, 3, 1, pool=4, lstm_hidden=4, film_hidden=3),
        ModBlockConfig(3, 2, 2, pool=4, lstm_hidden=3, film_hidden=3),
    )
    spn = SpnConfig(num_blocks=2, channels=3, kernel=5, pool=4, film_hidden=3)
    return SptmodConfig(blocks, num_controls=num_controls, spn=spn)


def tiny_models(dtype=np.float64, seed=0, config=None):
    config = config or tiny_config()
    return SPTMod(config, L, seed=seed, dtype=dtype), SPN(config, seed=seed + 1, dtype=dtype)


def random_items(rng, n, length, num_controls=2):
    items = []
    for _ in range(n):
        x = rng.uniform(-1, 1, length) * rng.uniform(0.1, 1.0)
        y = np.tanh(2 * x) * 0.5
        items.append((x, y, rng.random(num_controls)))
    return items


def params_of(model, spn):
    return model.parameters() + spn.parameters()


# plan geometry


def test_plan_arithmetic():
    plan = TbpttPlan(N=3, B=8, L=4096, L_nopad=4616, L_lookback=218441 - 4096)
    assert plan.L_in0 == 218441
    assert plan.sub_lengths() == (218441, 4096, 4096)
    assert plan.L_c == plan.step == 3 * 4096
    assert (plan.long_len - plan.L_in0) % plan.L == 0
    # without lookback the padding-free input dominates
    plan = TbpttPlan(N=1, B=1, L=16, L_nopad=26, L_lookback=0)
    assert plan.L_in0 == 26 and plan.long_len == 26


def test_plan_validation():
    with pytest.raises(ValueError):
        TbpttPlan(N=0, B=1, L=16, L_nopad=16, L_lookback=0)
    with pytest.raises(ValueError):
        TbpttPlan(N=1, B=1, L=16, L_nopad=8, L_lookback=0)


def test_plan_for_models_checks_output_length():
    model, spn = tiny_models()
    plan = TbpttPlan.for_models(model, spn, 2, 3, L)
    assert plan.L_nopad == model.L_nopad and plan.L_lookback == spn.lookback
    with pytest.raises(ValueError):
        TbpttPlan.for_models(model, spn, 2, 3, 2 * L)


def test_window_counts():
    plan = TbpttPlan(N=2, B=1, L=16, L_nopad=20, L_lookback=30)
    zero = np.zeros(3)
    for length, expected in ((plan.long_len, 1), (plan.long_len + plan.step - 1, 1), (plan.long_len + plan.step, 2)):
        x = np.zeros(length)
        assert len(plan_batches([(x, x, zero)], plan, 0)) == expected


def test_short_items_warn_and_leftovers_drop():
    plan = TbpttPlan(N=2, B=2, L=16, L_nopad=20, L_lookback=30)
    c = np.zeros(3)
    long_x = np.zeros(plan.long_len + 2 * plan.step)  # three windows
    with pytest.warns(ShortItemWarning):
        sched = plan_batches([(np.zeros(10), np.zeros(10), c), (long_x, long_x, c)], plan, 0)
    assert len(sched) == 1


def test_sub_batches_are_consecutive_slices():
    rng = np.random.default_rng(0)
    plan = TbpttPlan(N=3, B=2, L=16, L_nopad=20, L_lookback=30)
    items = random_items(rng, 3, 400)
    for group in plan_batches(items, plan, epoch_seed=5, dtype=np.float64):
        assert group.lengths == plan.sub_lengths()
        for b, (i, s) in enumerate(group.windows):
            joined = np.concatenate([x[b] for x in group.inputs])
            np.testing.assert_array_equal(joined, items[i][0][s : s + plan.long_len])
            np.testing.assert_array_equal(group.controls[b], items[i][2])


def test_schedule_is_seeded_shuffle():
    rng = np.random.default_rng(0)
    plan = TbpttPlan(N=1, B=1, L=16, L_nopad=20, L_lookback=0)
    items = random_items(rng, 2, 300)
    a = plan_batches(items, plan, 3).batches
    assert a == plan_batches(items, plan, 3).batches
    assert a != plan_batches(items, plan, 4).batches
    assert sorted(a) == sorted(plan_batches(items, plan, 0, shuffle=False).batches)


# Adam


def reference_adam(theta, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        theta = theta - lr * (m / (1 - b1**t)) / ((v / (1 - b2**t)) ** 0.5 + eps)
    return theta


def test_adam_first_step():
    p = np.array([0.0])
    adam_update(p, np.array([1.0]), np.zeros(1), np.zeros(1), 1, 5e-4)
    assert p[0] == pytest.approx(-5e-4 / (1 + 1e-8), rel=1e-12)


def test_adam_zero_gradient_is_noop():
    model, spn = tiny_models()
    before = [p.data.copy() for p in params_of(model, spn)]
    opt = Adam(params_of(model, spn))
    for p in opt.params:
        p.grad = np.zeros_like(p.data)
    opt.step()
    opt.zero_grad()
    opt.step()
    for p, b in zip(opt.params, before):
        np.testing.assert_array_equal(p.data, b)


def test_adam_matches_reference_on_quadratic():
    from tbptt_audio.autodiff import Parameter

    rng = np.random.default_rng(1)
    target = rng.standard_normal(5)
    p = Parameter(rng.standard_normal(5))
    start = p.data.copy()
    opt = Adam([p], lr=0.1)
    history = []
    for _ in range(3):
        g = 2 * (p.data - target)
        history.append(g.copy())
        p.grad = g
        opt.step()
    # the reference replays the same gradient sequence element by element
    expected = [reference_adam(start[i], [h[i] for h in history], 0.1) for i in range(5)]
    np.testing.assert_allclose(p.data, expected, rtol=0, atol=1e-12)
    assert opt.t == 3


# group step


def make_tiny_group(rng, model, spn, N, B=2):
    plan = TbpttPlan.for_models(model, spn, N, B, L)
    items = random_items(rng, B, plan.long_len)
    windows = [(b, 0) for b in range(B)]
    return plan, make_group(items, windows, plan, model.dtype)


@pytest.mark.parametrize("N", [1, 2, 3])
def test_group_step_updates_n_times(N):
    rng = np.random.default_rng(N)
    model, spn = tiny_models()
    plan, group = make_tiny_group(rng, model, spn, N)
    opt = Adam(params_of(model, spn))
    before = [p.data.copy() for p in opt.params]
    losses = tbptt_group_step(model, spn, group, opt, plan, SPEC)
    assert len(losses) == N and opt.t == N
    assert all(np.isfinite(losses))
    assert any(not np.array_equal(p.data, b) for p, b in zip(opt.params, before))


def constant_context(ctx):
    return RecurrentContext(
        BlockState(*(None if t is None else Tensor(np.array(t.data)) for t in (b.h, b.c, b.conv, b.pending, b.last2)))
        for b in ctx.blocks
    )


def injection_gradients(model, spn, group, plan, k, ctx_values):
    """Gradients of iteration ``k`` with the carried context as plain constants."""
    for p in params_of(model, spn):
        p.grad = None
    x, y, c = group.inputs[k], group.targets[k], group.controls
    with Tape() as tape:
        out, _ = model.forward(x, c, constant_context(ctx_values), mode="cached")
        loss = combined_loss(y, out, SPEC)
    tape.backward(loss.tensor)
    return [None if p.grad is None else p.grad.copy() for p in params_of(model, spn)]


@pytest.mark.parametrize("seed", range(3))
def test_detached_gradients_match_constant_injection(seed):
    rng = np.random.default_rng(seed)
    N = 2 + seed % 2
    model, spn = tiny_models(seed=seed)
    plan, group = make_tiny_group(rng, model, spn, N)
    opt = Adam(params_of(model, spn), lr=1e-3)
    seen = []

    def capture(k, ctx, grads):
        seen.append((k, ctx, [p.data.copy() for p in opt.params], grads))

    tbptt_group_step(model, spn, group, opt, plan, SPEC, on_gradients=capture)
    for k, ctx, weights, grads in seen[1:]:
        for p, w in zip(opt.params, weights):
            p.data = w.copy()
        oracle = injection_gradients(model, spn, group, plan, k, ctx)
        for i, g in enumerate(oracle):
            if g is None:
                assert grads[i] is None or not np.any(grads[i])
            else:
                assert np.max(np.abs(grads[i] - g)) < 1e-12


def test_spn_only_receives_gradient_on_first_iteration():
    rng = np.random.default_rng(0)
    model, spn = tiny_models()
    plan, group = make_tiny_group(rng, model, spn, 2)
    opt = Adam(params_of(model, spn))
    n_model = len(model.parameters())
    grads = {}
    tbptt_group_step(model, spn, group, opt, plan, SPEC, on_gradients=lambda k, ctx, g: grads.setdefault(k, g))
    assert any(grads[0][i] is not None and np.any(grads[0][i]) for i in range(n_model, len(opt.params)))
    assert all(grads[1][i] is None for i in range(n_model, len(opt.params)))


def test_group_losses_independent_of_previous_groups():
    rng = np.random.default_rng(0)
    model, spn = tiny_models()
    plan = TbpttPlan.for_models(model, spn, 2, 1, L)
    items = random_items(rng, 3, plan.long_len)
    groups = [make_group(items, [(i, 0)], plan, np.float64) for i in range(3)]
    opt = Adam(params_of(model, spn), lr=0.0)
    tbptt_group_step(model, spn, groups[0], opt, plan, SPEC)
    after_a = tbptt_group_step(model, spn, groups[2], opt, plan, SPEC)
    tbptt_group_step(model, spn, groups[1], opt, plan, SPEC)
    after_b = tbptt_group_step(model, spn, groups[2], opt, plan, SPEC)
    assert after_a == after_b


# validation


def identity_model():
    config = tiny_config(num_controls=0)
    model, spn = tiny_models(config=config)
    for block in model.blocks:
        block.gain.weight.data[:] = 0.0
        block.gain.bias.data[:] = 1.0
    return model, spn


def test_identity_model_validates_to_zero():
    model, spn = identity_model()
    plan = TbpttPlan.for_models(model, spn, 2, 2, L)
    rng = np.random.default_rng(0)
    items = [(x, x, c) for x, _, c in random_items(rng, 2, plan.long_len + 3 * L, num_controls=0)]
    wt = validate_wt(model, spn, items, plan, SPEC, np.float64)
    st = validate_st(model, spn, items, plan, SPEC, np.float64)
    assert wt["total"] == 0.0 and st["total"] == 0.0 and st["item_esr"] == 0.0


def test_wt_and_st_coincide_for_single_window_items():
    model, spn = tiny_models()
    plan = TbpttPlan.for_models(model, spn, 2, 2, L)
    items = random_items(np.random.default_rng(3), 3, plan.long_len)
    wt = validate_wt(model, spn, items, plan, SPEC, np.float64)
    st = validate_st(model, spn, items, plan, SPEC, np.float64)
    for key in ("mae", "esr", "mr_stft", "mr_eesr", "total"):
        assert wt[key] == pytest.approx(st[key], rel=1e-12)


# training


def tiny_run(seed=0, patience=200, max_epochs=3, **kw):
    model, spn = tiny_models(seed=seed)
    rng = np.random.default_rng(100)
    plan = TbpttPlan.for_models(model, spn, 2, 2, L)
    tr = random_items(rng, 2, plan.long_len + 3 * plan.step)
    va = random_items(rng, 1, plan.long_len + 2 * L)
    cfg = TrainConfig(N=2, B=2, L=L, lr=3e-3, patience=patience, max_epochs=max_epochs,
                      precision="double", seed=seed, **kw)
    return model, spn, tr, va, cfg, plan


def test_train_is_deterministic():
    records = []
    for _ in range(2):
        model, spn, tr, va, cfg, _ = tiny_run()
        records.append(train(model, spn, tr, va, cfg, spectral=SPEC))
    a, b = records
    assert a.status == "completed"
    assert a.train_losses == b.train_losses
    assert a.evaluations == b.evaluations


def test_train_restores_best_weights(tmp_path):
    model, spn, tr, va, cfg, plan = tiny_run(max_epochs=4)
    log = io.StringIO()
    rec = train(model, spn, tr, va, cfg, log=log, checkpoint_path=tmp_path / "best", spectral=SPEC)
    st_losses = [e["st"]["total"] for e in rec.evaluations]
    assert rec.best_st_loss == min(st_losses)
    assert rec.iterations == 4 * 4 * 2  # epochs x groups x N
    again = validate_st(model, spn, va, plan, SPEC, np.float64)
    assert again["total"] == rec.best_st_loss
    state, meta = load_checkpoint(rec.checkpoint)
    assert meta["best_iteration"] == rec.best_iteration
    np.testing.assert_array_equal(state["model.blocks.0.conv.weight"], model.blocks[0].conv.weight.data)
    events = [json.loads(line)["event"] for line in log.getvalue().splitlines()]
    assert events[0] == "start" and events[-1] == "end" and events.count("validation") == 4
    assert json.loads(rec.to_json())["run_id"] == "run"


def test_eval_every_counts_across_epochs():
    model, spn, tr, va, cfg, _ = tiny_run(eval_every=6)
    rec = train(model, spn, tr, va, cfg, spectral=SPEC)
    assert [e["iteration"] for e in rec.evaluations] == [6, 12, 18, 24]


def test_zero_patience_stops_at_first_non_improvement():
    model, spn, tr, va, cfg, _ = tiny_run(patience=0, max_epochs=50)
    cfg.lr = 0.5  # large steps make a non-improving evaluation come quickly
    rec = train(model, spn, tr, va, cfg, spectral=SPEC)
    st = [e["st"]["total"] for e in rec.evaluations]
    if rec.status == "completed":
        assert rec.meta["stop_reason"] in ("patience", "epoch_cap")
        if rec.meta["stop_reason"] == "patience":
            assert st[-1] >= min(st[:-1])
            assert all(st[i] < min(st[:i]) for i in range(1, len(st) - 1))


def test_nan_loss_marks_run_failed():
    model, spn, tr, va, cfg, _ = tiny_run()
    x, y, c = tr[0]
    y = y.copy()
    y[:] = np.nan
    tr = [(x, y, c), tr[1]]
    rec = train(model, spn, tr, va, cfg, spectral=SPEC)
    assert rec.status == "failed"
    assert "non-finite" in rec.error or "nan" in rec.error.lower()


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(patience=10, max_iterations=10)
    with pytest.raises(ValueError):
        TrainConfig(precision="half")
