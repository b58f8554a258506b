import json

import numpy as np
import pytest

from tbptt_audio.data import (
    CONTROL_VALUES,
    AudioBuffer,
    CompressorSettings,
    ControlVector,
    build_dataset,
    compressor_process,
    gen_music_surrogate,
    gen_procedural_events,
    gen_tone_staircase,
    load_dataset,
    make_splits,
    remove_dc,
    render_target,
    save_dataset,
    settings_from_unit,
    snapshot_settings,
    static_curve,
)

SR = 44100


def sine(db, seconds, freq=1000.0):
    t = np.arange(int(seconds * SR)) / SR
    return 10 ** (db / 20) * np.sin(2 * np.pi * freq * t)


def peak_db(x):
    return 20 * np.log10(np.max(np.abs(x)))


# sources


def test_staircase_layout():
    x = gen_tone_staircase().samples
    assert len(x) == 705600
    # first step of the first group starts after 1.5 s of separators
    first = x[int(1.5 * SR) : int(1.75 * SR)]
    assert np.max(np.abs(first)) == pytest.approx(10 ** (-39 / 20), rel=1e-4)
    assert np.max(np.abs(x[-int(0.25 * SR) :])) == pytest.approx(1.0, abs=1e-4)
    assert np.max(np.abs(x[: int(1.5 * SR)])) == pytest.approx(10 ** (-40 / 20), rel=1e-4)


def test_staircase_steps_rise_one_db():
    x = gen_tone_staircase().samples
    group = 3
    start = int((group * 4 + 1.5) * SR)
    levels = [peak_db(x[start + int(k * 0.25 * SR) : start + int((k + 1) * 0.25 * SR)]) for k in range(10)]
    np.testing.assert_allclose(np.diff(levels), 1.0, atol=1e-3)


def test_procedural_events_bounded_and_deterministic():
    for density in ("high", "sparse"):
        a = gen_procedural_events(np.random.default_rng(5), density).samples
        b = gen_procedural_events(np.random.default_rng(5), density).samples
        assert len(a) == 20 * SR
        assert np.max(np.abs(a)) <= 1.0
        assert np.array_equal(a, b)


def test_sparse_events_are_quieter_than_dense():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        dense = gen_procedural_events(rng, "high").samples
        sparse = gen_procedural_events(rng, "sparse").samples
        assert np.mean(np.abs(sparse) < 0.01) > np.mean(np.abs(dense) < 0.01)


def test_procedural_events_rejects_unknown_density():
    with pytest.raises(ValueError):
        gen_procedural_events(np.random.default_rng(0), "medium")


def test_music_surrogate_ramp():
    x = gen_music_surrogate(np.random.default_rng(1)).samples
    assert len(x) == 40 * SR
    seg = 4 * SR
    peaks = np.array([np.max(np.abs(x[i * seg : (i + 1) * seg])) for i in range(10)])
    np.testing.assert_allclose(peaks, 10 ** (-20 * np.arange(10) / 9 / 20), rtol=1e-12)
    assert peaks[0] == pytest.approx(1.0)
    assert peaks[-1] == pytest.approx(0.1)
    y = gen_music_surrogate(np.random.default_rng(1)).samples
    assert np.array_equal(x, y)


def test_audio_buffer_rejects_nonfinite():
    with pytest.raises(ValueError):
        AudioBuffer(np.array([0.0, np.nan]))


def test_remove_dc():
    np.testing.assert_array_equal(remove_dc(np.ones(3)), np.zeros(3))
    z = np.array([1.0, -1.0, 2.0, -2.0])
    np.testing.assert_array_equal(remove_dc(z), z)
    r = remove_dc(np.random.default_rng(0).standard_normal(10000) + 5)
    assert abs(r.mean()) < 1e-12


# controls


def test_snapshot_settings_are_middle_with_max_release():
    s = snapshot_settings()
    assert (s.threshold, s.attack, s.ratio, s.release, s.knee, s.thrust) == (0.0, 1e-3, 3.0, 3.0, 6.0, False)


def test_control_vector_normalized_range():
    rng = np.random.default_rng(0)
    for _ in range(50):
        cv = ControlVector.from_settings(settings_from_unit(rng.random(6)))
        assert all(0.0 <= v <= 1.0 for v in cv.values)
    top = settings_from_unit(np.full(6, 0.999999))
    assert ControlVector.from_settings(top).values == (1.0,) * 6


def test_threshold_grid_is_four_db():
    assert np.all(np.diff(CONTROL_VALUES["threshold"]) == 4.0)
    assert CONTROL_VALUES["threshold"][0] == -20 and CONTROL_VALUES["threshold"][-1] == 20


def test_settings_validation():
    with pytest.raises(ValueError):
        CompressorSettings(ratio=0.5)
    with pytest.raises(ValueError):
        CompressorSettings(knee=-1)
    with pytest.raises(ValueError):
        CompressorSettings(threshold=1.0).indices()


# compressor


def test_static_curve_hand_values():
    assert static_curve(-4.0, -10.0, 4.0, 0.0) == pytest.approx(-8.5)
    assert static_curve(-20.0, -10.0, 4.0, 0.0) == -20.0
    # soft knee is continuous at both knee edges
    for edge in (-13.0, -7.0):
        assert static_curve(edge, -10.0, 4.0, 6.0) == pytest.approx(
            static_curve(edge, -10.0, 4.0, 0.0), abs=1e-12
        )


def test_below_threshold_is_identity():
    x = sine(-30, 0.5)
    s = CompressorSettings(threshold=-10, ratio=4, knee=0, attack=1e-3, release=0.1)
    np.testing.assert_array_equal(compressor_process(x, s), x)


def test_steady_sine_matches_static_curve():
    s = CompressorSettings(threshold=-10, ratio=4, knee=0, attack=1e-3, release=0.3)
    y = compressor_process(sine(-4, 2.0), s)
    assert abs(peak_db(y[-int(0.1 * SR) :]) - (-8.5)) < 0.1


def test_gain_recovers_within_five_release_constants():
    release = 0.3
    s = CompressorSettings(threshold=-10, ratio=4, knee=0, attack=1e-3, release=release)
    loud, quiet = sine(-4, 1.0), sine(-40, 3.0)
    x = np.concatenate([loud, quiet])
    y = compressor_process(x, s)
    mask = np.abs(x) > 0.5 * 10 ** (-40 / 20)
    gain = np.where(mask, y / np.where(mask, x, 1.0), np.nan)
    t = np.arange(len(x)) / SR - 1.0
    within = np.abs(gain - 1.0) <= 0.01
    late = (t > 0) & mask
    first_ok = t[late][np.argmax(within[late])]
    assert np.all(within[late & (t >= first_ok)])
    assert first_ok <= 5 * release


def test_compressor_is_causal():
    rng = np.random.default_rng(0)
    s = CompressorSettings(threshold=-20, ratio=6, knee=3, attack=3e-3, release=0.1, thrust=True)
    x = rng.uniform(-1, 1, 8000)
    x2 = x.copy()
    x2[5000:] = rng.uniform(-1, 1, 3000)
    np.testing.assert_array_equal(compressor_process(x, s)[:5000], compressor_process(x2, s)[:5000])


@pytest.mark.parametrize("thrust", [False, True])
def test_compressor_is_time_invariant(thrust):
    rng = np.random.default_rng(1)
    s = CompressorSettings(threshold=-16, ratio=4, knee=6, attack=1e-3, release=0.05, thrust=thrust)
    x = rng.uniform(-1, 1, 4000) * np.linspace(0, 1, 4000)
    d = 123
    y = compressor_process(np.concatenate([np.zeros(d), x]), s)
    np.testing.assert_allclose(y[d:], compressor_process(x, s), atol=1e-9)
    assert np.all(y[:d] == 0)


def test_thrust_reduces_low_frequency_compression():
    s = CompressorSettings(threshold=-20, ratio=10, knee=0, attack=1e-3, release=0.1)
    low = sine(-4, 1.0, freq=60.0)
    plain = compressor_process(low, s)
    thrust = compressor_process(low, CompressorSettings(**{**s.to_dict(), "thrust": True}))
    assert peak_db(thrust[-SR // 4 :]) > peak_db(plain[-SR // 4 :]) + 6


def test_compressor_output_length_and_gain():
    x = sine(0, 0.2)
    y, g = compressor_process(x, snapshot_settings(), return_gain=True)
    assert y.shape == x.shape == g.shape
    assert np.all(g <= 0)


# datasets


def test_threshold_ratio_grid():
    ds = build_dataset("threshold_ratio", seed=0)
    pairs = sorted((s.threshold, s.ratio) for s in ds.settings)
    assert pairs == sorted((t, r) for t in (4.0, 0.0, -4.0, -8.0) for r in (3.0, 4.0, 6.0, 10.0))
    assert len(ds) == 16


def test_snapshot_shares_one_control_vector():
    ds = build_dataset("snapshot", seed=0)
    assert len(ds) == 16
    assert len({ControlVector.from_settings(s).values for s in ds.settings}) == 1


def test_full_dataset_latin_hypercube():
    ds = build_dataset("full", seed=2)
    assert len(ds) == 160
    u = ds.unit_sample
    for k in range(u.shape[1]):
        assert sorted(np.floor(u[:, k] * 160).astype(int)) == list(range(160))
    assert ds.settings == build_dataset("full", seed=2).settings


def test_dataset_items_regenerate_targets_exactly():
    ds = build_dataset("threshold_ratio", seed=4, n_items=2, duration=3.0)
    for item in ds:
        assert len(item.input) == len(item.target) == 3 * SR
        assert abs(item.input.samples.mean()) < 1e-12
        assert abs(item.target.samples.mean()) < 1e-12
        settings = CompressorSettings(**item.controls.settings.to_dict())
        assert np.array_equal(item.target.samples, render_target(item.input.samples, settings))


def test_full_length_item_is_96_seconds():
    item = build_dataset("snapshot", seed=0, n_items=1)[0]
    assert len(item.input) == 96 * SR


def test_dataset_determinism_and_item_independence():
    a = build_dataset("snapshot", seed=9, n_items=2, duration=17.0)
    b = build_dataset("snapshot", seed=9, n_items=2, duration=17.0, cache=False)
    assert np.array_equal(a[1].input.samples, b[1].input.samples)
    # the staircase is shared; the music surrogate after 16 s is not
    tail = slice(16 * SR, None)
    assert not np.array_equal(a[0].input.samples[tail], a[1].input.samples[tail])


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        build_dataset("hardware")


def test_splits_partition_items():
    for n, counts in ((16, (8, 4, 4)), (160, (128, 16, 16))):
        ids = [f"i{k}" for k in range(n)]
        splits = make_splits(ids, counts, seed=3)
        assert len(splits) == 10
        for train, val, test in splits:
            assert (len(train), len(val), len(test)) == counts
            assert set(train) | set(val) | set(test) == set(ids)
            assert not (set(train) & set(val) or set(train) & set(test) or set(val) & set(test))
        assert splits == make_splits(ids, counts, seed=3)
    assert make_splits(ids, seed=3) == make_splits(ids, (128, 16, 16), seed=3)


def test_splits_count_mismatch():
    with pytest.raises(ValueError):
        make_splits(list(range(16)), (8, 4, 3), seed=0)


def test_save_and_load_round_trip(tmp_path):
    ds = build_dataset("threshold_ratio", seed=1, n_items=2, duration=0.5)
    splits = make_splits(ds.ids, (1, 1, 0), seed=0, n_splits=2)
    path = save_dataset(ds, tmp_path, splits)
    items, manifest = load_dataset(path)
    assert [it.id for it in items] == ds.ids
    assert manifest["seed"] == 1 and manifest["splits"]["seed"] == 0
    np.testing.assert_array_equal(items[0].input.samples, ds[0].input.samples.astype(np.float32))
    assert items[1].controls == ds[1].controls
    raw = json.loads(path.read_text())
    assert raw["items"][0]["controls"]["normalized"] == list(ds[0].controls.values)
    header = (tmp_path / raw["items"][0]["input"]).read_bytes()[:44]
    assert header[:4] == b"RIFF" and header[20:22] == (3).to_bytes(2, "little")
