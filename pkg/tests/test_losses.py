import numpy as np
import pytest

from oracles import central_difference, eesr_oracle, naive_dft, stft_loss_oracle
from tbptt_audio.autodiff import Tape, Tensor, relative_error
from tbptt_audio.losses import (
    SpectralConfig,
    combined_loss,
    eesr,
    esr,
    fft,
    ifft,
    mae,
    mr_eesr,
    mr_stft,
    stft_loss,
)

SMALL = SpectralConfig(window_sizes=(16, 32))


@pytest.mark.parametrize("n", [512, 1024, 2048])
def test_fft_matches_direct_dft(n):
    rng = np.random.default_rng(n)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    ref = naive_dft(x)
    assert np.max(np.abs(fft(x) - ref)) / np.max(np.abs(ref)) < 1e-9
    assert np.max(np.abs(fft(x) - ref)) < 1e-9 * np.linalg.norm(x) * np.sqrt(n)


def test_fft_hand_cases():
    delta = np.zeros(16)
    delta[0] = 1
    np.testing.assert_allclose(fft(delta), np.ones(16))
    np.testing.assert_allclose(fft(np.full(8, 2.5)), [20, 0, 0, 0, 0, 0, 0, 0], atol=1e-12)
    with pytest.raises(ValueError):
        fft(np.ones(12))


def test_fft_round_trip_and_batching():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((3, 2, 256))
    back = ifft(fft(x))
    assert np.max(np.abs(back - x)) < 1e-10 * np.linalg.norm(x)
    np.testing.assert_allclose(fft(x)[1, 0], fft(x[1, 0]), atol=1e-12)


def test_mae_cases():
    assert mae([1.0, -1.0], [0.0, 0.0]) == 1.0
    assert mae([0.3, 0.2], [0.3, 0.2]) == 0.0
    rng = np.random.default_rng(2)
    y, yh = rng.standard_normal(100), rng.standard_normal(100)
    acc = 0.0
    for a, b in zip(y, yh):
        acc += abs(b - a)
    assert mae(y, yh) == pytest.approx(acc / 100, rel=1e-14)
    with pytest.raises(ValueError):
        mae([1.0, 2.0], [1.0])


def test_esr_cases():
    y = np.array([1.0, -2.0, 0.5])
    assert esr(y, np.zeros(3)) == 1.0
    assert esr(y, y) == 0.0
    assert esr(y, 2 * y) == 1.0
    with pytest.raises(ValueError):
        esr(np.zeros(3), y)


def test_stft_loss_matches_direct_dft_oracle():
    rng = np.random.default_rng(3)
    y, yh = rng.standard_normal(1024), rng.standard_normal(1024)
    ref = stft_loss_oracle(y, yh, 512)
    assert abs(stft_loss(y, yh, 512) - ref) / ref < 1e-9


def test_stft_loss_cases():
    rng = np.random.default_rng(4)
    y = rng.standard_normal(256)
    assert stft_loss(y, y, 64) == 0.0
    # with a silent estimate the convergence term is exactly 1
    frames = np.stack([y[s : s + 64] * np.hanning(65)[:64] for s in range(0, 193, 16)])
    mags = np.abs(np.fft.rfft(frames))
    log_term = np.mean(np.abs(np.log(np.maximum(mags, 1e-8)) - np.log(1e-8)))
    assert stft_loss(y, np.zeros(256), 64) - log_term == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ValueError):
        stft_loss(y[:32], y[:32], 64)


def test_eesr_cases():
    rng = np.random.default_rng(5)
    y = rng.standard_normal(300)
    assert eesr(y, y, 64) == 0.0
    assert eesr(y, 2 * y, 64) == pytest.approx(3.0, abs=1e-12)
    yh = rng.standard_normal(300)
    assert abs(eesr(y, yh, 64) - eesr_oracle(y, yh, 64)) < 1e-12


def test_multi_resolution_means():
    rng = np.random.default_rng(6)
    y, yh = rng.standard_normal(128), rng.standard_normal(128)
    parts = [stft_loss(y, yh, w) for w in SMALL.window_sizes]
    assert mr_stft(y, yh, SMALL) == pytest.approx(np.mean(parts), rel=1e-15)
    parts = [eesr(y, yh, w) for w in SMALL.window_sizes]
    assert mr_eesr(y, yh, SMALL) == pytest.approx(np.mean(parts), rel=1e-15)
    assert mr_stft(y, y, SMALL) == 0.0 and mr_eesr(y, y, SMALL) == 0.0


def test_combined_weighting_and_zero():
    rng = np.random.default_rng(7)
    y, yh = rng.standard_normal((2, 128)), rng.standard_normal((2, 128))
    b = combined_loss(y, yh, SMALL)
    assert b.total == 100 * b.mae + b.esr + b.mr_stft + b.mr_eesr
    zero = combined_loss(y, y.copy(), SMALL)
    assert zero.total == 0.0


def test_batch_is_mean_of_items():
    rng = np.random.default_rng(8)
    y, yh = rng.standard_normal((3, 128)), rng.standard_normal((3, 128))
    whole = combined_loss(y, yh, SMALL).total
    items = [combined_loss(y[i], yh[i], SMALL).total for i in range(3)]
    assert whole == pytest.approx(np.mean(items), rel=1e-13)


def test_scale_invariance_of_ratios():
    rng = np.random.default_rng(9)
    y, yh = rng.standard_normal(256), rng.standard_normal(256)
    for c in (-3.0, 0.01, 7.5):
        assert esr(c * y, c * yh) == pytest.approx(esr(y, yh), rel=1e-12)
        assert eesr(c * y, c * yh, 64) == pytest.approx(eesr(y, yh, 64), rel=1e-12)


def test_terms_nonnegative():
    rng = np.random.default_rng(10)
    for _ in range(10):
        y, yh = rng.standard_normal(128), rng.standard_normal(128)
        b = combined_loss(y, yh, SMALL)
        assert min(b.mae, b.esr, b.mr_stft, b.mr_eesr) >= 0


@pytest.mark.parametrize("seed", range(3))
def test_combined_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((2, 80))
    yh = rng.standard_normal((2, 80))
    param = Tensor(yh.copy(), requires_grad=True)
    with Tape() as tape:
        b = combined_loss(y, param, SMALL)
    tape.backward(b.tensor)
    numeric = central_difference(lambda v: combined_loss(y, v, SMALL).total, yh.copy())
    assert relative_error(param.grad, numeric) < 1e-5


def test_gradient_reaches_every_sample():
    rng = np.random.default_rng(11)
    y = rng.standard_normal((1, 100))
    param = Tensor(rng.standard_normal((1, 100)), requires_grad=True)
    with Tape() as tape:
        b = combined_loss(y, param, SMALL)
    tape.backward(b.tensor)
    assert np.all(param.grad != 0)


def test_single_precision_estimate_gets_single_precision_gradient():
    rng = np.random.default_rng(12)
    y = rng.standard_normal((1, 64)).astype(np.float32)
    param = Tensor(rng.standard_normal((1, 64)).astype(np.float32), requires_grad=True)
    with Tape() as tape:
        b = combined_loss(y, param, SMALL)
    tape.backward(b.tensor)
    assert param.grad.dtype == np.float32
