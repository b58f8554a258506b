"""Time-domain, spectral and energy loss terms with analytic gradients.

Every term accepts a reference ``y`` and an estimate ``y_hat`` shaped ``(T,)``
or ``(B, T)``. Batched inputs are scored per item and averaged over the batch.
Values and gradients are computed in double precision whatever the input
dtype; :func:`combined_loss` records the weighted sum as a single tape node so
the gradient with respect to ``y_hat`` reaches the model in its own dtype.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff.tensor import Tensor, record
from .fft import fft, ifft

__all__ = [
    "SpectralConfig",
    "LossBreakdown",
    "MAE_WEIGHT",
    "mae",
    "esr",
    "stft_loss",
    "eesr",
    "mr_stft",
    "mr_eesr",
    "combined_loss",
    "hann",
]

MAE_WEIGHT = 100.0
LOG_EPS = 1e-8
ENERGY_FLOOR = 1e-12


@dataclass(frozen=True)
class SpectralConfig:
    """Window sizes shared by the multi-resolution STFT and EESR terms.

    The hop is a quarter of each window; magnitudes are floored at ``eps``
    before the logarithm.
    """

    window_sizes: tuple = (512, 1024, 2048)
    eps: float = LOG_EPS

    def __post_init__(self):
        sizes = tuple(int(w) for w in self.window_sizes)
        if not sizes:
            raise ValueError("at least one window size is required")
        for w in sizes:
            if w < 4 or w & (w - 1):
                raise ValueError(f"window sizes must be powers of two >= 4, got {w}")
        object.__setattr__(self, "window_sizes", sizes)

    @property
    def min_length(self):
        return max(self.window_sizes)


@dataclass
class LossBreakdown:
    """Per-term values of one loss evaluation.

    ``total`` is ``100 * mae + esr + mr_stft + mr_eesr``; ``tensor`` holds the
    same total as a scalar :class:`Tensor` that can be back-propagated.
    """

    mae: float
    esr: float
    mr_stft: float
    mr_eesr: float
    total: float
    tensor: Tensor = None

    def as_dict(self):
        return {
            "mae": self.mae,
            "esr": self.esr,
            "mr_stft": self.mr_stft,
            "mr_eesr": self.mr_eesr,
            "total": self.total,
        }


def hann(size):
    """Periodic Hann window."""
    n = np.arange(size)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / size)


def _pair(y, y_hat):
    y = np.asarray(y.data if isinstance(y, Tensor) else y, dtype=np.float64)
    y_hat = np.asarray(y_hat.data if isinstance(y_hat, Tensor) else y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ValueError(f"reference {y.shape} and estimate {y_hat.shape} differ in shape")
    if y.ndim not in (1, 2) or y.shape[-1] < 1:
        raise ValueError(f"expected (T,) or (B, T) signals, got shape {y.shape}")
    return np.atleast_2d(y), np.atleast_2d(y_hat)


# Each _term function takes (B, T) float64 arrays and returns
# (per-item values (B,), gradient of the per-item values w.r.t. y_hat).


def _mae_term(y, y_hat):
    diff = y_hat - y
    n = y.shape[1]
    return np.abs(diff).sum(axis=1) / n, np.sign(diff) / n


def _esr_term(y, y_hat):
    energy = np.sum(y * y, axis=1)
    if np.any(energy <= 0):
        raise ValueError("ESR is undefined for an all-zero reference")
    err = y - y_hat
    return np.sum(err * err, axis=1) / energy, -2.0 * err / energy[:, None]


def _frames(x, window, hop):
    n_frames = 1 + (x.shape[1] - window) // hop
    idx = np.arange(window)[None, :] + hop * np.arange(n_frames)[:, None]
    return x[:, idx]


def _stft_term(y, y_hat, window, eps):
    length = y.shape[1]
    if length < window:
        raise ValueError(f"signal of {length} samples is shorter than one {window}-sample window")
    hop = window // 4
    win = hann(window)
    bins = window // 2 + 1
    spec_y = fft(_frames(y, window, hop) * win)[..., :bins]
    spec_h = fft(_frames(y_hat, window, hop) * win)[..., :bins]
    mag_y = np.abs(spec_y)
    mag_h = np.abs(spec_h)
    batch, n_frames = mag_y.shape[:2]

    diff = mag_y - mag_h
    num = np.sqrt(np.sum(diff * diff, axis=(1, 2)))
    den = np.sqrt(np.sum(mag_y * mag_y, axis=(1, 2)))
    den = np.maximum(den, ENERGY_FLOOR)
    convergence = num / den

    log_diff = np.log(np.maximum(mag_y, eps)) - np.log(np.maximum(mag_h, eps))
    count = n_frames * bins
    magnitude = np.abs(log_diff).sum(axis=(1, 2)) / count

    # d value / d |Y_hat|
    safe_num = np.where(num > 0, num, 1.0)
    g_mag = np.where(num[:, None, None] > 0, -diff / (safe_num * den)[:, None, None], 0.0)
    g_mag = g_mag - np.where(mag_h > eps, np.sign(log_diff) / np.where(mag_h > eps, mag_h, 1.0), 0.0) / count

    # d |Y| / d Y is Y / |Y| (zero where |Y| vanishes); back through the
    # onesided DFT, the window and the frame overlap.
    phase = np.where(mag_h > 0, spec_h / np.where(mag_h > 0, mag_h, 1.0), 0.0)
    full = np.zeros((batch, n_frames, window), dtype=np.complex128)
    full[..., :bins] = g_mag * phase
    g_frames = np.real(ifft(full)) * window * win
    grad = np.zeros_like(y_hat)
    for f in range(n_frames):
        grad[:, f * hop : f * hop + window] += g_frames[:, f]
    return convergence + magnitude, grad


def _block_sums(sq, hop, n_blocks):
    padded = np.zeros((sq.shape[0], n_blocks * hop))
    take = min(sq.shape[1], n_blocks * hop)
    padded[:, :take] = sq[:, :take]
    return padded.reshape(sq.shape[0], n_blocks, hop).sum(axis=2)


def _eesr_term(y, y_hat, window):
    length = y.shape[1]
    hop = window // 4
    n_windows = length // hop
    if n_windows < 1:
        raise ValueError(f"signal of {length} samples is shorter than one {hop}-sample hop")
    n_blocks = n_windows + 3
    # Window k covers blocks k..k+3 (samples k*hop .. k*hop+W), clipped at the end.
    by = _block_sums(y * y, hop, n_blocks)
    bh = _block_sums(y_hat * y_hat, hop, n_blocks)
    e_y = (by[:, :-3] + by[:, 1:-2] + by[:, 2:-1] + by[:, 3:]) / window
    e_h = (bh[:, :-3] + bh[:, 1:-2] + bh[:, 2:-1] + bh[:, 3:]) / window
    e_y = np.maximum(e_y, ENERGY_FLOOR)
    value = np.mean(np.abs(e_h - e_y) / e_y, axis=1)

    coef = np.sign(e_h - e_y) / e_y / n_windows
    block_coef = np.zeros((y.shape[0], n_blocks))
    for s in range(4):
        block_coef[:, s : s + n_windows] += coef
    per_sample = np.repeat(block_coef, hop, axis=1)[:, :length]
    if per_sample.shape[1] < length:
        per_sample = np.pad(per_sample, ((0, 0), (0, length - per_sample.shape[1])))
    return value, per_sample * 2.0 * y_hat / window


def _batch_mean(term, *args):
    values, grad = term(*args)
    return float(values.mean()), grad / values.shape[0]


def mae(y, y_hat):
    """Mean absolute error ``mean |y_hat - y|``."""
    return _batch_mean(_mae_term, *_pair(y, y_hat))[0]


def esr(y, y_hat):
    """Error-to-signal ratio ``sum (y - y_hat)^2 / sum y^2``."""
    return _batch_mean(_esr_term, *_pair(y, y_hat))[0]


def stft_loss(y, y_hat, window, eps=LOG_EPS):
    """Spectral convergence plus mean absolute log-magnitude difference.

    Hann frames of ``window`` samples with hop ``window // 4`` start at
    sample 0; the log term is normalized by the number of magnitude bins.
    """
    return _batch_mean(_stft_term, *_pair(y, y_hat), window, eps)[0]


def eesr(y, y_hat, window):
    """Mean relative error of windowed energies.

    There are ``len // (window // 4)`` windows starting every quarter
    window; windows running past the end are clipped. Reference energies are
    floored at 1e-12.
    """
    return _batch_mean(_eesr_term, *_pair(y, y_hat), window)[0]


def mr_stft(y, y_hat, config=None):
    config = config or SpectralConfig()
    return float(np.mean([stft_loss(y, y_hat, w, config.eps) for w in config.window_sizes]))


def mr_eesr(y, y_hat, config=None):
    config = config or SpectralConfig()
    return float(np.mean([eesr(y, y_hat, w) for w in config.window_sizes]))


def combined_loss(y, y_hat, config=None):
    """Weighted sum ``100 * mae + esr + mr_stft + mr_eesr``.

    When ``y_hat`` is a :class:`Tensor` the total is recorded on the active
    tape (if any) and ``LossBreakdown.tensor`` can be passed to
    ``Tape.backward``.
    """
    config = config or SpectralConfig()
    yd, hd = _pair(y, y_hat)
    v_mae, g_mae = _batch_mean(_mae_term, yd, hd)
    v_esr, g_esr = _batch_mean(_esr_term, yd, hd)
    n_res = len(config.window_sizes)
    v_stft, v_eesr = 0.0, 0.0
    g_spec = np.zeros_like(hd)
    for w in config.window_sizes:
        v, g = _batch_mean(_stft_term, yd, hd, w, config.eps)
        v_stft += v / n_res
        g_spec += g / n_res
        v, g = _batch_mean(_eesr_term, yd, hd, w)
        v_eesr += v / n_res
        g_spec += g / n_res
    total = MAE_WEIGHT * v_mae + v_esr + v_stft + v_eesr
    grad = MAE_WEIGHT * g_mae + g_esr + g_spec

    tensor = None
    if isinstance(y_hat, Tensor):
        dtype = y_hat.dtype
        grad = grad.reshape(y_hat.shape).astype(dtype)
        tensor = record(
            "combined_loss",
            np.asarray(total, dtype=dtype),
            (y_hat,),
            lambda g: (grad * g,),
        )
    return LossBreakdown(v_mae, v_esr, v_stft, v_eesr, total, tensor)
