"""Training losses and the FFT behind the spectral terms."""

from .fft import fft, ifft
from .terms import (
    MAE_WEIGHT,
    LossBreakdown,
    SpectralConfig,
    combined_loss,
    eesr,
    esr,
    hann,
    mae,
    mr_eesr,
    mr_stft,
    stft_loss,
)

__all__ = [
    "fft",
    "ifft",
    "hann",
    "MAE_WEIGHT",
    "SpectralConfig",
    "LossBreakdown",
    "mae",
    "esr",
    "stft_loss",
    "eesr",
    "mr_stft",
    "mr_eesr",
    "combined_loss",
]
