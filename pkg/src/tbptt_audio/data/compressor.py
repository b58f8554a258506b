"""Reference feed-forward compressor used to render training targets.

Chain: optional 2nd-order Butterworth high-pass in the sidechain (thrust),
mean-square level detector with a 5 ms one-pole average, soft-knee static
curve, attack/release one-pole smoothing of the gain in dB, and the gain
applied to the dry input. Levels are sine-calibrated: a steady sine of peak
amplitude ``A`` reads ``20 log10 A`` dB.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from scipy.signal import butter, lfilter

__all__ = [
    "SAMPLE_RATE",
    "DETECTOR_TIME",
    "static_curve",
    "detect_level",
    "smooth_gain",
    "compressor_process",
    "one_pole_coefficient",
]

SAMPLE_RATE = 44100
DETECTOR_TIME = 5e-3
LEVEL_FLOOR_DB = -200.0


def one_pole_coefficient(time_constant, sample_rate=SAMPLE_RATE):
    return float(np.exp(-1.0 / (time_constant * sample_rate)))


def static_curve(level_db, threshold, ratio, knee):
    """Output level (dB) of the soft-knee static characteristic."""
    x = np.asarray(level_db, dtype=np.float64)
    over = x - threshold
    y = np.where(over > 0, threshold + over / ratio, x)
    if knee > 0:
        inside = np.abs(over) * 2 <= knee
        bend = x + (1.0 / ratio - 1.0) * (over + knee / 2) ** 2 / (2 * knee)
        y = np.where(inside, bend, np.where(2 * over < -knee, x, threshold + over / ratio))
    return y


def detect_level(sidechain, sample_rate=SAMPLE_RATE):
    """Sine-calibrated mean-square level in dB."""
    a = one_pole_coefficient(DETECTOR_TIME, sample_rate)
    ms = lfilter([1.0 - a], [1.0, -a], sidechain * sidechain)
    ms = np.maximum(ms, 0.0)
    with np.errstate(divide="ignore"):
        level = 10.0 * np.log10(2.0 * ms)
    return np.maximum(level, LEVEL_FLOOR_DB)


@njit(cache=False)
def _smooth(target, a_att, a_rel):
    out = np.empty_like(target)
    g = 0.0
    for n in range(target.shape[0]):
        t = target[n]
        if t < g:
            g = a_att * g + (1.0 - a_att) * t
        else:
            g = a_rel * g + (1.0 - a_rel) * t
        out[n] = g
    return out


def smooth_gain(target_db, attack, release, sample_rate=SAMPLE_RATE):
    """Attack when the target asks for more reduction, release otherwise."""
    return _smooth(
        np.ascontiguousarray(target_db, dtype=np.float64),
        one_pole_coefficient(attack, sample_rate),
        one_pole_coefficient(release, sample_rate),
    )


def compressor_process(x, settings, sample_rate=SAMPLE_RATE, return_gain=False):
    """Compress mono signal ``x`` with :class:`CompressorSettings`."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a mono signal, got shape {x.shape}")
    side = x
    if settings.thrust:
        b, a = butter(2, settings.thrust_cutoff, btype="highpass", fs=sample_rate)
        side = lfilter(b, a, x)
    level = detect_level(side, sample_rate)
    reduction = static_curve(level, settings.threshold, settings.ratio, settings.knee) - level
    gain_db = smooth_gain(reduction, settings.attack, settings.release, sample_rate)
    y = x * 10.0 ** (gain_db / 20.0)
    return (y, gain_db) if return_gain else y
