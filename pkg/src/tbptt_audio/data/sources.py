"""Synthetic source material: tone staircase, music surrogate, sound events."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import chirp

from .compressor import SAMPLE_RATE

__all__ = [
    "AudioBuffer",
    "gen_tone_staircase",
    "gen_music_surrogate",
    "gen_procedural_events",
    "remove_dc",
    "STAIRCASE_SECONDS",
    "MUSIC_SECONDS",
    "EVENTS_SECONDS",
]

STAIRCASE_SECONDS = 16.0
MUSIC_SECONDS = 40.0
EVENTS_SECONDS = 20.0


@dataclass
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if not np.isfinite(self.samples).all():
            raise ValueError("audio contains non-finite samples")

    def __len__(self):
        return len(self.samples)

    @property
    def seconds(self):
        return len(self.samples) / self.sample_rate


def _db(level):
    return 10.0 ** (level / 20.0)


def _n(seconds, sr):
    return int(round(seconds * sr))


def gen_tone_staircase(sample_rate=SAMPLE_RATE, frequency=1000.0):
    """1 kHz tone stepping up 1 dB at a time from -39 dB to 0 dB.

    Four groups of ten 0.25 s steps; each group is preceded by three 0.5 s
    steps at -40 dB that let a compressor release. 16 s in total.
    """
    levels, durations = [], []
    for group in range(4):
        levels += [-40.0] * 3
        durations += [0.5] * 3
        for step in range(10):
            levels.append(-39.0 + 10 * group + step)
            durations.append(0.25)
    envelope = np.concatenate(
        [np.full(_n(d, sample_rate), _db(v)) for v, d in zip(levels, durations)]
    )
    t = np.arange(len(envelope)) / sample_rate
    return AudioBuffer(envelope * np.sin(2 * np.pi * frequency * t), sample_rate)


def _adsr(rng, n, sr):
    attack = max(1, _n(rng.uniform(0.001, 0.05), sr))
    decay = max(1, _n(rng.uniform(0.01, 0.2), sr))
    release = max(1, _n(rng.uniform(0.01, 0.5), sr))
    sustain = rng.uniform(0.2, 1.0)
    hold = max(0, n - attack - decay - release)
    env = np.concatenate(
        [
            np.linspace(0.0, 1.0, attack, endpoint=False),
            np.linspace(1.0, sustain, decay, endpoint=False),
            np.full(hold, sustain),
            np.linspace(sustain, 0.0, release),
        ]
    )
    return env[:n] if len(env) >= n else np.pad(env, (0, n - len(env)))


def _event_source(rng, n, sr):
    t = np.arange(n) / sr
    kind = rng.integers(0, 4)
    if kind == 0:
        return rng.uniform(-1.0, 1.0, n)
    if kind == 1:
        f0 = 55.0 * 2 ** rng.uniform(0, 5)
        amps = rng.uniform(0.2, 1.0, 3)
        phases = rng.uniform(0, 2 * np.pi, 3)
        sig = sum(a * np.sin(2 * np.pi * f0 * (h + 1) * t + p) for h, (a, p) in enumerate(zip(amps, phases)))
        drive = rng.uniform(0.5, 4.0)
        return np.tanh(drive * sig) / np.tanh(drive)
    f_start, f_end = 20.0 * 2 ** rng.uniform(0, 9, 2)
    method = "linear" if kind == 2 else "logarithmic"
    return chirp(t, f0=f_start, t1=max(t[-1], 1.0 / sr), f1=f_end, method=method)


def _event(rng, sr, seconds):
    n = max(8, _n(seconds, sr))
    sig = _event_source(rng, n, sr) * _adsr(rng, n, sr)
    peak = np.max(np.abs(sig))
    if peak > 0:
        sig = sig / peak
    return sig * _db(rng.uniform(-30.0, 0.0))


def gen_procedural_events(rng, density="high", sample_rate=SAMPLE_RATE, seconds=EVENTS_SECONDS):
    """Sequence of enveloped noise, harmonic-oscillator and chirp events.

    ``density="high"`` packs events nearly back to back; ``"sparse"``
    separates them by stretches of low-amplitude noise. Every sample lies in
    ``[-1, 1]``.
    """
    if density not in ("high", "sparse"):
        raise ValueError(f"density must be 'high' or 'sparse', got {density!r}")
    total = _n(seconds, sample_rate)
    out = np.zeros(total)
    pos = 0
    while pos < total:
        if density == "high":
            gap = _n(rng.uniform(0.0, 0.02), sample_rate)
            floor = 0.0
        else:
            gap = _n(rng.uniform(0.3, 1.5), sample_rate)
            floor = _db(rng.uniform(-60.0, -45.0))
        gap = min(gap, total - pos)
        out[pos : pos + gap] = floor * rng.uniform(-1.0, 1.0, gap)
        pos += gap
        if pos >= total:
            break
        ev = _event(rng, sample_rate, rng.uniform(0.05, 1.0))[: total - pos]
        out[pos : pos + len(ev)] = ev
        pos += len(ev)
    return AudioBuffer(out, sample_rate)


def _segment(rng, n, sr):
    """Polyphonic mixture: a few voices playing short note sequences."""
    t = np.arange(n) / sr
    mix = np.zeros(n)
    for _ in range(rng.integers(3, 7)):
        voice = np.zeros(n)
        pos = 0
        while pos < n:
            dur = min(n - pos, _n(rng.choice([0.125, 0.25, 0.5, 1.0]), sr))
            pitch = rng.integers(36, 85)
            f0 = 440.0 * 2 ** ((pitch - 69) / 12)
            partials = np.arange(1, rng.integers(2, 7))
            amps = rng.uniform(0.1, 1.0, len(partials)) / partials
            tt = t[pos : pos + dur]
            note = sum(a * np.sin(2 * np.pi * f0 * k * tt) for k, a in zip(partials, amps) if f0 * k < sr / 2)
            voice[pos : pos + dur] = note * _adsr(rng, dur, sr) * rng.uniform(0.2, 1.0)
            pos += dur
        mix += voice
    for _ in range(rng.integers(0, 12)):
        start = rng.integers(0, n)
        hit = rng.uniform(-1, 1, min(n - start, _n(0.08, sr))) * rng.uniform(0.2, 1.0)
        mix[start : start + len(hit)] += hit * np.exp(-np.arange(len(hit)) / (0.01 * sr))
    return mix


def gen_music_surrogate(rng, sample_rate=SAMPLE_RATE, segments=10, segment_seconds=4.0):
    """Ten 4 s polyphonic segments, each peak-normalized, on a 0 to -20 dB ramp.

    Segment ``i`` ends up with peak ``10 ** (-20 * i / 9 / 20)``.
    """
    n = _n(segment_seconds, sample_rate)
    parts = []
    for i in range(segments):
        seg = _segment(rng, n, sample_rate)
        seg = seg / np.max(np.abs(seg))
        ramp = -20.0 * i / (segments - 1) if segments > 1 else 0.0
        parts.append(seg * _db(ramp))
    return AudioBuffer(np.concatenate(parts), sample_rate)


def remove_dc(x):
    """Subtract the arithmetic mean."""
    x = np.asarray(x.samples if isinstance(x, AudioBuffer) else x, dtype=np.float64)
    return x - np.mean(x)
