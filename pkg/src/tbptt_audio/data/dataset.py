"""Synthetic compressor datasets, cross-validation splits and WAV/manifest IO."""

from __future__ import annotations

import json
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.stats import qmc

from .compressor import SAMPLE_RATE, compressor_process
from .controls import (
    CONTROL_NAMES,
    CONTROL_VALUES,
    CompressorSettings,
    ControlVector,
    settings_from_unit,
    snapshot_settings,
)
from .sources import (
    AudioBuffer,
    gen_music_surrogate,
    gen_procedural_events,
    gen_tone_staircase,
    remove_dc,
)

__all__ = [
    "DATASET_KINDS",
    "ITEM_COUNTS",
    "SPLIT_COUNTS",
    "DatasetItem",
    "Dataset",
    "SplitSet",
    "build_dataset",
    "dataset_settings",
    "make_splits",
    "render_input",
    "render_target",
    "save_dataset",
    "load_dataset",
    "write_wav",
    "read_wav",
]

DATASET_KINDS = ("snapshot", "threshold_ratio", "full")
ITEM_COUNTS = {"snapshot": 16, "threshold_ratio": 16, "full": 160}
SPLIT_COUNTS = {16: (8, 4, 4), 160: (128, 16, 16)}
TR_THRESHOLDS = (4.0, 0.0, -4.0, -8.0)
TR_RATIOS = (3.0, 4.0, 6.0, 10.0)


@dataclass
class DatasetItem:
    id: str
    input: AudioBuffer
    target: AudioBuffer
    controls: ControlVector

    def __post_init__(self):
        if len(self.input) != len(self.target):
            raise ValueError(f"{self.id}: input has {len(self.input)} samples, target {len(self.target)}")


def normalize_kind(kind):
    kind = kind.replace("-", "_")
    if kind not in DATASET_KINDS:
        raise ValueError(f"unknown dataset kind {kind!r}; expected one of {DATASET_KINDS}")
    return kind


def render_input(seed, sample_rate=SAMPLE_RATE):
    """96 s source: staircase, music surrogate, dense events, sparse events."""
    rng = np.random.default_rng(seed)
    parts = [
        gen_tone_staircase(sample_rate),
        gen_music_surrogate(rng, sample_rate),
        gen_procedural_events(rng, "high", sample_rate),
        gen_procedural_events(rng, "sparse", sample_rate),
    ]
    return np.concatenate([p.samples for p in parts])


def render_target(x, settings, sample_rate=SAMPLE_RATE):
    """Compressed, DC-free target for an already DC-free input."""
    return remove_dc(compressor_process(x, settings, sample_rate))


def dataset_settings(kind, seed=0, settings=None):
    """Per-item settings plus the raw unit-cube sample for ``full``.

    ``settings`` replaces the snapshot configuration (ignored for the other
    kinds).
    """
    kind = normalize_kind(kind)
    if kind == "snapshot":
        s = settings if settings is not None else snapshot_settings()
        return [s] * ITEM_COUNTS[kind], None
    if kind == "threshold_ratio":
        base = snapshot_settings().to_dict()
        out = []
        for t in TR_THRESHOLDS:
            for r in TR_RATIOS:
                out.append(CompressorSettings(**{**base, "threshold": t, "ratio": r}))
        return out, None
    sampler = qmc.LatinHypercube(d=len(CONTROL_NAMES), seed=np.random.default_rng([seed, 0x1E5]))
    unit = sampler.random(ITEM_COUNTS[kind])
    return [settings_from_unit(u) for u in unit], unit


class Dataset(Sequence):
    """Lazily rendered list of :class:`DatasetItem`.

    Items are regenerated on access from ``SeedSequence([seed, index])``, so
    a 160-item set never has to sit in memory at once.
    """

    def __init__(self, kind, seed=0, settings=None, n_items=None, duration=None,
                 sample_rate=SAMPLE_RATE, cache=True):
        self.kind = normalize_kind(kind)
        self.seed = int(seed)
        self.sample_rate = sample_rate
        self.duration = duration
        self.settings, self.unit_sample = dataset_settings(self.kind, self.seed, settings)
        if n_items is not None:
            if not 0 < n_items <= len(self.settings):
                raise ValueError(f"n_items must be in [1, {len(self.settings)}], got {n_items}")
            self.settings = self.settings[:n_items]
        self.ids = [f"{self.kind}-{i:03d}" for i in range(len(self.settings))]
        self._cache = {} if cache else None

    def __len__(self):
        return len(self.settings)

    def item_seed(self, index):
        return np.random.SeedSequence([self.seed, index])

    def _render(self, index):
        x = render_input(self.item_seed(index), self.sample_rate)
        if self.duration is not None:
            x = x[: int(round(self.duration * self.sample_rate))]
        x = remove_dc(x)
        s = self.settings[index]
        y = render_target(x, s, self.sample_rate)
        return DatasetItem(
            self.ids[index],
            AudioBuffer(x, self.sample_rate),
            AudioBuffer(y, self.sample_rate),
            ControlVector.from_settings(s),
        )

    def __getitem__(self, index):
        if isinstance(index, slice):
            return [self[i] for i in range(*index.indices(len(self)))]
        if index < 0:
            index += len(self)
        if not 0 <= index < len(self):
            raise IndexError(index)
        if self._cache is None:
            return self._render(index)
        if index not in self._cache:
            self._cache[index] = self._render(index)
        return self._cache[index]

    def by_id(self, item_id):
        return self[self.ids.index(item_id)]

    def manifest(self, paths=None):
        items = []
        for i, (item_id, s) in enumerate(zip(self.ids, self.settings)):
            entry = {"id": item_id, "controls": ControlVector.from_settings(s).to_dict()}
            if self.unit_sample is not None:
                entry["lhs_sample"] = [float(v) for v in self.unit_sample[i]]
            if paths is not None:
                entry.update(paths[i])
            items.append(entry)
        return {
            "kind": self.kind,
            "seed": self.seed,
            "sample_rate": self.sample_rate,
            "duration": self.duration,
            "control_names": list(CONTROL_NAMES),
            "control_values": {k: list(v) for k, v in CONTROL_VALUES.items()},
            "items": items,
        }


def build_dataset(kind, seed=0, settings=None, n_items=None, duration=None,
                  sample_rate=SAMPLE_RATE, cache=True):
    """Snapshot (16 items, one setting), threshold_ratio (4x4 grid) or full (160, LHS)."""
    return Dataset(kind, seed, settings, n_items, duration, sample_rate, cache)


@dataclass(frozen=True)
class SplitSet:
    splits: tuple  # of (train ids, validation ids, test ids)
    seed: int

    def __len__(self):
        return len(self.splits)

    def __getitem__(self, i):
        return self.splits[i]

    def to_dict(self):
        return {
            "seed": self.seed,
            "splits": [{"train": list(a), "validation": list(b), "test": list(c)} for a, b, c in self.splits],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple((tuple(s["train"]), tuple(s["validation"]), tuple(s["test"])) for s in d["splits"]), d["seed"])


def make_splits(item_ids, counts=None, seed=0, n_splits=10):
    """Independent shuffles of ``item_ids`` cut into train/validation/test."""
    item_ids = list(item_ids)
    if counts is None:
        if len(item_ids) not in SPLIT_COUNTS:
            raise ValueError(f"no default split sizes for {len(item_ids)} items")
        counts = SPLIT_COUNTS[len(item_ids)]
    counts = tuple(int(c) for c in counts)
    if len(counts) != 3 or min(counts) < 0 or sum(counts) != len(item_ids):
        raise ValueError(f"counts {counts} must be three sizes summing to {len(item_ids)}")
    rng = np.random.default_rng(seed)
    a, b, _ = counts
    splits = []
    for _ in range(n_splits):
        order = rng.permutation(len(item_ids))
        ids = [item_ids[i] for i in order]
        splits.append((tuple(ids[:a]), tuple(ids[a : a + b]), tuple(ids[a + b :])))
    return SplitSet(tuple(splits), int(seed))


def write_wav(path, samples, sample_rate=SAMPLE_RATE):
    """Mono 32-bit float WAV."""
    wavfile.write(str(path), sample_rate, np.asarray(samples, dtype="<f4"))


def read_wav(path):
    sr, data = wavfile.read(str(path))
    if data.ndim != 1:
        raise ValueError(f"{path}: expected mono audio, got shape {data.shape}")
    if data.dtype.kind in "iu":
        data = data / float(np.iinfo(data.dtype).max)
    return AudioBuffer(data.astype(np.float64), sr)


def save_dataset(dataset, out_dir, splits=None):
    """Write every item as input/target WAVs plus ``manifest.json``."""
    out = Path(out_dir)
    (out / "audio").mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(len(dataset)):
        item = dataset[i]
        rel = {"input": f"audio/{item.id}-input.wav", "target": f"audio/{item.id}-target.wav"}
        write_wav(out / rel["input"], item.input.samples, item.input.sample_rate)
        write_wav(out / rel["target"], item.target.samples, item.target.sample_rate)
        paths.append(rel)
    manifest = dataset.manifest(paths)
    if splits is not None:
        manifest["splits"] = splits.to_dict()
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return out / "manifest.json"


def load_dataset(manifest_path):
    """Read items written by :func:`save_dataset` (float32 precision)."""
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    root = manifest_path.parent
    items = []
    for entry in manifest["items"]:
        s = CompressorSettings(**entry["controls"]["physical"])
        items.append(
            DatasetItem(
                entry["id"],
                read_wav(root / entry["input"]),
                read_wav(root / entry["target"]),
                ControlVector.from_settings(s),
            )
        )
    return items, manifest
