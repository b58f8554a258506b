"""Compressor settings and their normalized control-vector form.

Each control is a discrete panel: a list of physical values. The normalized
value of a setting is its index divided by ``len(values) - 1``, so every
control lives in ``[0, 1]``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

__all__ = [
    "CONTROL_NAMES",
    "CONTROL_VALUES",
    "CompressorSettings",
    "ControlVector",
    "snapshot_settings",
    "settings_from_indices",
    "settings_from_unit",
]

CONTROL_NAMES = ("threshold", "attack", "ratio", "release", "knee", "thrust")

CONTROL_VALUES = {
    "threshold": tuple(float(v) for v in range(-20, 21, 4)),  # dB
    "attack": (0.1e-3, 0.3e-3, 1e-3, 3e-3, 10e-3, 30e-3),  # s
    "ratio": (1.5, 2.0, 3.0, 4.0, 6.0, 10.0),
    "release": (0.05, 0.1, 0.3, 0.5, 1.0, 2.0, 3.0),  # s
    "knee": (0.0, 3.0, 6.0, 9.0, 12.0),  # dB
    "thrust": (False, True),
}


@dataclass(frozen=True)
class CompressorSettings:
    threshold: float = 0.0
    attack: float = 1e-3
    ratio: float = 3.0
    release: float = 3.0
    knee: float = 6.0
    thrust: bool = False
    thrust_cutoff: float = 500.0

    def __post_init__(self):
        if self.ratio < 1:
            raise ValueError(f"ratio must be >= 1, got {self.ratio}")
        if self.attack <= 0 or self.release <= 0:
            raise ValueError("attack and release must be positive")
        if self.knee < 0:
            raise ValueError(f"knee must be >= 0, got {self.knee}")

    def to_dict(self):
        return asdict(self)

    def indices(self):
        """Panel index of every control; raises if a value is off-panel."""
        out = []
        for name in CONTROL_NAMES:
            values = CONTROL_VALUES[name]
            value = getattr(self, name)
            matches = [i for i, v in enumerate(values) if np.isclose(float(v), float(value))]
            if not matches:
                raise ValueError(f"{name}={value!r} is not one of {values}")
            out.append(matches[0])
        return out


@dataclass(frozen=True)
class ControlVector:
    """Normalized controls (order: ``CONTROL_NAMES``) plus their settings."""

    values: tuple
    settings: CompressorSettings

    @classmethod
    def from_settings(cls, settings):
        idx = settings.indices()
        vals = tuple(i / (len(CONTROL_VALUES[n]) - 1) for i, n in zip(idx, CONTROL_NAMES))
        return cls(vals, settings)

    def array(self, dtype=np.float64):
        return np.asarray(self.values, dtype=dtype)

    def to_dict(self):
        return {"normalized": list(self.values), "physical": self.settings.to_dict()}


def settings_from_indices(indices, **overrides):
    kwargs = {n: CONTROL_VALUES[n][int(i)] for n, i in zip(CONTROL_NAMES, indices)}
    kwargs.update(overrides)
    return CompressorSettings(**kwargs)


def settings_from_unit(u):
    """Map a point of the unit cube to panel values (equal-width strata)."""
    idx = [
        min(int(np.floor(float(x) * len(CONTROL_VALUES[n]))), len(CONTROL_VALUES[n]) - 1)
        for x, n in zip(u, CONTROL_NAMES)
    ]
    return settings_from_indices(idx)


def snapshot_settings():
    """Every control at its middle panel position, release at maximum."""
    idx = [int(np.ceil(len(CONTROL_VALUES[n]) / 2)) - 1 for n in CONTROL_NAMES]
    idx[CONTROL_NAMES.index("release")] = len(CONTROL_VALUES["release"]) - 1
    return settings_from_indices(idx)
