"""Architecture descriptions and named presets."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

__all__ = [
    "ModBlockConfig",
    "SptmodConfig",
    "SpnConfig",
    "PRESETS",
    "preset",
    "NUM_CONTROLS",
]

NUM_CONTROLS = 6


def _positive(owner, **values):
    for name, v in values.items():
        if int(v) != v or v < 1:
            raise ValueError(f"{owner}.{name} must be a positive integer, got {v!r}")


@dataclass(frozen=True)
class ModBlockConfig:
    out_channels: int
    kernel: int
    dilation: int = 1
    pool: int = 64
    lstm_hidden: int = 31
    film_hidden: int = 26

    def __post_init__(self):
        _positive("ModBlockConfig", **asdict(self))

    @property
    def span(self):
        """Samples a valid convolution removes: ``(kernel - 1) * dilation``."""
        return (self.kernel - 1) * self.dilation


@dataclass(frozen=True)
class SpnConfig:
    num_blocks: int = 7
    channels: int = 16
    kernel: int = 38
    pool: int = 4
    film_hidden: int = 8
    use_reference: bool = True

    def __post_init__(self):
        _positive(
            "SpnConfig",
            num_blocks=self.num_blocks,
            channels=self.channels,
            kernel=self.kernel,
            pool=self.pool,
            film_hidden=self.film_hidden,
        )

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class SptmodConfig:
    blocks: tuple
    num_controls: int = NUM_CONTROLS
    preset: str = "custom"
    spn: SpnConfig = field(default_factory=SpnConfig)

    def __post_init__(self):
        blocks = tuple(b if isinstance(b, ModBlockConfig) else ModBlockConfig(**b) for b in self.blocks)
        if not blocks:
            raise ValueError("SptmodConfig needs at least one block")
        if self.num_controls < 0:
            raise ValueError("num_controls must be >= 0")
        object.__setattr__(self, "blocks", blocks)
        if isinstance(self.spn, dict):
            object.__setattr__(self, "spn", SpnConfig(**self.spn))

    @property
    def state_size(self):
        """Width of the flat state vector: ``sum(2 * lstm_hidden)``."""
        return sum(2 * b.lstm_hidden for b in self.blocks)

    def to_dict(self):
        return {
            "blocks": [asdict(b) for b in self.blocks],
            "num_controls": self.num_controls,
            "preset": self.preset,
            "spn": self.spn.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            blocks=tuple(ModBlockConfig(**b) for b in d["blocks"]),
            num_controls=d["num_controls"],
            preset=d.get("preset", "custom"),
            spn=SpnConfig(**d["spn"]),
        )


def _sptmod24():
    blocks = tuple(
        ModBlockConfig(out_channels=c, kernel=k, pool=64, lstm_hidden=31, film_hidden=26)
        for c, k in zip((21, 19, 32), (9, 29, 25))
    )
    return SptmodConfig(blocks, preset="sptmod24", spn=SpnConfig())


def _sptmod25():
    blocks = tuple(
        ModBlockConfig(out_channels=15, kernel=3, pool=64, lstm_hidden=31, film_hidden=32)
        for _ in range(4)
    )
    return SptmodConfig(blocks, preset="sptmod25", spn=SpnConfig(film_hidden=32))


def _mini():
    """Small two-block model used for desk-scale checks."""
    blocks = tuple(
        ModBlockConfig(out_channels=6, kernel=3, pool=16, lstm_hidden=8, film_hidden=8)
        for _ in range(2)
    )
    spn = SpnConfig(num_blocks=4, channels=8, kernel=16, pool=10, film_hidden=8)
    return SptmodConfig(blocks, preset="mini", spn=spn)


PRESETS = {"sptmod24": _sptmod24, "sptmod25": _sptmod25, "mini": _mini}


def preset(name, num_controls=NUM_CONTROLS):
    try:
        cfg = PRESETS[name.lower()]()
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    if num_controls != cfg.num_controls:
        cfg = SptmodConfig(cfg.blocks, num_controls, cfg.preset, cfg.spn)
    return cfg
