"""Effect processor, state predictor and padding-free length planning."""

from .config import NUM_CONTROLS, PRESETS, ModBlockConfig, SpnConfig, SptmodConfig, preset
from .context import BlockState, ContractError, RecurrentContext
from .lengths import (
    ConfigurationError,
    LengthPlan,
    solve_lengths,
    spn_lengths,
    spn_lookback,
    tfilm_lag,
)
from .sptmod import SPTMod, make_cached_context

__all__ = [
    "NUM_CONTROLS",
    "PRESETS",
    "preset",
    "ModBlockConfig",
    "SptmodConfig",
    "SpnConfig",
    "BlockState",
    "RecurrentContext",
    "ContractError",
    "ConfigurationError",
    "LengthPlan",
    "solve_lengths",
    "spn_lengths",
    "spn_lookback",
    "tfilm_lag",
    "SPTMod",
    "make_cached_context",
]

from .spn import SPN  # noqa: E402

__all__.append("SPN")
