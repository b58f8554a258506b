"""Truncated backpropagation through time for the effect processor."""

from .loop import (
    PRECISIONS,
    RunRecord,
    TrainConfig,
    build_models,
    tbptt_group_step,
    train,
    training_items,
    validate,
    validate_st,
    validate_wt,
)
from .optim import Adam, adam_update
from .plan import BatchGroup, EpochSchedule, ShortItemWarning, TbpttPlan, make_group, plan_batches, window_starts

__all__ = [
    "PRECISIONS",
    "RunRecord",
    "TrainConfig",
    "build_models",
    "tbptt_group_step",
    "train",
    "training_items",
    "validate",
    "validate_st",
    "validate_wt",
    "Adam",
    "adam_update",
    "BatchGroup",
    "EpochSchedule",
    "ShortItemWarning",
    "TbpttPlan",
    "make_group",
    "plan_batches",
    "window_starts",
]
