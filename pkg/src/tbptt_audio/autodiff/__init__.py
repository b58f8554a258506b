"""Minimal reverse-mode differentiation for the SPTMod layers."""

from . import ops
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import grad_check, relative_error
from .module import Module, ModuleList, kaiming_uniform
from .tensor import (
    NonFiniteError,
    Parameter,
    ShapeError,
    Tape,
    Tensor,
    active_tape,
    as_tensor,
    record,
)

__all__ = [
    "ops",
    "Tensor",
    "Parameter",
    "Tape",
    "ShapeError",
    "NonFiniteError",
    "active_tape",
    "as_tensor",
    "record",
    "grad_check",
    "relative_error",
    "Module",
    "ModuleList",
    "kaiming_uniform",
    "save_checkpoint",
    "load_checkpoint",
]
