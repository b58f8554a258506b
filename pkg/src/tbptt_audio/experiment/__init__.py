"""Grid sweeps over (N, B, L), aggregation and table emission."""

from .aggregate import TABLE_KINDS, CellStats, aggregate, emit_tables, estimate_train_time, mad, median, read_table
from .desk import DESK, run_desk
from .grid import GridSpec, calibrate_seconds_per_iteration, read_records, run_grid, run_id, run_seed

__all__ = [
    "DESK",
    "run_desk",
    "TABLE_KINDS",
    "CellStats",
    "aggregate",
    "emit_tables",
    "estimate_train_time",
    "mad",
    "median",
    "read_table",
    "GridSpec",
    "calibrate_seconds_per_iteration",
    "read_records",
    "run_grid",
    "run_id",
    "run_seed",
]
