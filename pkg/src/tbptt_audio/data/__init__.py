"""Reference compressor, synthetic source audio and dataset assembly."""

from .compressor import (
    DETECTOR_TIME,
    SAMPLE_RATE,
    compressor_process,
    detect_level,
    one_pole_coefficient,
    smooth_gain,
    static_curve,
)
from .controls import (
    CONTROL_NAMES,
    CONTROL_VALUES,
    CompressorSettings,
    ControlVector,
    settings_from_indices,
    settings_from_unit,
    snapshot_settings,
)
from .dataset import (
    DATASET_KINDS,
    ITEM_COUNTS,
    SPLIT_COUNTS,
    Dataset,
    DatasetItem,
    SplitSet,
    build_dataset,
    dataset_settings,
    load_dataset,
    make_splits,
    read_wav,
    render_input,
    render_target,
    save_dataset,
    write_wav,
)
from .sources import AudioBuffer, gen_music_surrogate, gen_procedural_events, gen_tone_staircase, remove_dc

__all__ = [
    "SAMPLE_RATE",
    "DETECTOR_TIME",
    "compressor_process",
    "detect_level",
    "one_pole_coefficient",
    "smooth_gain",
    "static_curve",
    "CONTROL_NAMES",
    "CONTROL_VALUES",
    "CompressorSettings",
    "ControlVector",
    "settings_from_indices",
    "settings_from_unit",
    "snapshot_settings",
    "DATASET_KINDS",
    "ITEM_COUNTS",
    "SPLIT_COUNTS",
    "Dataset",
    "DatasetItem",
    "SplitSet",
    "build_dataset",
    "dataset_settings",
    "load_dataset",
    "make_splits",
    "read_wav",
    "render_input",
    "render_target",
    "save_dataset",
    "write_wav",
    "AudioBuffer",
    "gen_music_surrogate",
    "gen_procedural_events",
    "gen_tone_staircase",
    "remove_dc",
]
