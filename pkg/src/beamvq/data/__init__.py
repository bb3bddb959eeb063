from .field import Boundary, Dataset, FieldTensor, NormStats, Provenance, SampleWindow
from .io import load_dataset, save_dataset
from .swe import SWEConfig, cfl_number, generate_swe, total_volume
from .synth import random_streamfunction, synth_divfree
from .windows import (
    compute_stats,
    denormalize,
    merge,
    normalize,
    normalize_array,
    split_by_time,
    window_count,
    window_dataset,
)

__all__ = [
    "Boundary", "Dataset", "FieldTensor", "NormStats", "Provenance", "SWEConfig", "SampleWindow",
    "cfl_number", "compute_stats", "denormalize", "generate_swe", "load_dataset", "merge", "normalize",
    "normalize_array", "random_streamfunction", "save_dataset", "split_by_time", "synth_divfree",
    "total_volume", "window_count", "window_dataset",
]
