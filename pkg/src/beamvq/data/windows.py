"""Time-block splits, windowing and per-channel normalisation."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..errors import DataError
from .field import Dataset, FieldTensor, NormStats, Provenance, SampleWindow

STD_FLOOR = 1e-12


def window_count(total: int, t_in: int, t_out: int, stride: int) -> int:
    if total < t_in + t_out:
        return 0
    return (total - t_in - t_out) // stride + 1


def window_dataset(field: FieldTensor, t_in: int, t_out: int, stride: int = 1, id_offset: int = 0,
                   source: dict | None = None) -> Dataset:
    """Chronological (input, target) windows cut from one trajectory."""
    if min(t_in, t_out, stride) < 1:
        raise DataError("t_in, t_out and stride must be positive")
    n = window_count(field.T, t_in, t_out, stride)
    if n == 0:
        raise DataError(f"trajectory of {field.T} frames is too short for windows of {t_in}+{t_out}")
    vals = field.values
    samples = []
    for k in range(n):
        s = k * stride
        samples.append(SampleWindow(vals[s : s + t_in].copy(), vals[s + t_in : s + t_in + t_out].copy(),
                                    Provenance.ORIGINAL, id_offset + k))
    return Dataset(samples, field.dx, field.dy, field.boundary, source=dict(source or {}))


def split_by_time(field: FieldTensor, fractions=(0.7, 0.15, 0.15)) -> list[FieldTensor]:
    """Cut a trajectory into contiguous, non-overlapping time blocks."""
    fr = np.asarray(fractions, dtype=np.float64)
    if (fr <= 0).any() or abs(fr.sum() - 1.0) > 1e-9:
        raise DataError(f"split fractions must be positive and sum to 1, got {fractions}")
    edges = np.round(np.cumsum(np.concatenate([[0.0], fr])) * field.T).astype(int)
    edges[-1] = field.T
    return [field.with_values(field.values[a:b]) for a, b in zip(edges[:-1], edges[1:])]


def merge(datasets: list[Dataset]) -> Dataset:
    samples = [s for d in datasets for s in d.samples]
    first = datasets[0]
    return Dataset(samples, first.dx, first.dy, first.boundary, first.stats, dict(first.source))


def compute_stats(dataset: Dataset) -> NormStats:
    """Per-channel mean/std over original-provenance frames only."""
    orig = dataset.originals()
    if not orig:
        raise DataError("normalisation statistics need at least one original sample")
    frames = np.concatenate([np.concatenate([s.inputs, s.target]) for s in orig]).astype(np.float64)
    mean = frames.mean(axis=(0, 2, 3))
    std = frames.std(axis=(0, 2, 3))
    std = np.where(std > STD_FLOOR * np.maximum(1.0, np.abs(mean)), std, 1.0)
    return NormStats(mean, std)


def _bcast(stats: NormStats, arr: np.ndarray):
    # channel axis is third from the end: (..., C, H, W)
    shape = (-1, 1, 1)
    return stats.mean.reshape(shape), stats.std.reshape(shape)


def normalize_array(arr: np.ndarray, stats: NormStats) -> np.ndarray:
    mean, std = _bcast(stats, arr)
    return ((arr - mean) / std).astype(arr.dtype)


def denormalize(arr: np.ndarray, stats: NormStats) -> np.ndarray:
    mean, std = _bcast(stats, arr)
    return (arr * std + mean).astype(arr.dtype)


def normalize(dataset: Dataset, stats: NormStats | None = None) -> Dataset:
    """Return a normalised copy; statistics default to the dataset's originals."""
    stats = compute_stats(dataset) if stats is None else stats
    samples = [replace(s, inputs=normalize_array(s.inputs, stats), target=normalize_array(s.target, stats))
               for s in dataset.samples]
    return Dataset(samples, dataset.dx, dataset.dy, dataset.boundary, stats, dict(dataset.source))
