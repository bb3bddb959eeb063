"""Field tensors, sample windows and datasets."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from ..errors import DataError


class Boundary(IntEnum):
    PERIODIC = 0
    CLAMPED = 1

    @classmethod
    def parse(cls, value) -> "Boundary":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                raise DataError(f"unknown boundary tag {value!r}") from None
        return cls(int(value))


class Provenance(IntEnum):
    ORIGINAL = 0
    PSEUDO = 1


@dataclass
class FieldTensor:
    """A (T, C, H, W) trajectory with grid spacing and boundary tag.

    Channel order is (u, v, h) for shallow-water data; velocity readers
    use channels 0 and 1.
    """

    values: np.ndarray
    dx: float = 1.0
    dy: float = 1.0
    boundary: Boundary = Boundary.PERIODIC

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.dtype not in (np.float32, np.float64):
            self.values = self.values.astype(np.float32)
        if self.values.ndim != 4 or min(self.values.shape) < 1:
            raise DataError(f"field must be (T, C, H, W) with positive extents, got {self.values.shape}")
        if not (self.dx > 0 and self.dy > 0):
            raise DataError(f"grid spacing must be positive, got dx={self.dx}, dy={self.dy}")
        if not np.isfinite(self.values).all():
            raise DataError("field contains non-finite values")
        self.boundary = Boundary.parse(self.boundary)

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.values.shape

    @property
    def T(self) -> int:
        return self.values.shape[0]

    def with_values(self, values: np.ndarray) -> "FieldTensor":
        return FieldTensor(values, self.dx, self.dy, self.boundary)


@dataclass
class SampleWindow:
    inputs: np.ndarray  # (T_in, C, H, W)
    target: np.ndarray  # (T_out, C, H, W)
    provenance: Provenance = Provenance.ORIGINAL
    sample_id: int = -1

    def __post_init__(self):
        if self.inputs.ndim != 4 or self.target.ndim != 4 or self.inputs.shape[1:] != self.target.shape[1:]:
            raise DataError(f"input {self.inputs.shape} and target {self.target.shape} disagree on (C, H, W)")
        self.provenance = Provenance(self.provenance)


@dataclass
class NormStats:
    mean: np.ndarray  # (C,)
    std: np.ndarray  # (C,)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64))


@dataclass
class Dataset:
    samples: list[SampleWindow]
    dx: float = 1.0
    dy: float = 1.0
    boundary: Boundary = Boundary.PERIODIC
    stats: NormStats | None = None
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.samples:
            raise DataError("dataset must be nonempty")
        first = self.samples[0]
        for s in self.samples:
            if s.inputs.shape != first.inputs.shape or s.target.shape != first.target.shape:
                raise DataError("all samples in a dataset must share window shapes")
        self.boundary = Boundary.parse(self.boundary)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def t_in(self) -> int:
        return self.samples[0].inputs.shape[0]

    @property
    def t_out(self) -> int:
        return self.samples[0].target.shape[0]

    @property
    def frame_shape(self) -> tuple[int, int, int]:
        return self.samples[0].inputs.shape[1:]

    def inputs(self) -> np.ndarray:
        return np.stack([s.inputs for s in self.samples])

    def targets(self) -> np.ndarray:
        return np.stack([s.target for s in self.samples])

    def originals(self) -> list[SampleWindow]:
        return [s for s in self.samples if s.provenance == Provenance.ORIGINAL]
