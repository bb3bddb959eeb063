"""``BVQD`` binary dataset files.

Header (little-endian): magic ``BVQD``, u32 version, u32 sample count,
u32 T_in, T_out, C, H, W, f32 dx, dy, u8 boundary tag.  Each sample is a
u8 provenance flag followed by the f32 input and target payloads.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import DataError, FormatError
from .field import Dataset, Provenance, SampleWindow

MAGIC = b"BVQD"
VERSION = 1
_HEADER = struct.Struct("<4sII5IffB")


def save_dataset(path, dataset: Dataset) -> None:
    if dataset is None or len(dataset) == 0:
        raise DataError("refusing to save an empty dataset")
    c, h, w = dataset.frame_shape
    header = _HEADER.pack(MAGIC, VERSION, len(dataset), dataset.t_in, dataset.t_out, c, h, w,
                          dataset.dx, dataset.dy, int(dataset.boundary))
    with open(path, "wb") as f:
        f.write(header)
        for s in dataset.samples:
            f.write(struct.pack("<B", int(s.provenance)))
            f.write(np.ascontiguousarray(s.inputs, dtype="<f4").tobytes())
            f.write(np.ascontiguousarray(s.target, dtype="<f4").tobytes())


def load_dataset(path) -> Dataset:
    buf = Path(path).read_bytes()
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic, not a BVQD dataset")
    if len(buf) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    _, version, count, t_in, t_out, c, h, w, dx, dy, boundary = _HEADER.unpack_from(buf)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported dataset version {version}")
    if count == 0:
        raise FormatError(f"{path}: dataset declares zero samples")
    n_in, n_out = t_in * c * h * w, t_out * c * h * w
    stride = 1 + 4 * (n_in + n_out)
    expected = _HEADER.size + count * stride
    if len(buf) != expected:
        raise FormatError(f"{path}: expected {expected} bytes for {count} samples, found {len(buf)} (truncated or padded)")
    samples = []
    pos = _HEADER.size
    for k in range(count):
        prov = buf[pos]
        if prov not in (0, 1):
            raise FormatError(f"{path}: sample {k} has invalid provenance flag {prov}")
        pos += 1
        x = np.frombuffer(buf, dtype="<f4", count=n_in, offset=pos).reshape(t_in, c, h, w).astype(np.float32)
        pos += 4 * n_in
        y = np.frombuffer(buf, dtype="<f4", count=n_out, offset=pos).reshape(t_out, c, h, w).astype(np.float32)
        pos += 4 * n_out
        samples.append(SampleWindow(x, y, Provenance(prov), k))
    return Dataset(samples, float(dx), float(dy), boundary)
