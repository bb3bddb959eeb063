"""Divergence, turbulence kinetic energy and radial energy spectra."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..data.field import Boundary, FieldTensor
from ..errors import DataError, NumericError


def _as_field(seq) -> FieldTensor:
    return seq if isinstance(seq, FieldTensor) else FieldTensor(np.asarray(seq))


def _velocity(field: FieldTensor) -> tuple[np.ndarray, np.ndarray]:
    if field.values.shape[1] < 2:
        raise DataError(f"need at least two velocity channels, field has {field.values.shape[1]}")
    v = field.values.astype(np.float64, copy=False)
    return v[:, 0], v[:, 1]


def _ddx(a: np.ndarray, axis: int, h: float, boundary: Boundary) -> np.ndarray:
    if boundary == Boundary.PERIODIC:
        return (np.roll(a, -1, axis=axis) - np.roll(a, 1, axis=axis)) / (2 * h)
    # central inside, one-sided first order at the two edges
    return np.gradient(a, h, axis=axis, edge_order=1)


def divergence_field(seq) -> np.ndarray:
    """du/dx + dv/dy per frame and point, x along W and y along H."""
    field = _as_field(seq)
    _, _, hgt, wid = field.shape
    if hgt < 3 or wid < 3:
        raise DataError(f"divergence stencil needs H, W >= 3, got {hgt}x{wid}")
    u, v = _velocity(field)
    return _ddx(u, 2, field.dx, field.boundary) + _ddx(v, 1, field.dy, field.boundary)


def mean_abs_divergence(seq) -> float:
    """Mean of |div w| over every grid point of every frame."""
    return float(np.mean(np.abs(divergence_field(seq))))


def tke(seq) -> tuple[np.ndarray, float]:
    """Per-pixel turbulence kinetic energy and its spatial mean.

    TKE = (var_t(u) + var_t(v)) / 2 with population variances over time.
    """
    field = _as_field(seq)
    if field.T < 2:
        raise DataError("TKE needs at least two frames")
    u, v = _velocity(field)
    per_pixel = 0.5 * (u.var(axis=0) + v.var(axis=0))
    return per_pixel, float(per_pixel.mean())


@dataclass
class SpectrumCurve:
    k: np.ndarray
    energy: np.ndarray

    @property
    def total(self) -> float:
        return float(self.energy.sum())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["k", "E"])
            for k, e in zip(self.k, self.energy):
                w.writerow([int(k), repr(float(e))])


def shell_index(height: int, width: int) -> np.ndarray:
    """Integer radial shell of every FFT mode.

    Wavenumbers are measured in units of the fundamental of the shorter
    side, so square grids get plain integer (kx, ky).
    """
    ky = np.fft.fftfreq(height) * height
    kx = np.fft.fftfreq(width) * width
    scale = min(height, width)
    kk = np.sqrt((kx[None, :] * scale / width) ** 2 + (ky[:, None] * scale / height) ** 2)
    return np.rint(kk).astype(np.int64)


def energy_spectrum(seq) -> SpectrumCurve:
    """Frame-averaged shell-binned kinetic energy of the velocity fluctuations.

    Fluctuations are taken about each frame's spatial mean; modal energy is
    (|u_hat|^2 + |v_hat|^2) / (2 (H W)^2), so the shells sum to
    (var u + var v) / 2.
    """
    field = _as_field(seq)
    u, v = _velocity(field)
    t, hgt, wid = u.shape
    up = u - u.mean(axis=(1, 2), keepdims=True)
    vp = v - v.mean(axis=(1, 2), keepdims=True)
    uh = np.fft.fft2(up)
    vh = np.fft.fft2(vp)
    modal = 0.5 * (np.abs(uh) ** 2 + np.abs(vh) ** 2) / float(hgt * wid) ** 2
    if not np.isfinite(modal).all():
        raise NumericError("non-finite FFT output in energy spectrum")
    modal = modal.mean(axis=0)
    shells = shell_index(hgt, wid)
    energy = np.bincount(shells.ravel(), weights=modal.ravel())
    return SpectrumCurve(np.arange(energy.size), energy)


def spectrum_distance(a: SpectrumCurve, b: SpectrumCurve) -> float:
    """L2 distance between log(1 + E) curves, zero-padding the shorter one."""
    n = max(a.energy.size, b.energy.size)
    ea = np.zeros(n)
    eb = np.zeros(n)
    ea[: a.energy.size] = a.energy
    eb[: b.energy.size] = b.energy
    return float(np.linalg.norm(np.log1p(ea) - np.log1p(eb)))


def spatial_variance(seq) -> float:
    """(var u + var v) / 2 with per-frame spatial variances, averaged over frames."""
    u, v = _velocity(_as_field(seq))
    return float(0.5 * (u.var(axis=(1, 2)) + v.var(axis=(1, 2))).mean())
