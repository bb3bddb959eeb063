"""Analytic and random divergence-free velocity fields."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import DataError
from .field import Boundary, FieldTensor


def grid_coords(height: int, width: int, dx: float, dy: float) -> tuple[np.ndarray, np.ndarray]:
    """Meshgrid (X, Y) with x along columns and y along rows."""
    x = np.arange(width) * dx
    y = np.arange(height) * dy
    return np.meshgrid(x, y)


def random_streamfunction(height: int, width: int, kmax: int = 4, seed: int = 0) -> np.ndarray:
    """Band-limited periodic streamfunction with random Fourier coefficients."""
    rng = np.random.default_rng(seed)
    jj, ii = np.meshgrid(np.arange(width), np.arange(height))
    psi = np.zeros((height, width))
    for ky in range(-kmax, kmax + 1):
        for kx in range(0, kmax + 1):
            if kx == 0 and ky <= 0:
                continue
            a, b = rng.normal(size=2) / (1 + kx * kx + ky * ky)
            phase = 2 * np.pi * (kx * jj / width + ky * ii / height)
            psi += a * np.cos(phase) + b * np.sin(phase)
    return psi


def _central(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (np.roll(a, -1, axis=axis) - np.roll(a, 1, axis=axis)) / (2 * h)


def _spectral(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    n = a.shape[axis]
    k = 2 * np.pi * np.fft.fftfreq(n, d=h)
    if n % 2 == 0:
        k[n // 2] = 0.0
    shape = [1, 1]
    shape[axis] = n
    return np.real(np.fft.ifft2(1j * k.reshape(shape) * np.fft.fft2(a)))


def synth_divfree(height: int, width: int, psi: np.ndarray | Callable | None = None, *,
                  dx: float | None = None, dy: float | None = None, frames: int = 1,
                  boundary: Boundary | str = Boundary.PERIODIC, method: str = "discrete",
                  seed: int = 0) -> FieldTensor:
    """Velocity field (u, v) = (d psi/dy, -d psi/dx), float64.

    ``psi`` may be an (H, W) array, a callable ``psi(X, Y)`` evaluated on
    the grid, or None for a random band-limited field.  ``method`` picks
    the derivative: "discrete" uses the same periodic central differences
    as the divergence metric (so the discrete divergence cancels exactly),
    "spectral" is exact for band-limited psi.  Default spacing makes each
    axis span 2*pi.  ``frames`` > 1 modulates the amplitude in time.
    """
    if Boundary.parse(boundary) != Boundary.PERIODIC:
        raise DataError("divergence-free synthesis needs a periodic grid")
    dx = 2 * np.pi / width if dx is None else dx
    dy = 2 * np.pi / height if dy is None else dy
    if psi is None:
        psi = random_streamfunction(height, width, seed=seed)
    elif callable(psi):
        X, Y = grid_coords(height, width, dx, dy)
        psi = psi(X, Y)
    psi = np.broadcast_to(np.asarray(psi, dtype=np.float64), (height, width))
    if method == "discrete":
        deriv = _central
    elif method == "spectral":
        deriv = _spectral
    else:
        raise DataError(f"unknown derivative method {method!r}")
    u = deriv(psi, 0, dy)
    v = -deriv(psi, 1, dx)
    amp = 1.0 + 0.5 * np.sin(np.arange(frames) * 2 * np.pi / max(frames, 1)) if frames > 1 else np.ones(1)
    values = np.stack([np.stack([a * u, a * v]) for a in amp])
    return FieldTensor(values, dx, dy, Boundary.PERIODIC)
