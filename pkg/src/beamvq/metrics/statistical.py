"""Pointwise error metrics and Gaussian-window SSIM."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate1d

from ..errors import DataError, ShapeError

SSIM_WINDOW = 7
SSIM_SIGMA = 1.5


def _pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeError("metric", p.shape, t.shape)
    return p, t


def mse(pred, truth) -> float:
    p, t = _pair(pred, truth)
    return float(np.mean((p - t) ** 2))


def rmse(pred, truth) -> float:
    return float(np.sqrt(mse(pred, truth)))


def rel_l2(pred, truth) -> float:
    p, t = _pair(pred, truth)
    denom = np.linalg.norm(t.ravel())
    if denom == 0:
        raise DataError("relative L2 error undefined for an all-zero truth tensor")
    return float(np.linalg.norm((p - t).ravel()) / denom)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = size // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    w = np.exp(-(x**2) / (2 * sigma**2))
    return w / w.sum()


def _filter_valid(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    # separable filter over the last two axes, keeping only fully-covered pixels
    r = w.size // 2
    out = correlate1d(a, w, axis=-1, mode="constant")
    out = correlate1d(out, w, axis=-2, mode="constant")
    return out[..., r : a.shape[-2] - r, r : a.shape[-1] - r]


def ssim(pred, truth, data_range: float | None = None) -> float:
    """Mean SSIM over all 2D planes of (..., H, W) arrays.

    C1 = (0.01 L)^2, C2 = (0.03 L)^2 with L the truth's value range; local
    statistics use a 7x7 Gaussian window (sigma 1.5) over valid pixels.
    """
    p, t = _pair(pred, truth)
    if p.ndim < 2 or min(p.shape[-2:]) < SSIM_WINDOW:
        raise DataError(f"SSIM needs planes of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {p.shape}")
    L = float(t.max() - t.min()) if data_range is None else float(data_range)
    if L <= 0:
        L = 1.0
    c1 = (0.01 * L) ** 2
    c2 = (0.03 * L) ** 2
    w = gaussian_window()
    mu_p = _filter_valid(p, w)
    mu_t = _filter_valid(t, w)
    s_pp = _filter_valid(p * p, w) - mu_p**2
    s_tt = _filter_valid(t * t, w) - mu_t**2
    s_pt = _filter_valid(p * t, w) - mu_p * mu_t
    num = (2 * mu_p * mu_t + c1) * (2 * s_pt + c2)
    den = (mu_p**2 + mu_t**2 + c1) * (s_pp + s_tt + c2)
    return float(np.mean(num / den))
