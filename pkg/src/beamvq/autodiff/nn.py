"""Layer-level ops: direct convolution, nearest upsampling, affine maps.

Image tensors are channels-last (N, H, W, C) and convolution kernels are
(kh, kw, C_in, C_out), so the im2col matrix multiplies the reshaped kernel
without any transposes.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError
from .tensor import Tensor


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int, ho: int, wo: int) -> np.ndarray:
    # (N, Hp, Wp, C) -> (N*Ho*Wo, kh*kw*C), column order (i, j, c)
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::stride, ::stride][:, :ho, :wo]
    return np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3)).reshape(xp.shape[0] * ho * wo, -1)


def _pad_hw(x: np.ndarray, top: int, bottom: int, left: int, right: int) -> np.ndarray:
    if not (top or bottom or left or right):
        return x
    n, h, w, c = x.shape
    out = np.zeros((n, h + top + bottom, w + left + right, c), dtype=x.dtype)
    out[:, top : top + h, left : left + w, :] = x
    return out


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, pad: int = 0) -> Tensor:
    """2D cross-correlation of ``x`` (N, H, W, C) with ``w`` (kh, kw, C, O), zero padding."""
    if x.data.ndim != 4 or w.data.ndim != 4 or x.shape[3] != w.shape[2]:
        raise ShapeError("conv2d", x.shape, w.shape)
    kh, kw, c, o = w.shape
    if b is not None and b.shape != (o,):
        raise ShapeError("conv2d bias", b.shape, (o,))
    n, h, wd, _ = x.shape
    hp, wp = h + 2 * pad, wd + 2 * pad
    if hp < kh or wp < kw:
        raise ShapeError("conv2d", x.shape, w.shape)
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    xp = _pad_hw(x.data, pad, pad, pad, pad)
    cols = _im2col(xp, kh, kw, stride, ho, wo)
    wmat = w.data.reshape(kh * kw * c, o)
    out = cols @ wmat
    if b is not None:
        out += b.data
    out = out.reshape(n, ho, wo, o)

    def backward(g):
        g2 = g.reshape(-1, o)
        dw = (cols.T @ g2).reshape(w.shape) if w.requires_grad else None
        db = g2.sum(axis=0) if b is not None and b.requires_grad else None
        dx = None
        if x.requires_grad:
            # input gradient = full correlation of the (dilated) output
            # gradient with the spatially flipped, channel-swapped kernel
            if stride > 1:
                gd = np.zeros((n, stride * (ho - 1) + 1, stride * (wo - 1) + 1, o), dtype=g.dtype)
                gd[:, ::stride, ::stride, :] = g
            else:
                gd = g
            hd, wdd = gd.shape[1], gd.shape[2]
            gp = _pad_hw(gd, kh - 1, kh - 1 + hp - (hd + kh - 1), kw - 1, kw - 1 + wp - (wdd + kw - 1))
            wflip = np.ascontiguousarray(w.data[::-1, ::-1].transpose(0, 1, 3, 2)).reshape(kh * kw * o, c)
            dxp = (_im2col(gp, kh, kw, 1, hp, wp) @ wflip).reshape(n, hp, wp, c)
            dx = np.ascontiguousarray(dxp[:, pad : pad + h, pad : pad + wd, :]) if pad else dxp
        return (dx, dw, db) if b is not None else (dx, dw)

    parents = (x, w, b) if b is not None else (x, w)
    return Tensor._make(out, parents, backward, "conv2d")


def upsample2x(x: Tensor) -> Tensor:
    """Nearest-neighbour 2x upsampling of (N, H, W, C)."""
    if x.data.ndim != 4:
        raise ShapeError("upsample2x", x.shape, ("N", "H", "W", "C"))
    n, h, w, c = x.shape
    out = np.broadcast_to(x.data[:, :, None, :, None, :], (n, h, 2, w, 2, c)).reshape(n, 2 * h, 2 * w, c)
    return Tensor._make(out, (x,), lambda g: (g.reshape(n, h, 2, w, 2, c).sum(axis=(2, 4)),), "upsample2x")


def _phase_maps(k: int) -> tuple[np.ndarray, int]:
    # A[a][off, i]: kernel tap i of the upsampled grid lands on low-res offset off for output phase a
    r = k // 2
    half = (r + 1) // 2
    kk = 2 * half + 1
    maps = np.zeros((2, kk, k))
    for a in range(2):
        for i in range(-r, r + 1):
            maps[a, (a + i) // 2 + half, i + r] = 1.0
    return maps, half


def phase_kernel(w: Tensor) -> Tensor:
    """Fold a kernel applied after 2x nearest upsampling into a low-res kernel.

    (k, k, C, O) -> (kk, kk, C, 4*O), output channels ordered (phase_row,
    phase_col, o).
    """
    k, _, c, o = w.shape
    maps, _ = _phase_maps(k)
    maps = maps.astype(w.dtype)
    out = np.einsum("axi,byj,ijco->xycabo", maps, maps, w.data)
    kk = out.shape[0]
    out = np.ascontiguousarray(out).reshape(kk, kk, c, 4 * o)

    def backward(g):
        g6 = g.reshape(kk, kk, c, 2, 2, o)
        return (np.einsum("axi,byj,xycabo->ijco", maps, maps, g6),)

    return Tensor._make(out, (w,), backward, "phase_kernel")


def pixel_shuffle2x(x: Tensor) -> Tensor:
    """(N, H, W, 4*O) with channels (row phase, col phase, o) -> (N, 2H, 2W, O)."""
    n, h, w, c4 = x.shape
    if c4 % 4:
        raise ShapeError("pixel_shuffle2x", x.shape, ("N", "H", "W", "4*O"))
    o = c4 // 4
    out = np.ascontiguousarray(x.data.reshape(n, h, w, 2, 2, o).transpose(0, 1, 3, 2, 4, 5)).reshape(n, 2 * h, 2 * w, o)

    def backward(g):
        g6 = g.reshape(n, h, 2, w, 2, o).transpose(0, 1, 3, 2, 4, 5)
        return (np.ascontiguousarray(g6).reshape(n, h, w, c4),)

    return Tensor._make(out, (x,), backward, "pixel_shuffle2x")


def upconv2d(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Decoder block: 2x nearest upsample followed by a same-size convolution.

    Evaluated exactly at low resolution: each of the four output phases of
    the upsampled convolution is a convolution of ``x`` with a folded kernel.
    """
    if x.data.ndim != 4 or w.data.ndim != 4 or x.shape[3] != w.shape[2]:
        raise ShapeError("upconv2d", x.shape, w.shape)
    _, half = _phase_maps(w.shape[0])
    low = conv2d(x, phase_kernel(w), None, stride=1, pad=half)
    out = pixel_shuffle2x(low)
    if b is None:
        return out
    return add_bias(out, b)


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """Add a per-channel bias along the last axis."""
    if b.data.ndim != 1 or x.shape[-1] != b.shape[0]:
        raise ShapeError("add_bias", x.shape, b.shape)
    axes = tuple(range(x.data.ndim - 1))
    return Tensor._make(x.data + b.data, (x, b), lambda g: (g, g.sum(axis=axes)), "add_bias")


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """``x @ w + b`` for x (M, in), w (in, out), b (out,)."""
    if x.data.ndim != 2 or w.data.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeError("linear", x.shape, w.shape)
    if b is not None and b.shape != (w.shape[1],):
        raise ShapeError("linear bias", b.shape, (w.shape[1],))
    xd, wd = x.data, w.data
    out = xd @ wd
    if b is not None:
        out += b.data

    def backward(g):
        dx = g @ wd.T if x.requires_grad else None
        dw = xd.T @ g if w.requires_grad else None
        if b is None:
            return dx, dw
        return dx, dw, g.sum(axis=0)

    parents = (x, w, b) if b is not None else (x, w)
    return Tensor._make(out, parents, backward, "linear")


def add_const(x: Tensor, arr: np.ndarray) -> Tensor:
    """Add a constant (non-differentiable) array of the same shape."""
    if x.shape != arr.shape:
        raise ShapeError("add_const", x.shape, arr.shape)
    return Tensor._make(x.data + arr.astype(x.dtype, copy=False), (x,), lambda g: (g,), "add_const")
