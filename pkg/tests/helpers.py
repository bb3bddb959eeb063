"""Shared oracles and tiny fixtures for the test suite."""

from __future__ import annotations

import numpy as np

from beamvq.autodiff import Tensor
from beamvq.backbone import BackboneConfig, Forecaster


def numeric_grad(f, arrays: list[np.ndarray], h: float = 1e-6) -> list[np.ndarray]:
    """Central finite differences of scalar f(*arrays) w.r.t. each array (float64)."""
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        it = np.nditer(a, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = a[i]
            a[i] = old + h
            fp = f(*arrays)
            a[i] = old - h
            fm = f(*arrays)
            a[i] = old
            g[i] = (fp - fm) / (2 * h)
        grads.append(g)
    return grads


def max_rel_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-8) -> float:
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def leaf(arr: np.ndarray) -> Tensor:
    return Tensor(arr, requires_grad=True)


def tiny_model(seed: int = 0, bank: int = 16, chunk: int = 1, t_in: int = 2, hw: int = 16,
               widths=(8, 8), dim: int = 8, quantize: bool = True) -> Forecaster:
    cfg = BackboneConfig(t_in=t_in, channels=3, height=hw, width=hw, widths=widths, code_dim=dim, chunk=chunk,
                         quantize=quantize)
    return Forecaster.create(cfg, bank_size=bank, seed=seed)


def random_window(model: Forecaster, seed: int = 0, scale: float = 1.0) -> np.ndarray:
    c = model.cfg
    rng = np.random.default_rng(seed)
    return (scale * rng.normal(size=(c.t_in, c.channels, c.height, c.width))).astype(np.float32)


def code_ranks(z: np.ndarray, codes: np.ndarray) -> np.ndarray:
    """Per-token code indices ordered by (float64 squared distance, index)."""
    z, codes = z.astype(np.float64), codes.astype(np.float64)
    out = []
    for q in z:
        d = [float(np.sum((q - e) ** 2)) for e in codes]
        out.append(sorted(range(len(codes)), key=lambda j: (d[j], j)))
    return np.array(out)


def tree_oracle(model: Forecaster, x: np.ndarray, k: int, depth: int, score_fn) -> list[list[tuple]]:
    """Enumerate every L-ary rank path to ``depth`` and replay the prefix-pruning rule.

    Returns, per level, the retained rank paths in order.  Each path's
    frames are rebuilt one state at a time, independent of the batched
    beam implementation.
    """
    cfg = model.cfg
    codes = model.bank.codes.data
    L = codes.shape[0]
    cache: dict[tuple, tuple[np.ndarray, np.ndarray, float]] = {(): (np.asarray(x, np.float32), x[:0], 0.0)}

    def node(path: tuple):
        if path in cache:
            return cache[path]
        window, frames, _ = node(path[:-1])
        z = model.encode(window[None]).data
        ranks = code_ranks(z, codes)
        state = codes[ranks[:, path[-1] - 1]]
        out = model.decode(Tensor(state), window[None, -1]).data[0]
        frames = np.concatenate([frames, out])
        result = (np.concatenate([window, out])[-cfg.t_in :], frames, float(score_fn(frames)))
        cache[path] = result
        return result

    # every path of every length is scored, including ranks above K
    paths = [()]
    for _ in range(depth):
        paths = [p + (r,) for p in paths for r in range(1, L + 1)]
        for p in paths:
            node(p)
    levels, kept = [], [()]
    for _ in range(depth):
        cands = [(cache[p + (r,)][2], i, r, p + (r,)) for i, p in enumerate(kept) for r in range(1, k + 1)]
        cands.sort(key=lambda c: (-c[0], c[1], c[2]))
        kept = [c[3] for c in cands[:k]]
        levels.append(kept)
    return levels


def tiny_dataset(n: int = 6, t_in: int = 2, t_out: int = 2, hw: int = 16, seed: int = 0, scale: float = 0.1):
    """Smooth random windows, small enough for end-to-end training tests."""
    from beamvq.data import Dataset, SampleWindow

    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(np.arange(hw), np.arange(hw), indexing="ij")
    out = []
    for i in range(n):
        ph = rng.uniform(0, 2 * np.pi, size=3)
        seq = np.stack([np.stack([np.sin(2 * np.pi * (xx + t) / hw + ph[c]) * np.cos(2 * np.pi * yy / hw)
                                  for c in range(3)]) for t in range(t_in + t_out)])
        seq = (scale * seq).astype(np.float32)
        out.append(SampleWindow(seq[:t_in], seq[t_in:], sample_id=i))
    return Dataset(out)
