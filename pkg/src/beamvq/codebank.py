"""Vector-quantisation code bank with top-K lookup.

Distances use the ``|z|^2 - 2 z.e + |e|^2`` expansion in float32.  Every
code whose approximate distance falls within a rounding band of the K-th
smallest is then re-scored exactly in float64, and the final order is
(exact distance, code index) so ties always go to the lower index.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, gather_rows, mean_all, sg, square, sub, sum_squares
from .errors import ShapeError

_EPS32 = float(np.finfo(np.float32).eps)
_BLOCK = 512


class CodeBank:
    def __init__(self, size: int = 1024, dim: int = 64, seed: int | np.random.Generator = 0,
                 codes: np.ndarray | None = None):
        if codes is None:
            rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
            bound = 1.0 / np.sqrt(dim)
            codes = rng.uniform(-bound, bound, size=(size, dim))
        codes = np.asarray(codes, dtype=np.float32)
        if codes.ndim != 2:
            raise ShapeError("CodeBank", codes.shape, ("L", "D"))
        if not np.isfinite(codes).all():
            raise ValueError("code bank contains non-finite values")
        self.codes = Tensor(codes, requires_grad=True, name="codebank")

    @property
    def size(self) -> int:
        return self.codes.shape[0]

    @property
    def dim(self) -> int:
        return self.codes.shape[1]

    def _check_query(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z)
        if z.ndim == 1:
            z = z[None, :]
        if z.ndim != 2 or z.shape[1] != self.dim:
            raise ShapeError("codebank lookup", z.shape, (None, self.dim))
        return z

    def topk_lookup(self, z, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Indices (M, k) and code vectors (M, k, D) of the k nearest codes per row."""
        z = self._check_query(z)
        codes = self.codes.data
        if not 1 <= k <= self.size:
            raise ValueError(f"top-K lookup needs 1 <= K <= L, got K={k}, L={self.size}")
        idx = np.empty((z.shape[0], k), dtype=np.int64)
        e2 = np.einsum("ij,ij->i", codes, codes)
        emax = np.sqrt(e2.max())
        for start in range(0, z.shape[0], _BLOCK):
            idx[start : start + _BLOCK] = self._topk_block(z[start : start + _BLOCK], k, e2, emax)
        return idx, codes[idx]

    def _topk_block(self, z: np.ndarray, k: int, e2: np.ndarray, emax: float) -> np.ndarray:
        codes = self.codes.data
        z32 = z.astype(np.float32, copy=False)
        z2 = np.einsum("ij,ij->i", z32, z32)
        approx = z2[:, None] - 2.0 * (z32 @ codes.T) + e2[None, :]

        # rounding band of the expansion
        scale = (np.sqrt(z2)[:, None] + emax) ** 2
        tol = 4.0 * self.dim * _EPS32 * scale + 1e-30
        kth = np.partition(approx, k - 1, axis=1)[:, k - 1 : k]
        mask = approx <= kth + 2.0 * tol
        width = int(mask.sum(axis=1).max())

        if width >= self.size:
            cand = np.broadcast_to(np.arange(self.size), (z.shape[0], self.size))
        else:
            masked = np.where(mask, approx, np.inf)
            cand = np.argpartition(masked, width - 1, axis=1)[:, :width]
        diff = z.astype(np.float64)[:, None, :] - codes[cand].astype(np.float64)
        exact = np.einsum("mcd,mcd->mc", diff, diff)
        exact = np.where(np.take_along_axis(mask, cand, axis=1), exact, np.inf)
        order = np.lexsort((cand, exact), axis=-1)[:, :k]
        return np.take_along_axis(cand, order, axis=1)

    def quantize_nearest(self, z) -> tuple[np.ndarray, np.ndarray]:
        idx, vecs = self.topk_lookup(z, 1)
        return idx[:, 0], vecs[:, 0]

    def lookup(self, idx: np.ndarray) -> Tensor:
        """Differentiable gather of code vectors."""
        return gather_rows(self.codes, idx)

    def kmeans_init(self, samples: np.ndarray, iters: int = 10, seed: int = 0) -> None:
        """Warm-start codes with k-means++ seeding and Lloyd iterations over encoder outputs."""
        samples = np.asarray(samples, dtype=np.float64)
        rng = np.random.default_rng(seed)
        n = samples.shape[0]
        centers = np.empty((self.size, samples.shape[1]))
        centers[0] = samples[rng.integers(n)]
        d2 = ((samples - centers[0]) ** 2).sum(1)
        for j in range(1, self.size):
            total = d2.sum()
            pick = rng.choice(n, p=d2 / total) if total > 0 else rng.integers(n)
            centers[j] = samples[pick]
            d2 = np.minimum(d2, ((samples - centers[j]) ** 2).sum(1))
        s2 = (samples**2).sum(1)[:, None]
        for _ in range(iters):
            assign = (s2 - 2 * samples @ centers.T + (centers**2).sum(1)[None, :]).argmin(axis=1)
            counts = np.bincount(assign, minlength=self.size)
            sums = np.zeros_like(centers)
            np.add.at(sums, assign, samples)
            used = counts > 0
            centers[used] = sums[used] / counts[used, None]
        self.codes.data[...] = centers.astype(self.codes.dtype)

def straight_through(z_prime: Tensor, e: Tensor) -> Tensor:
    """``z' + sg(e - z')``: forward value exactly ``e``, gradient copied to ``z_prime``."""
    if z_prime.shape != e.shape:
        raise ShapeError("straight_through", z_prime.shape, e.shape)
    return Tensor._make(e.data, (z_prime,), lambda g: (g,), "straight_through")


def vq_loss_terms(z_prime: Tensor, e: Tensor, reduction: str = "sum") -> tuple[Tensor, Tensor]:
    """Return ``(codebook_term, commitment_term)``.

    codebook_term = |sg(z') - e|^2 moves codes only; commitment_term =
    |z' - sg(e)|^2 moves the encoder only.  ``reduction="mean"`` divides
    by the element count.
    """
    if z_prime.shape != e.shape:
        raise ShapeError("vq_loss_terms", z_prime.shape, e.shape)
    if reduction == "sum":
        reduce = sum_squares
    elif reduction == "mean":
        def reduce(t):
            return mean_all(square(t))
    else:
        raise ValueError(f"unknown reduction {reduction!r}")
    codebook = reduce(sub(sg(z_prime), e))
    commitment = reduce(sub(z_prime, sg(e)))
    return codebook, commitment
