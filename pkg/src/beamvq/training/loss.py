"""Forecast loss: weighted MSE plus the two vector-quantisation terms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor, mse_reduce, scale
from ..autodiff.tensor import add
from ..codebank import vq_loss_terms
from ..errors import ConfigError, ShapeError


@dataclass
class LossWeights:
    """``lam`` scales the MSE, ``beta`` the commitment term, ``gamma`` the codebook term.

    ``vq_reduction`` is "mean" so the latent terms sit on the same per-element
    scale as the MSE; "sum" gives the raw squared norms.
    """

    lam: float = 1.0
    beta: float = 0.25
    gamma: float = 1.0
    vq_reduction: str = "mean"

    def validate(self) -> None:
        if min(self.lam, self.beta, self.gamma) < 0:
            raise ConfigError(f"loss weights must be >= 0, got {self.lam}, {self.beta}, {self.gamma}")
        if self.vq_reduction not in ("mean", "sum"):
            raise ConfigError(f"vq_reduction must be 'mean' or 'sum', got {self.vq_reduction!r}")


def total_loss(pred: Tensor, truth, z_prime: Tensor | None, e: Tensor | None,
               weights: LossWeights | None = None) -> tuple[Tensor, dict[str, float]]:
    """Return the scalar loss and its unweighted parts.

    Without a quantiser (``e is None``) only the MSE term remains.
    """
    w = weights or LossWeights()
    target = truth if isinstance(truth, Tensor) else Tensor(np.asarray(truth, dtype=pred.dtype))
    if pred.shape != target.shape:
        raise ShapeError("total_loss", pred.shape, target.shape)
    rec = mse_reduce(pred, target)
    parts = {"mse": rec.item(), "commitment": 0.0, "codebook": 0.0}
    loss = scale(rec, w.lam)
    if e is not None:
        codebook, commitment = vq_loss_terms(z_prime, e, w.vq_reduction)
        parts["commitment"] = commitment.item()
        parts["codebook"] = codebook.item()
        loss = add(add(loss, scale(commitment, w.beta)), scale(codebook, w.gamma))
    return loss, parts
