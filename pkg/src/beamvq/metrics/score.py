"""Scalar physics-aware scores used to rank forecast candidates (higher is better)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..data.field import Boundary, FieldTensor
from ..errors import ConfigError
from .physics import SpectrumCurve, energy_spectrum, mean_abs_divergence, spectrum_distance
from .statistical import mse

SCORERS = ("neg_divergence", "spectrum_match", "composite", "neg_mse")


@dataclass
class ScoreConfig:
    """``composite`` is ``w_div * neg_divergence + w_spec * spectrum_match``.

    ``neg_mse`` ranks by negative MSE against a fixed reference sequence
    (the model's own greedy forecast in the MSE-filtering ablation).
    """

    kind: str = "neg_divergence"
    reference: SpectrumCurve | None = None
    weights: dict[str, float] = field(default_factory=lambda: {"divergence": 1.0, "spectrum": 1.0})
    dx: float = 1.0
    dy: float = 1.0
    boundary: Boundary = Boundary.PERIODIC

    def validate(self) -> None:
        if self.kind not in SCORERS:
            raise ConfigError(f"unknown scorer {self.kind!r}; expected one of {SCORERS}")
        if self.kind in ("spectrum_match", "composite") and self.reference is None:
            raise ConfigError(f"scorer {self.kind!r} needs a reference spectrum")
        if not all(np.isfinite(v) for v in self.weights.values()):
            raise ConfigError("score weights must be finite")


def physics_score(candidate, config: ScoreConfig, reference_seq: np.ndarray | None = None) -> float:
    """Score a (T, C, H, W) candidate sequence."""
    config.validate()
    seq = candidate if isinstance(candidate, FieldTensor) else FieldTensor(
        np.asarray(candidate), config.dx, config.dy, config.boundary)
    kind = config.kind
    if kind == "neg_divergence":
        return -mean_abs_divergence(seq)
    if kind == "spectrum_match":
        return -spectrum_distance(energy_spectrum(seq), config.reference)
    if kind == "composite":
        w = config.weights
        return (w.get("divergence", 0.0) * -mean_abs_divergence(seq)
                + w.get("spectrum", 0.0) * -spectrum_distance(energy_spectrum(seq), config.reference))
    if reference_seq is None:
        raise ConfigError("neg_mse scorer needs a reference sequence")
    ref = np.asarray(reference_seq)[: seq.T]
    return -mse(seq.values, ref)


def make_scorer(config: ScoreConfig, transform: Callable[[np.ndarray], np.ndarray] | None = None):
    """Return ``score(frames, reference=None)`` for beam search.

    ``transform`` maps model-space frames back to physical units before
    scoring (denormalisation).
    """
    config.validate()

    def score(frames: np.ndarray, reference: np.ndarray | None = None) -> float:
        phys = transform(frames) if transform is not None else frames
        ref = transform(reference) if (reference is not None and transform is not None) else reference
        return physics_score(phys, config, ref)

    score.kind = config.kind
    return score
