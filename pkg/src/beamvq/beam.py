"""Physics-scored beam search over quantised latent states.

Each node holds a forecast prefix.  Expanding a node encodes its current
input window, ranks the code bank per token, and builds K whole-state
children: child r replaces every token by its rank-r code.  All children
are decoded, scored on their full prefix, and the best K survive.
Ordering is (score desc, parent index asc, code rank asc).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .autodiff import Tensor, no_grad
from .backbone import Forecaster
from .errors import ConfigError
from .metrics.score import ScoreConfig

ScoreFn = Callable[..., float]


@dataclass(eq=False)
class BeamCandidate:
    ranks: tuple[int, ...]
    frames: np.ndarray  # (t, C, H, W) decoded so far
    score: float
    window: np.ndarray  # (T_in, C, H, W) input for the next expansion
    parent: "BeamCandidate | None" = None
    padding: bool = False

    @property
    def depth(self) -> int:
        return len(self.ranks)


@dataclass
class BeamConfig:
    width: int = 5
    horizon: int = 20
    chunk: int = 1
    scorer: ScoreConfig = field(default_factory=ScoreConfig)
    fixed_width: bool = True

    def validate(self) -> None:
        if self.width < 1:
            raise ConfigError("beam width K must be >= 1")
        if self.chunk < 1 or self.horizon < 1:
            raise ConfigError("beam horizon and chunk must be >= 1")
        if self.horizon % self.chunk:
            raise ConfigError(f"chunk {self.chunk} must divide horizon {self.horizon}")


@dataclass
class BeamResult:
    best: BeamCandidate
    finals: list[BeamCandidate]
    trace: list[dict]

    @property
    def forecast(self) -> np.ndarray:
        return self.best.frames


def count_states(n: int, k: int, chunk: int = 1) -> int:
    """Decoded states for an n-frame forecast: (n / chunk) * K^2."""
    if n % chunk:
        raise ValueError(f"chunk {chunk} must divide n={n}")
    return (n // chunk) * k * k


def root_candidate(x: np.ndarray) -> BeamCandidate:
    x = np.asarray(x, dtype=np.float32)
    _, c, h, w = x.shape
    return BeamCandidate((), np.zeros((0, c, h, w), dtype=np.float32), 0.0, x)


def _sort_key(item):
    score, parent_idx, rank = item[0], item[1], item[2]
    return (-score, parent_idx, rank)


def beam_step(active: list[BeamCandidate], model: Forecaster, k: int, score_fn: ScoreFn,
              reference: np.ndarray | None = None) -> list[BeamCandidate]:
    """Expand every active node into k children and keep the best k."""
    if not active:
        raise ValueError("beam_step needs at least one active candidate")
    if len(active) > k:
        raise ValueError(f"{len(active)} active candidates exceed beam width {k}")
    cfg = model.cfg
    l = cfg.tokens
    windows = np.stack([a.window for a in active])
    with no_grad():
        z = model.encode(windows).data
        idx, _ = model.bank.topk_lookup(z, k)
        codes = model.bank.codes.data
        # (parent, rank, token) -> code vector
        sel = idx.reshape(len(active), l, k).transpose(0, 2, 1)
        states = codes[sel.reshape(-1)]
        last = np.repeat(windows[:, -1], k, axis=0)
        out = model.decode(Tensor(states), last).data.reshape(len(active), k, cfg.chunk, *windows.shape[2:])

    scored = []
    for p, parent in enumerate(active):
        for r in range(k):
            if parent.padding:
                continue
            frames = np.concatenate([parent.frames, out[p, r]])
            score = float(score_fn(frames, reference))
            if not np.isfinite(score):
                raise ValueError(f"non-finite physics score for parent {p}, rank {r + 1}")
            scored.append((score, p, r, frames))
    scored.sort(key=_sort_key)
    children = []
    for score, p, r, frames in scored[:k]:
        parent = active[p]
        window = np.concatenate([parent.window, out[p, r]])[-cfg.t_in :]
        children.append(BeamCandidate(parent.ranks + (r + 1,), frames, score, window, parent))
    return children


def beam_forecast(x: np.ndarray, model: Forecaster, config: BeamConfig, score_fn: ScoreFn,
                  reference: np.ndarray | None = None) -> BeamResult:
    """Run horizon/chunk beam steps from input window ``x`` (T_in, C, H, W).

    With ``fixed_width`` the initial level is padded with K-1 masked copies
    of the root, the usual fixed-width beam initialisation: every level then
    decodes exactly K^2 states, and masked children are never retained.
    """
    config.validate()
    if config.chunk != model.cfg.chunk:
        raise ConfigError(f"beam chunk {config.chunk} differs from model chunk {model.cfg.chunk}")
    if not model.cfg.quantize:
        raise ConfigError("beam search needs a quantising model")
    k = config.width
    root = root_candidate(x)
    active = [root]
    if config.fixed_width:
        active += [BeamCandidate((), root.frames, 0.0, root.window, None, padding=True) for _ in range(k - 1)]
    trace = []
    for depth in range(config.horizon // config.chunk):
        active = beam_step(active, model, k, score_fn, reference)
        trace.append({
            "depth": depth + 1,
            "scores": [c.score for c in active],
            "ranks": [list(c.ranks) for c in active],
        })
    best = max(active, key=lambda c: (c.score, -active.index(c)))
    return BeamResult(best, active, trace)


def write_trace(path, trace: list[dict]) -> None:
    with open(path, "w") as f:
        for rec in trace:
            f.write(json.dumps(rec) + "\n")
