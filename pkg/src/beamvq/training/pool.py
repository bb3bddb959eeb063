"""Candidate filtering and the append-only pseudo-label pool."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from ..data.field import Boundary, Dataset, Provenance, SampleWindow
from ..data.io import save_dataset
from ..errors import ConfigError


@dataclass
class GeneratedCandidate:
    sample_id: int
    index: int  # position among the input's final beam candidates
    score: float
    inputs: np.ndarray
    frames: np.ndarray


def quartile_threshold(scores) -> float:
    """First quartile with linear interpolation between order statistics."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("quartile of an empty score list")
    return float(np.quantile(scores, 0.25, method="linear"))


def best_per_input(cands: list[GeneratedCandidate]) -> dict[int, GeneratedCandidate]:
    best: dict[int, GeneratedCandidate] = {}
    for c in cands:
        cur = best.get(c.sample_id)
        if cur is None or (c.score, -c.index) > (cur.score, -cur.index):
            best[c.sample_id] = c
    return best


def filter_candidates(cands: list[GeneratedCandidate], rule: str = "quartile",
                      constant: float = 0.0) -> tuple[list[GeneratedCandidate], float]:
    """Admit every input's best candidate plus any candidate scoring >= threshold.

    ``rule`` is "quartile" (first quartile of all scores in the pass),
    "constant" (fixed ``constant``) or "best" (per-input best only).
    """
    if not cands:
        raise ValueError("filter_candidates needs at least one candidate")
    if rule == "quartile":
        thr = quartile_threshold([c.score for c in cands])
    elif rule == "constant":
        thr = float(constant)
    elif rule == "best":
        thr = np.inf
    else:
        raise ConfigError(f"unknown filtering rule {rule!r}")
    best = {id(c) for c in best_per_input(cands).values()}
    admitted = [c for c in cands if id(c) in best or c.score >= thr]
    return admitted, thr


@dataclass(frozen=True)
class PoolEntry:
    sample_id: int
    epoch: int
    index: int
    score: float
    inputs: np.ndarray
    target: np.ndarray
    digest: str

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.sample_id, self.epoch, self.index)


def _digest(inputs: np.ndarray, target: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(inputs, dtype="<f4").tobytes())
    h.update(np.ascontiguousarray(target, dtype="<f4").tobytes())
    return h.hexdigest()


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.float32)
    out.setflags(write=False)
    return out


class HighQualityPool:
    """Append-only set of pseudo-labelled windows keyed by (sample, epoch, candidate)."""

    def __init__(self):
        self._entries: list[PoolEntry] = []
        self._keys: set[tuple[int, int, int]] = set()

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def entries(self) -> tuple[PoolEntry, ...]:
        return tuple(self._entries)

    def admit(self, cands: list[GeneratedCandidate], epoch: int) -> int:
        """Freeze and add candidates; returns the number of new entries."""
        added = 0
        for c in cands:
            key = (c.sample_id, epoch, c.index)
            if key in self._keys:
                continue
            x, y = _frozen(c.inputs), _frozen(c.frames)
            self._entries.append(PoolEntry(c.sample_id, epoch, c.index, float(c.score), x, y, _digest(x, y)))
            self._keys.add(key)
            added += 1
        return added

    def verify(self) -> bool:
        """True when every payload still matches its admission hash."""
        return all(_digest(e.inputs, e.target) == e.digest for e in self._entries)

    def samples(self) -> list[SampleWindow]:
        return [SampleWindow(e.inputs, e.target, Provenance.PSEUDO, e.sample_id) for e in self._entries]

    def save(self, path, dx: float = 1.0, dy: float = 1.0, boundary=Boundary.PERIODIC) -> None:
        save_dataset(path, Dataset(self.samples(), dx, dy, boundary))
