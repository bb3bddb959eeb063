"""Increasing-frequency generation schedule."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConfigError


@dataclass(frozen=True)
class TrainSchedule:
    """Epochs ``t < e1`` train on original data only; ``e1 <= t < e2`` generate
    every ``mid_every`` epochs; ``t >= e2`` every ``late_every`` epochs."""

    e1: int = 100
    e2: int = 200
    total: int = 500
    mid_every: int = 50
    late_every: int = 10

    def validate(self) -> None:
        if not 0 < self.e1 < self.e2 <= self.total:
            raise ConfigError(f"schedule needs 0 < e1 < e2 <= total, got {self.e1}, {self.e2}, {self.total}")
        if self.mid_every < 1 or self.late_every < 1:
            raise ConfigError("generation frequencies must be >= 1")

    def phase(self, t: int) -> str:
        if t < self.e1:
            return "initial"
        return "mid" if t < self.e2 else "late"

    def generates(self, t: int) -> bool:
        if t < self.e1:
            return False
        if t < self.e2:
            return (t - self.e1) % self.mid_every == 0
        return (t - self.e2) % self.late_every == 0

    def generation_epochs(self) -> list[int]:
        return [t for t in range(self.total) if self.generates(t)]
