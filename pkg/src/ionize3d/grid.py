from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_j = j * h`` for ``j = 0 .. count - 1``."""

    h: float
    count: int

    def __post_init__(self) -> None:
        if not self.h > 0:
            raise ValueError(f"grid step must be positive, got {self.h}")
        if self.count < 2:
            raise ValueError(f"grid needs at least 2 points, got {self.count}")

    @classmethod
    def span(cls, h: float, t_end: float) -> "TimeGrid":
        return cls(h, int(round(t_end / h)) + 1)

    @property
    def t_end(self) -> float:
        return self.h * (self.count - 1)

    @property
    def times(self) -> np.ndarray:
        return self.h * np.arange(self.count, dtype=float)

    def index(self, t: float) -> int:
        j = int(round(t / self.h))
        if not 0 <= j < self.count or abs(j * self.h - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"t = {t} is not a grid point")
        return j

    def prefix(self, count: int) -> "TimeGrid":
        return TimeGrid(self.h, count)
