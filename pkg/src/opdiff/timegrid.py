"""Uniform and randomly perturbed time grids on [0, T]."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np


@dataclass(frozen=True, eq=False)
class TimeGrid:
    T: float
    steps: np.ndarray
    q: float = 0.0
    seed: Optional[int] = None
    levels: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        steps = np.array(self.steps, dtype=float).ravel()
        if steps.size < 1:
            raise ValueError("a time grid needs at least one step")
        if not np.all(steps > 0.0):
            raise ValueError("all time steps must be positive")
        if not (self.T > 0.0):
            raise ValueError("final time must be positive")
        if abs(math.fsum(steps) - self.T) > 1e-14 * self.T:
            raise ValueError(f"steps sum to {math.fsum(steps)!r}, not T={self.T!r}")
        levels = np.concatenate(([0.0], np.cumsum(steps)))
        levels[-1] = self.T
        steps.flags.writeable = False
        levels.flags.writeable = False
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "levels", levels)

    @property
    def N(self) -> int:
        return self.steps.size

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.steps == self.steps[0]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "t_n", "tau_n"])
        w.writerow([0, fmt(self.levels[0]), ""])
        for n in range(1, self.N + 1):
            w.writerow([n, fmt(self.levels[n]), fmt(self.steps[n - 1])])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, T: Optional[float] = None) -> "TimeGrid":
        rows = list(csv.DictReader(io.StringIO(text)))
        steps = [float(r["tau_n"]) for r in rows[1:]]
        return cls(T=float(rows[-1]["t_n"]) if T is None else T, steps=steps)


class GridStats(NamedTuple):
    min_step: float
    max_step: float
    max_adjacent_ratio: float


def fmt(x: float) -> str:
    """17 significant digits, '.' decimal point."""
    return format(float(x), ".17g")


def uniform_grid(T: float, N: int) -> TimeGrid:
    if not (T > 0.0):
        raise ValueError("T must be positive")
    if int(N) != N or N < 1:
        raise ValueError("N must be a positive integer")
    N = int(N)
    return TimeGrid(T=T, steps=np.full(N, T / N))


def random_grid(T: float, N: int, q: float = 0.5, seed: int = 0) -> TimeGrid:
    """Steps ``tau*(1 + q*(xi - 0.5))`` with ``tau = T/N`` and ``xi ~ U[0,1)``,
    all rescaled by one common factor so that they add up to ``T``."""
    if not (T > 0.0):
        raise ValueError("T must be positive")
    if int(N) != N or N < 1:
        raise ValueError("N must be a positive integer")
    if not (0.0 <= q < 2.0):
        raise ValueError("q must lie in [0, 2) to keep steps positive")
    N = int(N)
    if q == 0.0:
        g = uniform_grid(T, N)
        return TimeGrid(T=T, steps=g.steps, q=0.0, seed=seed)
    rng = np.random.default_rng(seed)
    tau = T / N
    raw = tau * (1.0 + q * (rng.random(N) - 0.5))
    steps = raw * (T / math.fsum(raw))
    return TimeGrid(T=T, steps=steps, q=q, seed=seed)


def grid_stats(grid: TimeGrid) -> GridStats:
    s = grid.steps
    if s.size == 1:
        ratio = 1.0
    else:
        r = s[1:] / s[:-1]
        ratio = float(max(r.max(), (1.0 / r).max()))
    return GridStats(float(s.min()), float(s.max()), ratio)
