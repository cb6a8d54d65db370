"""Artificial future requests used by MCTree before the cut-off time."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Request


@dataclass(frozen=True)
class GenerationContext:
    known_sizes: tuple[float, ...]
    bounding_rect: tuple[float, float, float, float]  # x_min, x_max, y_min, y_max
    mean_unload: float
    now: float
    m_t: int
    T_CO: float
    t_start: float
    t_end: float
    first_id: int = 1_000_000

    def __post_init__(self):
        object.__setattr__(self, "known_sizes", tuple(self.known_sizes))
        x0, x1, y0, y1 = self.bounding_rect
        if x0 > x1 or y0 > y1:
            raise ValueError(f"degenerate bounding rectangle {self.bounding_rect}")

    @property
    def cutoff(self) -> float:
        return self.t_start + self.T_CO * (self.t_end - self.t_start)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def artificial_count(ctx: GenerationContext) -> int:
    """Number of requests to generate so that arrivals keep their observed frequency."""
    span = ctx.T_CO * (ctx.t_end - ctx.t_start)
    if ctx.now < ctx.t_start or ctx.now > ctx.cutoff:
        raise ValueError(f"artificial requests are only defined on [t_start, cut-off], got now={ctx.now}")
    if ctx.now == ctx.cutoff:
        return 0
    num = span + ctx.t_start - ctx.now
    den = span - ctx.t_start + ctx.now
    return max(0, round_half_up(ctx.m_t * num / den))


def generate(ctx: GenerationContext, rng: np.random.Generator) -> list[Request]:
    """Sample artificial requests: sizes with replacement from the known ones,
    locations uniform on the bounding rectangle, all known from ``now``."""
    if not ctx.known_sizes:
        raise ValueError("cannot sample sizes without any known request")
    k = artificial_count(ctx)
    if k == 0:
        return []
    sizes = np.asarray(ctx.known_sizes, dtype=float)
    picks = sizes[rng.integers(len(sizes), size=k)]
    x0, x1, y0, y1 = ctx.bounding_rect
    xs = rng.uniform(x0, x1, size=k)
    ys = rng.uniform(y0, y1, size=k)
    return [Request(ctx.first_id + i, (float(xs[i]), float(ys[i])), float(picks[i]),
                    float(ctx.mean_unload), float(ctx.now)) for i in range(k)]


def context_for(instance, revealed: Sequence[int], now: float, T_CO: float) -> GenerationContext:
    """Context from the requests revealed by ``now``; artificial ids start at m + 1."""
    revealed = list(revealed)
    sizes = tuple(float(instance.sizes[i]) for i in revealed)
    mean_unload = float(np.mean([instance.unloads[i] for i in revealed])) if revealed else 0.0
    return GenerationContext(sizes, instance.bounding_rect, mean_unload, now, len(revealed),
                             T_CO, instance.t_start, instance.t_end, first_id=instance.m + 1)
