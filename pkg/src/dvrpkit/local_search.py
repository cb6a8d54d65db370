"""2-OPT route improvement that leaves the committed route prefix untouched."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

IMPROVE_EPS = 1e-9


@dataclass(frozen=True)
class MutableRoute:
    stops: tuple[int, ...]
    fixed_prefix_len: int = 1

    def __post_init__(self):
        object.__setattr__(self, "stops", tuple(int(s) for s in self.stops))
        if len(self.stops) < 2 or self.stops[0] != 0 or self.stops[-1] != 0:
            raise ValueError(f"route must start and end at the depot: {self.stops}")
        if not 1 <= self.fixed_prefix_len <= len(self.stops) - 1:
            raise ValueError(f"fixed_prefix_len {self.fixed_prefix_len} out of range for {len(self.stops)} stops")


def _local_matrix(stops: Sequence[int], dist) -> list[list[float]]:
    idx = np.asarray(stops)
    if isinstance(dist, np.ndarray):
        return dist[np.ix_(idx, idx)].tolist()
    return [[dist[a][b] for b in stops] for a in stops]


def _two_opt_segment(seg: list[int], D: list[list[float]]) -> None:
    """In-place 2-OPT on ``seg``; seg[0] and seg[-1] are anchors that never move."""
    n = len(seg)
    if n < 4:
        return
    improved = True
    while improved:
        improved = False
        for j1 in range(1, n - 1):
            for j2 in range(j1 + 1, n):
                a, b, c, d = seg[j1 - 1], seg[j1], seg[j2 - 1], seg[j2]
                if D[a][b] + D[c][d] > D[a][c] + D[b][d] + IMPROVE_EPS:
                    seg[j1:j2] = seg[j1:j2][::-1]
                    improved = True


def segments(stops: Sequence[int], fixed_prefix_len: int) -> list[tuple[int, int]]:
    """(start, end) position pairs of independently optimisable pieces.

    Each piece runs from an anchor (last fixed stop or an interior depot)
    to the next depot stop, inclusive on both ends.
    """
    out = []
    start = fixed_prefix_len - 1
    for j in range(fixed_prefix_len, len(stops)):
        if stops[j] == 0:
            out.append((start, j))
            start = j
    return out


def two_opt(route: MutableRoute, dist) -> MutableRoute:
    """Improve the movable part of a route; reversals never cross an interior depot visit."""
    stops = list(route.stops)
    D = _local_matrix(stops, dist)
    pos = list(range(len(stops)))  # work on positions into the local matrix
    for s, e in segments(stops, route.fixed_prefix_len):
        seg = pos[s:e + 1]
        _two_opt_segment(seg, D)
        pos[s:e + 1] = seg
    return MutableRoute(tuple(stops[p] for p in pos), route.fixed_prefix_len)


def improving_pairs(route: MutableRoute, dist, eps: float = IMPROVE_EPS) -> list[tuple[int, int]]:
    """All (j1, j2) position pairs over movable positions where an exchange would shorten the route."""
    st = route.stops
    out = []
    for s, e in segments(st, route.fixed_prefix_len):
        for j1 in range(s + 1, e):
            for j2 in range(j1 + 1, e + 1):
                a, b, c, d = st[j1 - 1], st[j1], st[j2 - 1], st[j2]
                if dist[a][b] + dist[c][d] > dist[a][c] + dist[b][d] + eps:
                    out.append((j1, j2))
    return out
