"""DVRP data model: requests, instances, routes, cost and feasibility checks.

Index 0 always denotes the depot, indices 1..m the requests of an instance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

FEAS_TOL = 1e-6

Point = tuple[float, float]


@dataclass(frozen=True)
class Request:
    id: int
    location: Point
    size: float
    unload_time: float = 0.0
    arrival_time: float = 0.0


@dataclass(frozen=True)
class Instance:
    name: str
    depot_location: Point
    t_start: float
    t_end: float
    capacity: float
    speed: float
    fleet_size: int
    requests: tuple[Request, ...]

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ValueError(f"t_start ({self.t_start}) must be < t_end ({self.t_end})")
        if self.capacity <= 0 or self.speed <= 0 or self.fleet_size < 1:
            raise ValueError("capacity, speed and fleet_size must be positive")
        object.__setattr__(self, "requests", tuple(self.requests))
        for pos, req in enumerate(self.requests, start=1):
            if req.id != pos:
                raise ValueError(f"request ids must be 1..m in order, got {req.id} at position {pos}")
            if req.size > self.capacity:
                raise ValueError(f"request {req.id} size {req.size} exceeds capacity {self.capacity}")

    @property
    def m(self) -> int:
        return len(self.requests)

    @cached_property
    def coords(self) -> np.ndarray:
        pts = [self.depot_location] + [r.location for r in self.requests]
        return np.asarray(pts, dtype=float).reshape(-1, 2)

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.array([0.0] + [r.size for r in self.requests])

    @cached_property
    def unloads(self) -> np.ndarray:
        return np.array([0.0] + [r.unload_time for r in self.requests])

    @cached_property
    def releases(self) -> np.ndarray:
        return np.array([self.t_start] + [r.arrival_time for r in self.requests])

    @cached_property
    def dist(self) -> np.ndarray:
        return distance_matrix(self.coords)

    @cached_property
    def bounding_rect(self) -> tuple[float, float, float, float]:
        """(x_min, x_max, y_min, y_max) over all request locations."""
        pts = self.coords[1:] if self.m else self.coords
        return (float(pts[:, 0].min()), float(pts[:, 0].max()),
                float(pts[:, 1].min()), float(pts[:, 1].max()))


@dataclass(frozen=True)
class Route:
    vehicle: int
    stops: tuple[int, ...]
    arrivals: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "stops", tuple(int(s) for s in self.stops))
        object.__setattr__(self, "arrivals", tuple(float(a) for a in self.arrivals))

    def trips(self) -> list[list[int]]:
        """Client stops grouped by depot-to-depot trip (empty trips dropped)."""
        out, cur = [], []
        for s in self.stops[1:]:
            if s == 0:
                if cur:
                    out.append(cur)
                cur = []
            else:
                cur.append(s)
        if cur:
            out.append(cur)
        return out


@dataclass(frozen=True)
class Solution:
    routes: tuple[Route, ...] = ()
    total_cost: float = 0.0
    penalty: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "routes", tuple(self.routes))

    @property
    def objective(self) -> float:
        return self.total_cost + self.penalty

    def served_requests(self) -> list[int]:
        return [s for r in self.routes for s in r.stops if s != 0]

    def route_of(self, vehicle: int) -> Route | None:
        for r in self.routes:
            if r.vehicle == vehicle:
                return r
        return None


def distance(a: Sequence[float], b: Sequence[float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def distance_matrix(coords: np.ndarray) -> np.ndarray:
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=-1))


def _check_depot_ends(stops: Sequence[int], vehicle=None):
    if len(stops) < 2 or stops[0] != 0 or stops[-1] != 0:
        raise ValueError(f"route of vehicle {vehicle} must start and end at the depot: {list(stops)}")


def route_length(stops: Sequence[int], dist) -> float:
    return float(sum(dist[a][b] for a, b in zip(stops, stops[1:])))


def total_cost(solution: Solution | Iterable[Route], instance) -> float:
    """Sum of Euclidean leg lengths over all routes.

    ``instance`` is anything exposing a ``dist`` matrix (an :class:`Instance`
    or a planning workspace that also holds artificial requests).
    """
    routes = solution.routes if isinstance(solution, Solution) else solution
    total = 0.0
    for r in routes:
        _check_depot_ends(r.stops, r.vehicle)
        total += route_length(r.stops, instance.dist)
    return total


def schedule_route(route_stops: Sequence[int], instance: Instance,
                   release_times: Sequence[float] | None = None) -> list[float]:
    """Earliest-feasible arrival times along a route that leaves the depot at t_start."""
    _check_depot_ends(route_stops)
    if release_times is None:
        release_times = [instance.releases[s] if s else 0.0 for s in route_stops]
    dist, unl, sp = instance.dist, instance.unloads, instance.speed
    arrivals = [float(instance.t_start)]
    for j in range(1, len(route_stops)):
        prev, cur = route_stops[j - 1], route_stops[j]
        travel = dist[prev][cur] / sp
        arrivals.append(float(max(arrivals[-1] + unl[prev] + travel, release_times[j] + travel)))
    return arrivals


@dataclass(frozen=True)
class Violation:
    constraint: str  # "E2".."E7"
    vehicle: int | None
    position: int | None
    detail: str = ""


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def first(self) -> Violation | None:
        return self.violations[0] if self.violations else None

    def __bool__(self):
        return self.ok


def check_feasibility(solution: Solution, instance: Instance,
                      revealed: Iterable[int] | None = None, tol: float = FEAS_TOL) -> FeasibilityReport:
    """Check the served-once, timing, return-time, start-time and per-trip capacity rules.

    ``revealed`` defaults to every request of the instance.
    """
    revealed = set(range(1, instance.m + 1)) if revealed is None else set(revealed)
    out: list[Violation] = []

    seen: dict[int, int] = {}
    for r in solution.routes:
        _check_depot_ends(r.stops, r.vehicle)
        for pos, s in enumerate(r.stops):
            if s == 0:
                continue
            if s in seen:
                out.append(Violation("E2", r.vehicle, pos, f"request {s} served more than once"))
            elif s not in revealed:
                out.append(Violation("E2", r.vehicle, pos, f"request {s} is not a revealed request"))
            seen[s] = seen.get(s, 0) + 1
    for s in sorted(revealed - seen.keys()):
        out.append(Violation("E2", None, None, f"request {s} not served"))

    vehicles = [r.vehicle for r in solution.routes]
    if len(set(vehicles)) != len(vehicles) or len(vehicles) > instance.fleet_size:
        out.append(Violation("E2", None, None, "vehicle used by more than one route or fleet exceeded"))

    dist, unl, rel, sp = instance.dist, instance.unloads, instance.releases, instance.speed
    for r in solution.routes:
        st, arv = r.stops, r.arrivals
        if len(arv) != len(st):
            out.append(Violation("E3", r.vehicle, None, "arrival schedule missing or misaligned"))
            continue
        if arv[0] < instance.t_start - tol:
            out.append(Violation("E6", r.vehicle, 0, f"departs at {arv[0]} before opening"))
        for j in range(1, len(st)):
            a, b = st[j - 1], st[j]
            travel = dist[a][b] / sp
            if arv[j] < arv[j - 1] + unl[a] + travel - tol:
                out.append(Violation("E3", r.vehicle, j, f"arrival {arv[j]} before previous stop served"))
            release = rel[b] if b != 0 else instance.t_start
            if arv[j] < release + travel - tol:
                out.append(Violation("E4", r.vehicle, j, f"left before request {b} was known"))
        if arv[-1] > instance.t_end + tol:
            out.append(Violation("E5", r.vehicle, len(st) - 1, f"returns at {arv[-1]} after closing {instance.t_end}"))
        load, start = 0.0, 0
        for j in range(1, len(st)):
            if st[j] == 0:
                if load > instance.capacity + tol:
                    out.append(Violation("E7", r.vehicle, start, f"trip load {load} exceeds capacity"))
                load, start = 0.0, j
            else:
                load += instance.sizes[st[j]]
    order = {"E2": 0, "E3": 1, "E4": 2, "E5": 3, "E6": 4, "E7": 5}
    out.sort(key=lambda v: order[v.constraint])
    return FeasibilityReport(tuple(out))


def degree_of_dynamism(instance: Instance) -> float:
    if instance.m == 0:
        raise ValueError("degree of dynamism is undefined for an instance without requests")
    late = sum(1 for r in instance.requests if r.arrival_time > instance.t_start)
    return late / instance.m


def make_solution(routes: Iterable[Route], instance) -> Solution:
    routes = tuple(routes)
    return Solution(routes, total_cost(routes, instance))
