"""Frozen simulation state at a slice boundary and plan construction on top of it."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .model import Instance, Request, Route, Solution

LATE_PENALTY = 1000.0


@dataclass
class Workspace:
    """Arrays for one planning problem: the real requests plus any artificial ones.

    Index 0 is the depot, 1..m the instance's requests, m+1.. artificial ones.
    """
    instance: Instance
    coords: np.ndarray
    sizes: np.ndarray
    unloads: np.ndarray
    releases: np.ndarray
    dist: np.ndarray

    @classmethod
    def from_instance(cls, inst: Instance) -> "Workspace":
        return cls(inst, inst.coords, inst.sizes, inst.unloads, inst.releases, inst.dist)

    @property
    def m(self) -> int:
        return self.instance.m

    @property
    def n_nodes(self) -> int:
        return len(self.coords)

    def is_artificial(self, idx: int) -> bool:
        return idx > self.instance.m

    def with_artificial(self, extra: Sequence[Request]) -> "Workspace":
        if not extra:
            return self
        add = np.array([r.location for r in extra], dtype=float)
        coords = np.vstack([self.coords, add])
        cross = np.sqrt(((coords[:, None, :] - add[None, :, :]) ** 2).sum(-1))
        n0 = len(self.coords)
        dist = np.empty((len(coords), len(coords)))
        dist[:n0, :n0] = self.dist
        dist[:, n0:] = cross
        dist[n0:, :] = cross.T
        return Workspace(self.instance, coords,
                         np.concatenate([self.sizes, [r.size for r in extra]]),
                         np.concatenate([self.unloads, [r.unload_time for r in extra]]),
                         np.concatenate([self.releases, [r.arrival_time for r in extra]]),
                         dist)

    @cached_property
    def dist_list(self) -> list[list[float]]:
        return self.dist.tolist()


@dataclass(frozen=True)
class VehicleState:
    stops: tuple[int, ...] = (0,)
    arrivals: tuple[float, ...] = (0.0,)
    ready_time: float = 0.0   # service at the last committed stop is finished by then
    trip_load: float = 0.0    # sizes committed since the last depot visit

    @property
    def position(self) -> int:
        return self.stops[-1]

    @property
    def open_trip(self) -> bool:
        return self.stops[-1] != 0

    def trip_clients(self) -> list[int]:
        out = []
        for s in reversed(self.stops):
            if s == 0:
                break
            out.append(s)
        return out[::-1]


@dataclass(frozen=True)
class SimulationState:
    now: float
    plan_time: float
    revealed: frozenset[int]
    served: frozenset[int]
    vehicles: tuple[VehicleState, ...]
    plan: Solution | None = None

    @classmethod
    def initial(cls, inst: Instance) -> "SimulationState":
        v = VehicleState((0,), (float(inst.t_start),), float(inst.t_start), 0.0)
        known = frozenset(r.id for r in inst.requests if r.arrival_time <= inst.t_start)
        return cls(inst.t_start, inst.t_start, known, frozenset(), tuple(v for _ in range(inst.fleet_size)))

    def committed(self) -> set[int]:
        return {s for v in self.vehicles for s in v.stops if s}

    def movable(self) -> list[int]:
        """Revealed requests not yet committed to any vehicle."""
        return sorted(self.revealed - self.committed())

    def suffix(self, vehicle: int) -> list[int]:
        if self.plan is None:
            return []
        r = self.plan.route_of(vehicle)
        if r is None:
            return []
        return list(r.stops[len(self.vehicles[vehicle].stops):])


def project(vs: VehicleState, suffix: Sequence[int], ws: Workspace, start_time: float) -> list[float]:
    """Arrival times along ``suffix`` for a vehicle that may not depart before ``start_time``."""
    D, unl, rel, sp = ws.dist, ws.unloads, ws.releases, ws.instance.speed
    pos, t = vs.position, vs.ready_time
    out = []
    for s in suffix:
        dep = max(t, start_time, rel[s] if s else 0.0)
        arr = dep + D[pos, s] / sp
        out.append(float(arr))
        t = arr + unl[s]
        pos = s
    return out


def normalize_suffix(vs: VehicleState, suffix: Iterable[int]) -> list[int]:
    """Drop empty trips and make sure the plan ends at the depot."""
    out: list[int] = []
    last = vs.position
    for s in suffix:
        if s == 0 and last == 0:
            continue
        out.append(s)
        last = s
    if last != 0:
        out.append(0)
    return out


def strip_artificial(suffix: Sequence[int], m: int) -> list[int]:
    return [s for s in suffix if s <= m]


def trip_loads_ok(vs: VehicleState, suffix: Sequence[int], sizes, capacity: float, tol: float = 1e-9) -> bool:
    load = vs.trip_load if vs.open_trip else 0.0
    for s in suffix:
        if s == 0:
            load = 0.0
        else:
            load += sizes[s]
            if load > capacity + tol:
                return False
    return True


def build_plan(state: SimulationState, suffixes: Mapping[int, Sequence[int]], ws: Workspace) -> Solution:
    """Combine committed prefixes with planned suffixes into a scheduled Solution.

    The cost counts every leg, committed or planned; the penalty charges
    returns after closing time.
    """
    t_end = ws.instance.t_end
    routes = []
    cost = 0.0
    late = 0.0
    D = ws.dist_list
    for v, vs in enumerate(state.vehicles):
        planned = suffixes.get(v, ())
        if not planned and not vs.open_trip:
            if len(vs.stops) < 2:
                continue  # never left the depot
            suffix = []
        else:
            suffix = normalize_suffix(vs, planned)
        stops = vs.stops + tuple(suffix)
        arrivals = vs.arrivals + tuple(project(vs, suffix, ws, state.now))
        routes.append(Route(v, stops, arrivals))
        cost += sum(D[a][b] for a, b in zip(stops, stops[1:]))
        late += max(0.0, arrivals[-1] - t_end)
    return Solution(tuple(routes), cost, LATE_PENALTY * late)


def plan_suffixes(plan: Solution, state: SimulationState) -> dict[int, list[int]]:
    out = {}
    for r in plan.routes:
        n = len(state.vehicles[r.vehicle].stops)
        out[r.vehicle] = list(r.stops[n:])
    return out


def plan_is_feasible(plan: Solution, state: SimulationState, ws: Workspace, tol: float = 1e-6) -> bool:
    """Every unserved revealed request appears once, capacities hold, all vehicles return in time."""
    inst = ws.instance
    seen: list[int] = []
    for r in plan.routes:
        vs = state.vehicles[r.vehicle]
        if r.stops[:len(vs.stops)] != vs.stops:
            return False
        suffix = r.stops[len(vs.stops):]
        if not trip_loads_ok(vs, suffix, ws.sizes, inst.capacity):
            return False
        if r.arrivals[-1] > inst.t_end + tol:
            return False
        seen.extend(s for s in r.stops if s)
    if len(seen) != len(set(seen)):
        return False
    return set(seen) == set(state.revealed) | state.committed()
