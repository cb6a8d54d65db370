"""Particle swarm optimisation over continuous DVRP encodings.

An assignment is encoded as a flat vector of (x, y) cluster centres, ``k``
per vehicle; every movable request goes to the vehicle owning its nearest
centre and each vehicle's stops are then tidied with 2-OPT. Route order can
optionally be encoded as one real per request and decoded by rank.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .local_search import MutableRoute, two_opt
from .model import Solution
from .state import SimulationState, Workspace, build_plan, normalize_suffix, plan_suffixes


@dataclass(frozen=True)
class PsoParams:
    swarm_size: int = 4
    iterations: int = 28
    g: float = 1.4    # neighbourhood attraction
    l: float = 1.4    # personal-best attraction
    a: float = 0.63   # inertia
    neighborhood: str = "global"  # or "ring"

    def __post_init__(self):
        if self.swarm_size < 1 or self.iterations < 1:
            raise ValueError("swarm_size and iterations must be >= 1")
        if min(self.g, self.l, self.a) < 0:
            raise ValueError("g, l and a must be nonnegative")
        if self.neighborhood not in ("global", "ring"):
            raise ValueError(f"unknown neighbourhood {self.neighborhood!r}")

    @property
    def label(self) -> str:
        return f"{self.swarm_size}x{self.iterations}"


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    best_position: np.ndarray
    best_value: float
    value: float = float("inf")

    @classmethod
    def start(cls, position, value: float, velocity=None) -> "Particle":
        position = np.asarray(position, dtype=float)
        velocity = np.zeros_like(position) if velocity is None else np.asarray(velocity, dtype=float)
        return cls(position.copy(), velocity, position.copy(), float(value), float(value))


@dataclass(frozen=True)
class AssignmentEncoding:
    vehicles: tuple[int, ...]
    centers_per_vehicle: int = 1

    @property
    def dimension(self) -> int:
        return 2 * self.centers_per_vehicle * len(self.vehicles)

    def center_owner(self) -> np.ndarray:
        return np.repeat(np.asarray(self.vehicles, dtype=int), self.centers_per_vehicle)


def neighborhood_bests(swarm: Sequence[Particle], topology: str = "global") -> list[np.ndarray]:
    vals = np.array([p.best_value for p in swarm])
    if topology == "global":
        best = swarm[int(np.argmin(vals))].best_position
        return [best] * len(swarm)
    n = len(swarm)
    out = []
    for i in range(n):
        idx = [(i - 1) % n, i, (i + 1) % n]
        j = min(idx, key=lambda k: (vals[k], k))
        out.append(swarm[j].best_position)
    return out


def pso_step(swarm: Sequence[Particle], params: PsoParams, objective: Callable[[np.ndarray], float],
             rng) -> list[Particle]:
    """One synchronous iteration: move every particle, evaluate, then refresh bests."""
    nbest = neighborhood_bests(swarm, params.neighborhood)
    out = []
    for p, nb in zip(swarm, nbest):
        n = p.position.shape[0]
        u1 = rng.uniform(0.0, params.g, size=n)
        u2 = rng.uniform(0.0, params.l, size=n)
        v = u1 * (nb - p.position) + u2 * (p.best_position - p.position) + params.a * p.velocity
        x = p.position + v
        out.append(Particle(x, v, p.best_position, p.best_value))
    for p in out:
        p.value = float(objective(p.position))
        if p.value < p.best_value:
            p.best_value = p.value
            p.best_position = p.position.copy()
    return out


def decode_order(values: Sequence[float]) -> np.ndarray:
    """0-based indices sorted by ascending value; ties keep index order."""
    return np.argsort(np.asarray(values, dtype=float), kind="stable")


def _split_trips(vs, ordered: Sequence[int], sizes, capacity: float) -> list[int]:
    load = vs.trip_load if vs.open_trip else 0.0
    out: list[int] = []
    for r in ordered:
        s = sizes[r]
        if load + s > capacity + 1e-9:
            out.append(0)
            load = 0.0
        out.append(r)
        load += s
    out.append(0)
    return out


def decode_assignment(position: np.ndarray, encoding: AssignmentEncoding, movable: Sequence[int],
                      state: SimulationState, ws: Workspace) -> Solution:
    """Nearest-centre assignment, greedy reload insertion, per-vehicle 2-OPT."""
    movable = list(movable)
    suffixes: dict[int, list[int]] = {}
    if movable:
        centers = np.asarray(position, dtype=float).reshape(-1, 2)
        owner = encoding.center_owner()
        pts = ws.coords[movable]
        d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
        veh = owner[np.argmin(d2, axis=1)]
        per: dict[int, list[int]] = {}
        for r, v in zip(movable, veh):
            per.setdefault(int(v), []).append(r)
        cap = ws.instance.capacity
        for v, reqs in per.items():
            vs = state.vehicles[v]
            suffix = normalize_suffix(vs, _split_trips(vs, reqs, ws.sizes, cap))
            route = MutableRoute(vs.stops + tuple(suffix), len(vs.stops))
            suffixes[v] = list(two_opt(route, ws.dist).stops[len(vs.stops):])
    return build_plan(state, suffixes, ws)


def active_vehicles(state: SimulationState, plans: Sequence[Solution | None], movable: Sequence[int]) -> tuple[int, ...]:
    mset = set(movable)
    act = {v for v, vs in enumerate(state.vehicles) if vs.open_trip}
    for plan in plans:
        if plan is None:
            continue
        for v, suf in plan_suffixes(plan, state).items():
            if any(s in mset for s in suf):
                act.add(v)
    if not act:
        act.add(0)
    return tuple(sorted(act))


def encode_plan(plan: Solution, encoding: AssignmentEncoding, state: SimulationState, ws: Workspace,
                movable: Sequence[int], rng) -> np.ndarray:
    """Cluster centres at the centroid of each vehicle's movable requests in ``plan``."""
    mset = set(movable)
    suff = plan_suffixes(plan, state)
    x0, x1, y0, y1 = ws.instance.bounding_rect
    k = encoding.centers_per_vehicle
    vec = []
    for v in encoding.vehicles:
        reqs = [s for s in suff.get(v, []) if s in mset]
        if reqs:
            c = ws.coords[reqs].mean(axis=0)
        elif state.vehicles[v].open_trip:
            c = ws.coords[state.vehicles[v].position]
        else:
            c = np.array([rng.uniform(x0, x1), rng.uniform(y0, y1)])
        vec.extend(list(c) * k)
    return np.asarray(vec, dtype=float)


def _covers(plan: Solution, state: SimulationState, movable: Sequence[int]) -> bool:
    planned = sorted(s for suf in plan_suffixes(plan, state).values() for s in suf if s)
    return planned == sorted(movable)


def optimize_assignment(movable: Sequence[int], state: SimulationState, ws: Workspace, params: PsoParams,
                        seeds: Sequence[Solution | None], rng, *, centers_per_vehicle: int = 1,
                        seed_fraction: float = 0.25, jitter: float = 0.05,
                        history: list[float] | None = None) -> Solution:
    """Improve the requests-to-vehicles assignment with PSO.

    ``seeds`` are earlier plans (e.g. the heuristic plan of this slice and the
    previous slice's plan). Complete seeds also compete directly as
    incumbents, so the result is never worse than the best of them.
    Evaluations per call: ``swarm_size * iterations``.
    """
    movable = sorted(movable)
    seeds = [s for s in seeds if s is not None]
    if not movable:
        plan = build_plan(state, {}, ws)
        if history is not None:
            history.append(plan.objective)
        return plan

    encoding = AssignmentEncoding(active_vehicles(state, seeds, movable), centers_per_vehicle)
    best = [None, float("inf")]
    for s in seeds:
        if _covers(s, state, movable) and s.objective < best[1]:
            best[:] = [s, s.objective]

    def objective(x: np.ndarray) -> float:
        sol = decode_assignment(x, encoding, movable, state, ws)
        if sol.objective < best[1]:
            best[:] = [sol, sol.objective]
        return sol.objective

    x0, x1, y0, y1 = ws.instance.bounding_rect
    lo = np.tile([x0, y0], encoding.dimension // 2)
    hi = np.tile([x1, y1], encoding.dimension // 2)
    scale = jitter * float(np.hypot(x1 - x0, y1 - y0))
    seed_vecs = [encode_plan(s, encoding, state, ws, movable, rng) for s in seeds]
    n_seeded = min(params.swarm_size, max(1, int(params.swarm_size * seed_fraction))) if seed_vecs else 0
    swarm = []
    for i in range(params.swarm_size):
        if i < n_seeded:
            x = seed_vecs[i % len(seed_vecs)].copy()
            if i >= len(seed_vecs):
                x += rng.uniform(-scale, scale, size=x.shape)
        else:
            x = rng.uniform(lo, hi)
        swarm.append(Particle.start(x, objective(x)))
    if history is not None:
        history.append(best[1])
    for _ in range(params.iterations - 1):
        swarm = pso_step(swarm, params, objective, rng)
        if history is not None:
            history.append(best[1])
    return best[0]


def optimize_order(vehicle: int, state: SimulationState, ws: Workspace, requests: Sequence[int],
                   params: PsoParams, rng) -> list[int]:
    """Route-order PSO for one vehicle: one real per request, decoded by rank."""
    vs = state.vehicles[vehicle]
    requests = list(requests)
    if len(requests) < 2:
        return normalize_suffix(vs, _split_trips(vs, requests, ws.sizes, ws.instance.capacity))
    D = ws.dist

    def suffix_of(x):
        ordered = [requests[i] for i in decode_order(x)]
        return normalize_suffix(vs, _split_trips(vs, ordered, ws.sizes, ws.instance.capacity))

    def objective(x):
        stops = (vs.position,) + tuple(suffix_of(x))
        return float(sum(D[a, b] for a, b in zip(stops, stops[1:])))

    n = len(requests)
    swarm = [Particle.start(x, objective(x)) for x in (np.arange(n, dtype=float),
                                                       *(rng.uniform(0, n, size=n) for _ in range(params.swarm_size - 1)))]
    for _ in range(params.iterations - 1):
        swarm = pso_step(swarm, params, objective, rng)
    best = min(swarm, key=lambda p: p.best_value)
    return suffix_of(best.best_position)
