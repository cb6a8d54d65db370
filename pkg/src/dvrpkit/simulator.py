"""Working-day simulation in discrete time slices.

At each slice boundary the state is frozen, every portfolio worker solves the
static snapshot independently and the cheapest feasible plan is installed.
Vehicles execute the installed plan eagerly; a stop becomes fixed the moment
its vehicle departs towards it.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import mc_requests
from .clustering import ClusterNode, Forest, cluster
from .instance_io import cutoff_time
from .local_search import MutableRoute, two_opt
from .model import FeasibilityReport, Instance, Route, Solution, check_feasibility, make_solution
from .pso import PsoParams, optimize_assignment, optimize_order
from .state import (SimulationState, VehicleState, Workspace, build_plan, normalize_suffix,
                    plan_is_feasible, plan_suffixes, project, strip_artificial, trip_loads_ok)

log = logging.getLogger(__name__)

ALGORITHMS = ("tree", "mctree", "2mpso", "mctree_pso")


def normalize_algorithm(name: str) -> str:
    key = name.strip().lower().replace("-", "_").replace("+", "_")
    if key not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHMS)}")
    return key


@dataclass(frozen=True)
class StrategyConfig:
    algorithm: str = "mctree"
    time_slices: int = 200
    workers: int = 8
    pso: PsoParams | None = None
    T_CO: float = 0.5
    seed: int = 0
    centers_per_vehicle: int = 1
    route_pso: bool = False

    def __post_init__(self):
        object.__setattr__(self, "algorithm", normalize_algorithm(self.algorithm))
        if self.time_slices < 1 or self.workers < 1:
            raise ValueError("time_slices and workers must be >= 1")
        if self.algorithm in ("2mpso", "mctree_pso") and self.pso is None:
            object.__setattr__(self, "pso", default_config(self.algorithm).pso)

    @property
    def pso_label(self) -> str:
        return self.pso.label if self.pso is not None and self.algorithm in ("2mpso", "mctree_pso") else "-"


def default_config(algorithm: str, **overrides) -> StrategyConfig:
    """Table-2 style defaults: heuristics at 200 slices, PSO variants at 40 slices."""
    algorithm = normalize_algorithm(algorithm)
    base = {
        "tree": dict(time_slices=200, workers=8, pso=None),
        "mctree": dict(time_slices=200, workers=8, pso=None),
        "2mpso": dict(time_slices=40, workers=8, pso=PsoParams(4, 28)),
        "mctree_pso": dict(time_slices=40, workers=8, pso=PsoParams(7, 49)),
    }[algorithm]
    base.update(overrides)
    return StrategyConfig(algorithm=algorithm, **base)


@dataclass(frozen=True)
class SliceRecord:
    index: int
    now: float
    revealed: int
    artificial: int
    best_worker: int
    best_cost: float
    fallback: bool = False

    def as_line(self) -> str:
        tag = " fallback" if self.fallback else ""
        return (f"slice={self.index} now={self.now:.4f} revealed={self.revealed} "
                f"artificial={self.artificial} best_worker={self.best_worker} best_cost={self.best_cost:.6f}{tag}")


@dataclass
class DayResult:
    solution: Solution
    slices: list[SliceRecord]
    wall_time: float
    feasibility: FeasibilityReport
    ffe: int = 0
    pso_histories: list[list[float]] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.feasibility.ok

    @property
    def cost(self) -> float:
        return self.solution.total_cost


# --- state advancement --------------------------------------------------------

def advance_to(state: SimulationState, t_next: float, instance: Instance | Workspace) -> SimulationState:
    """Reveal requests known by ``t_next`` and execute the installed plan up to it."""
    if t_next < state.now:
        raise ValueError(f"cannot move back in time ({t_next} < {state.now})")
    if t_next == state.now:
        return state
    ws = instance if isinstance(instance, Workspace) else Workspace.from_instance(instance)
    inst = ws.instance
    D, unl, rel, sizes, sp = ws.dist, ws.unloads, ws.releases, ws.sizes, inst.speed

    vehicles = []
    for v, vs in enumerate(state.vehicles):
        stops, arrs = list(vs.stops), list(vs.arrivals)
        ready, load = vs.ready_time, vs.trip_load
        for s in state.suffix(v):
            dep = max(ready, state.plan_time, rel[s] if s else 0.0)
            if dep >= t_next:
                break
            arr = dep + D[stops[-1], s] / sp
            stops.append(s)
            arrs.append(float(arr))
            ready = arr + unl[s]
            load = 0.0 if s == 0 else load + sizes[s]
        vehicles.append(VehicleState(tuple(stops), tuple(arrs), float(ready), float(load)))

    revealed = set(state.revealed)
    revealed.update(i for i in range(1, inst.m + 1) if inst.releases[i] <= t_next)
    served = set(state.served)
    for vs in vehicles:
        for s, a in zip(vs.stops, vs.arrivals):
            if s and a + unl[s] <= t_next:
                served.add(s)
    return replace(state, now=t_next, revealed=frozenset(revealed), served=frozenset(served),
                   vehicles=tuple(vehicles))


def install(state: SimulationState, plan: Solution) -> SimulationState:
    return replace(state, plan=plan, plan_time=state.now)


# --- heuristic (Tree) planning --------------------------------------------------

def snapshot_forest(state: SimulationState, ws: Workspace, extra_ids: Sequence[int] = ()) -> Forest:
    inst = ws.instance
    nodes: list[ClusterNode] = []
    for v, vs in enumerate(state.vehicles):
        if vs.open_trip:
            for c in vs.trip_clients():
                nodes.append(ClusterNode(c, tuple(ws.coords[c]), float(ws.sizes[c]), v))
    for r in list(state.movable()) + list(extra_ids):
        nodes.append(ClusterNode(r, tuple(ws.coords[r]), float(ws.sizes[r])))
    idx = [n.request_index for n in nodes]
    sub = ws.dist[np.ix_(idx, idx)] if idx else None
    return cluster(nodes, inst.depot_location, inst.capacity, dist=sub)


def forest_to_suffixes(forest: Forest, state: SimulationState, ws: Workspace, rng) -> dict[int, list[int]]:
    """Turn trees into per-vehicle stop sequences (random initial order, then 2-OPT)."""
    committed = state.committed()
    bound: dict[int, list[int]] = {}
    unbound: list[list[int]] = []
    for tree in forest.trees():
        members = [i for i in tree if i not in committed]
        v = forest.bound_vehicle(tree)
        if v is None:
            unbound.append(members)
        else:
            bound[v] = members

    fleet = len(state.vehicles)
    order = sorted(range(fleet), key=lambda v: (state.vehicles[v].trip_load if state.vehicles[v].open_trip else 0.0, v))
    extra: dict[int, list[list[int]]] = {}
    for k, tree in enumerate(unbound):
        extra.setdefault(order[k % fleet], []).append(tree)

    suffixes: dict[int, list[int]] = {}
    for v, vs in enumerate(state.vehicles):
        if not vs.open_trip and v not in extra:
            continue  # nothing to plan for an idle vehicle
        parts: list[int] = []
        if vs.open_trip:
            members = list(bound.get(v, []))
            parts += [members[i] for i in rng.permutation(len(members))] + [0]
        for tree in extra.get(v, []):
            parts += [tree[i] for i in rng.permutation(len(tree))] + [0]
        suffix = normalize_suffix(vs, parts)
        if not suffix:
            continue
        route = MutableRoute(vs.stops + tuple(suffix), len(vs.stops))
        suffixes[v] = list(two_opt(route, ws.dist).stops[len(vs.stops):])
    return suffixes


def tree_plan(state: SimulationState, ws: Workspace, rng, forest: Forest | None = None,
              wsx: Workspace | None = None) -> Solution:
    """Kruskal clustering + 2-OPT on the snapshot; artificial stops (in ``wsx``) are stripped."""
    wsx = wsx or ws
    if forest is None:
        forest = snapshot_forest(state, wsx, range(ws.m + 1, wsx.n_nodes))
    suffixes = forest_to_suffixes(forest, state, wsx, rng)
    if wsx is not ws:
        suffixes = {v: strip_artificial(s, ws.m) for v, s in suffixes.items()}
    return build_plan(state, suffixes, ws)


# --- fallback -----------------------------------------------------------------------

def _route_len(start: int, suffix: Sequence[int], D) -> float:
    stops = (start, *suffix)
    return float(sum(D[a][b] for a, b in zip(stops, stops[1:])))


def insertion_fallback(state: SimulationState, ws: Workspace) -> Solution:
    """Keep the installed plan and add every unplanned request at its cheapest feasible position."""
    inst = ws.instance
    D = ws.dist_list
    suff = plan_suffixes(state.plan, state) if state.plan is not None else {}
    movable = set(state.movable())
    suff = {v: normalize_suffix(vs, [s for s in suff.get(v, []) if s == 0 or s in movable])
            for v, vs in enumerate(state.vehicles)}
    planned = {s for q in suff.values() for s in q if s}
    for r in sorted(movable - planned):
        best = None
        for v, vs in enumerate(state.vehicles):
            base = suff[v]
            base_len = _route_len(vs.position, base, D)
            cands = [base[:i] + [r] + base[i:] for i in range(len(base))] + [base + [r, 0]]
            for cand in cands:
                cand = normalize_suffix(vs, cand)
                if not trip_loads_ok(vs, cand, ws.sizes, inst.capacity):
                    continue
                arr = project(vs, cand, ws, state.now)
                late = max(0.0, arr[-1] - inst.t_end) if arr else 0.0
                key = (late > 1e-9, late, _route_len(vs.position, cand, D) - base_len, v)
                if best is None or key < best[0]:
                    best = (key, v, cand)
        suff[best[1]] = best[2]
    return build_plan(state, suff, ws)


# --- portfolio slice ------------------------------------------------------------------

@dataclass
class SliceOutcome:
    plan: Solution
    worker_costs: list[float]
    worker_feasible: list[bool]
    best_worker: int
    artificial: int
    fallback: bool
    ffe: int
    pso_histories: list[list[float]]


def _uses_pso(cfg: StrategyConfig, before_cutoff: bool) -> bool:
    return cfg.algorithm == "2mpso" or (cfg.algorithm == "mctree_pso" and not before_cutoff)


def _uses_mc(cfg: StrategyConfig, before_cutoff: bool) -> bool:
    return before_cutoff and cfg.algorithm in ("mctree", "mctree_pso")


def run_slice(state: SimulationState, instance: Instance | Workspace, cfg: StrategyConfig,
              seed_seq: np.random.SeedSequence) -> SliceOutcome:
    """Solve the frozen snapshot with ``cfg.workers`` independent runs and keep the best feasible plan."""
    ws = instance if isinstance(instance, Workspace) else Workspace.from_instance(instance)
    inst = ws.instance
    cut = cutoff_time(inst.t_start, inst.t_end, cfg.T_CO)
    before_cutoff = state.now < cut
    movable = state.movable()

    n_art = 0
    if _uses_mc(cfg, before_cutoff) and state.revealed:
        ctx = mc_requests.context_for(inst, sorted(state.revealed), state.now, cfg.T_CO)
        n_art = mc_requests.artificial_count(ctx)

    shared_forest = None
    if n_art == 0 and not _uses_pso(cfg, before_cutoff):
        shared_forest = snapshot_forest(state, ws)  # deterministic, identical for all workers

    candidates, histories, ffe = [], [], 0
    for w, child in enumerate(seed_seq.spawn(cfg.workers)):
        rng = np.random.default_rng(child)
        if n_art:
            extra = mc_requests.generate(ctx, rng)
            wsx = ws.with_artificial(extra)
            plan = tree_plan(state, ws, rng, wsx=wsx)
            ffe += 1
        elif _uses_pso(cfg, before_cutoff):
            seed_plan = tree_plan(state, ws, rng)
            hist: list[float] = []
            plan = optimize_assignment(movable, state, ws, cfg.pso, [seed_plan, state.plan], rng,
                                       centers_per_vehicle=cfg.centers_per_vehicle, history=hist)
            if cfg.route_pso:
                plan = _improve_orders(plan, state, ws, cfg.pso, rng)
            histories.append(hist)
            ffe += cfg.pso.swarm_size * cfg.pso.iterations  # the seeding heuristic is not counted
        else:
            plan = tree_plan(state, ws, rng, forest=shared_forest)
            ffe += 1
        candidates.append(plan)

    feas = [plan_is_feasible(p, state, ws) for p in candidates]
    costs = [p.total_cost for p in candidates]
    ok = [w for w in range(len(candidates)) if feas[w]]
    if ok:
        best = min(ok, key=lambda w: (costs[w], w))
        return SliceOutcome(candidates[best], costs, feas, best, n_art, False, ffe, histories)
    log.warning("slice at t=%.3f: all %d candidates infeasible, extending previous plan", state.now, len(candidates))
    plan = insertion_fallback(state, ws)
    return SliceOutcome(plan, costs, feas, -1, n_art, True, ffe, histories)


def _improve_orders(plan: Solution, state: SimulationState, ws: Workspace, params: PsoParams, rng) -> Solution:
    suff = plan_suffixes(plan, state)
    out = {}
    for v, s in suff.items():
        reqs = [x for x in s if x]
        cand = optimize_order(v, state, ws, reqs, params, rng) if reqs else s
        out[v] = cand if _route_len(state.vehicles[v].position, cand, ws.dist) < _route_len(
            state.vehicles[v].position, s, ws.dist) else s
    return build_plan(state, out, ws)


# --- whole day ----------------------------------------------------------------------

def slice_times(instance: Instance, time_slices: int) -> list[float]:
    span = instance.t_end - instance.t_start
    return [instance.t_start + k * span / time_slices for k in range(time_slices)]


def executed_solution(state: SimulationState, instance: Instance) -> Solution:
    routes = [Route(v, vs.stops, vs.arrivals) for v, vs in enumerate(state.vehicles) if len(vs.stops) > 1]
    return make_solution(routes, instance)


def run_day(instance: Instance, cfg: StrategyConfig, on_slice=None) -> DayResult:
    """Simulate the whole working day; the result holds the executed routes."""
    t0 = time.perf_counter()
    ws = Workspace.from_instance(instance)
    state = SimulationState.initial(instance)
    records: list[SliceRecord] = []
    histories: list[list[float]] = []
    ffe = 0
    for k, tau in enumerate(slice_times(instance, cfg.time_slices)):
        state = advance_to(state, tau, ws)
        out = run_slice(state, ws, cfg, np.random.SeedSequence([cfg.seed, k]))
        state = install(state, out.plan)
        ffe += out.ffe
        histories.extend(out.pso_histories)
        rec = SliceRecord(k, tau, len(state.revealed), out.artificial, out.best_worker,
                          out.plan.total_cost, out.fallback)
        records.append(rec)
        if on_slice is not None:
            on_slice(rec)
    state = advance_to(state, instance.t_end, ws)
    if any(state.suffix(v) for v in range(len(state.vehicles))):
        state = advance_to(state, math.inf, ws)
    final = executed_solution(state, instance)
    report = check_feasibility(final, instance)
    return DayResult(final, records, time.perf_counter() - t0, report, ffe, histories)
