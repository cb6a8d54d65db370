"""Instance files: canonical sectioned format, converters, cut-off preprocessing.

Canonical layout (UTF-8, sections in this order)::

    NAME: c50
    CAPACITY: 160
    HOURS: 0 700
    SPEED: 1
    FLEET: 50
    NODES:
    0 30 40 0 0 0
    1 37 52 7 123.5 20
    ...
    EOF

Node rows are ``<id> <x> <y> <demand> <arrival_time> <unload_time>``; id 0 is
the depot.
"""
from __future__ import annotations

import io
import os
import re
from dataclasses import dataclass
from math import isfinite
from pathlib import Path

import numpy as np

from .model import Instance, Request


class InstanceParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = f"{source or '<input>'}" + (f":{line}" if line is not None else "")
        super().__init__(f"{where}: {message}")


@dataclass
class RawInstanceFile:
    name: str
    capacity: float
    t_start: float
    t_end: float
    coords: dict[int, tuple[float, float]]
    demands: dict[int, float]
    arrivals: dict[int, float]
    unloads: dict[int, float]
    speed: float = 1.0
    fleet: int = 50

    @property
    def dimension(self) -> int:
        return len(self.coords)

    @property
    def m(self) -> int:
        return self.dimension - 1


@dataclass(frozen=True)
class CutoffConfig:
    T_CO: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.T_CO <= 1.0:
            raise ValueError(f"cut-off fraction must lie in (0, 1], got {self.T_CO}")


_HEADER_ORDER = ("NAME", "CAPACITY", "HOURS", "SPEED", "FLEET", "NODES")


def _number(tok: str, lineno: int, source, what: str) -> float:
    try:
        val = float(tok)
    except ValueError:
        raise InstanceParseError(f"non-numeric {what}: {tok!r}", lineno, source) from None
    if not isfinite(val):
        raise InstanceParseError(f"non-finite {what}: {tok!r}", lineno, source)
    return val


def _read_text(src) -> tuple[str, str | None]:
    if isinstance(src, (str, os.PathLike)):
        return Path(src).read_text(encoding="utf-8"), str(src)
    if isinstance(src, (bytes, bytearray)):
        return bytes(src).decode("utf-8"), None
    data = src.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return data, getattr(src, "name", None)


def parse_instance(src) -> RawInstanceFile:
    """Parse the canonical format from a path, bytes, or a text/binary stream."""
    text, source = _read_text(src)
    lines = text.splitlines()

    headers: dict[str, tuple[str, int]] = {}
    rows: list[tuple[int, list[str]]] = []
    expect = 0
    in_nodes = saw_eof = False
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == "EOF":
            saw_eof = True
            break
        if in_nodes:
            rows.append((lineno, line.split()))
            continue
        key, sep, value = line.partition(":")
        key = key.strip().upper()
        if not sep or key not in _HEADER_ORDER:
            raise InstanceParseError(f"unexpected line {line!r}", lineno, source)
        idx = _HEADER_ORDER.index(key)
        if idx != expect:
            missing = _HEADER_ORDER[expect]
            raise InstanceParseError(f"missing section {missing} (found {key})", lineno, source)
        expect += 1
        headers[key] = (value.strip(), lineno)
        if key == "NODES":
            in_nodes = True
    if expect < len(_HEADER_ORDER):
        raise InstanceParseError(f"missing section {_HEADER_ORDER[expect]}", None, source)
    if not saw_eof:
        raise InstanceParseError("missing section EOF", None, source)

    name = headers["NAME"][0]
    capacity = _number(headers["CAPACITY"][0], headers["CAPACITY"][1], source, "capacity")
    hours = headers["HOURS"][0].split()
    if len(hours) != 2:
        raise InstanceParseError("HOURS needs <t_start> <t_end>", headers["HOURS"][1], source)
    t_start, t_end = (_number(h, headers["HOURS"][1], source, "hours") for h in hours)
    speed = _number(headers["SPEED"][0], headers["SPEED"][1], source, "speed")
    fleet_val = _number(headers["FLEET"][0], headers["FLEET"][1], source, "fleet")
    if fleet_val != int(fleet_val) or fleet_val < 1:
        raise InstanceParseError(f"fleet must be a positive integer, got {headers['FLEET'][0]}",
                                 headers["FLEET"][1], source)
    if capacity <= 0:
        raise InstanceParseError("capacity must be positive", headers["CAPACITY"][1], source)
    if not t_start < t_end:
        raise InstanceParseError("HOURS must satisfy t_start < t_end", headers["HOURS"][1], source)

    parsed: dict[int, tuple[float, float, float, float, float, int]] = {}
    for lineno, toks in rows:
        if len(toks) != 6:
            raise InstanceParseError(f"node row needs 6 fields, got {len(toks)}", lineno, source)
        nid = _number(toks[0], lineno, source, "node id")
        if nid != int(nid) or nid < 0:
            raise InstanceParseError(f"node id must be a nonnegative integer: {toks[0]}", lineno, source)
        nid = int(nid)
        if nid in parsed:
            raise InstanceParseError(f"duplicate node id {nid}", lineno, source)
        x, y, dem, arr, unl = (_number(t, lineno, source, f)
                               for t, f in zip(toks[1:], ("x", "y", "demand", "arrival", "unload")))
        if dem < 0 or unl < 0:
            raise InstanceParseError("demand and unload time must be nonnegative", lineno, source)
        if dem > capacity:
            raise InstanceParseError(f"demand {dem} of node {nid} exceeds capacity {capacity}", lineno, source)
        parsed[nid] = (x, y, dem, arr, unl, lineno)
    if 0 not in parsed:
        raise InstanceParseError("no depot row (id 0)", headers["NODES"][1], source)
    if parsed[0][2] != 0:
        raise InstanceParseError("depot must have zero demand", parsed[0][5], source)

    # renumber clients to 1..m in ascending id order
    order = [0] + sorted(k for k in parsed if k != 0)
    raw = RawInstanceFile(name, capacity, t_start, t_end, {}, {}, {}, {}, speed, int(fleet_val))
    for new_id, old in enumerate(order):
        x, y, dem, arr, unl, _ = parsed[old]
        raw.coords[new_id] = (x, y)
        raw.demands[new_id] = dem
        raw.arrivals[new_id] = 0.0 if new_id == 0 else arr
        raw.unloads[new_id] = 0.0 if new_id == 0 else unl
    return raw


def _fmt(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)


def serialize_instance(raw: RawInstanceFile) -> str:
    out = [f"NAME: {raw.name}", f"CAPACITY: {_fmt(raw.capacity)}",
           f"HOURS: {_fmt(raw.t_start)} {_fmt(raw.t_end)}", f"SPEED: {_fmt(raw.speed)}",
           f"FLEET: {raw.fleet}", "NODES:"]
    for nid in sorted(raw.coords):
        x, y = raw.coords[nid]
        out.append(" ".join([str(nid), _fmt(x), _fmt(y), _fmt(raw.demands[nid]),
                             _fmt(raw.arrivals[nid]), _fmt(raw.unloads[nid])]))
    out.append("EOF")
    return "\n".join(out) + "\n"


def write_instance(raw: RawInstanceFile, path) -> None:
    Path(path).write_text(serialize_instance(raw), encoding="utf-8")


def cutoff_time(t_start: float, t_end: float, T_CO: float) -> float:
    return t_start + T_CO * (t_end - t_start)


def apply_cutoff(raw: RawInstanceFile, cfg: CutoffConfig | None = None) -> Instance:
    """Build an :class:`Instance`; requests arriving after the cut-off become known at t_start."""
    cfg = cfg or CutoffConfig()
    limit = cutoff_time(raw.t_start, raw.t_end, cfg.T_CO)
    requests = []
    for nid in range(1, raw.dimension):
        arr = raw.arrivals[nid]
        if arr > limit:
            arr = raw.t_start
        arr = max(arr, raw.t_start)
        requests.append(Request(nid, raw.coords[nid], raw.demands[nid], raw.unloads[nid], arr))
    return Instance(raw.name, raw.coords[0], raw.t_start, raw.t_end, raw.capacity,
                    raw.speed, raw.fleet, tuple(requests))


def instance_to_raw(inst: Instance) -> RawInstanceFile:
    raw = RawInstanceFile(inst.name, inst.capacity, inst.t_start, inst.t_end,
                          {0: tuple(inst.depot_location)}, {0: 0.0}, {0: 0.0}, {0: 0.0},
                          inst.speed, inst.fleet_size)
    for r in inst.requests:
        raw.coords[r.id] = tuple(r.location)
        raw.demands[r.id] = r.size
        raw.arrivals[r.id] = r.arrival_time
        raw.unloads[r.id] = r.unload_time
    return raw


def load_instance(path, T_CO: float = 0.5) -> Instance:
    """Read a canonical file (or a Kilby-layout file, detected by its header) and apply the cut-off."""
    text = Path(path).read_text(encoding="utf-8")
    if re.search(r"^\s*TIME_AVAIL_SECTION", text, re.M):
        raw = parse_kilby(text, source=str(path))
    else:
        raw = parse_instance(io.StringIO(text))
    return apply_cutoff(raw, CutoffConfig(T_CO))


# --- converters -------------------------------------------------------------

def _section_lines(lines: list[str], start: int):
    """Yield (lineno, tokens) after line index ``start`` until a non-numeric row."""
    for i in range(start + 1, len(lines)):
        toks = lines[i].split()
        if not toks:
            continue
        if not re.match(r"^-?\d", toks[0]):
            return
        yield i + 1, toks


def parse_tsplib_cvrp(text: str, source: str | None = None) -> dict:
    """Minimal TSPLIB reader for EUC_2D CVRP files (coordinates, demands, depot)."""
    lines = text.splitlines()
    spec: dict[str, str] = {}
    coords: dict[int, tuple[float, float]] = {}
    demands: dict[int, float] = {}
    depot = None
    for i, raw in enumerate(lines):
        line = raw.strip()
        if not line:
            continue
        head = line.split(":")[0].strip().upper() if ":" in line else line.split()[0].upper()
        if head == "NODE_COORD_SECTION":
            for ln, t in _section_lines(lines, i):
                if len(t) < 3:
                    raise InstanceParseError("coordinate row needs id x y", ln, source)
                coords[int(t[0])] = (_number(t[1], ln, source, "x"), _number(t[2], ln, source, "y"))
        elif head == "DEMAND_SECTION":
            for ln, t in _section_lines(lines, i):
                demands[int(t[0])] = _number(t[1], ln, source, "demand")
        elif head == "DEPOT_SECTION":
            for ln, t in _section_lines(lines, i):
                if int(t[0]) == -1:
                    break
                if depot is None:
                    depot = int(t[0])
        elif ":" in line and not line[0].isdigit():
            k, _, v = line.partition(":")
            spec[k.strip().upper()] = v.strip()
    ewt = spec.get("EDGE_WEIGHT_TYPE", "EUC_2D")
    if ewt != "EUC_2D":
        raise InstanceParseError(f"unsupported EDGE_WEIGHT_TYPE {ewt}", None, source)
    for sec, tab in (("NODE_COORD_SECTION", coords), ("DEMAND_SECTION", demands)):
        if not tab:
            raise InstanceParseError(f"missing section {sec}", None, source)
    if "CAPACITY" not in spec:
        raise InstanceParseError("missing CAPACITY", None, source)
    return {"name": spec.get("NAME", "unnamed"), "capacity": float(spec["CAPACITY"]),
            "coords": coords, "demands": demands, "depot": depot if depot is not None else min(coords)}


def parse_times_table(text: str, source: str | None = None) -> dict:
    """Arrival/unload table: optional ``HOURS:``, ``FLEET:``, ``SPEED:`` headers then
    ``<node id> <arrival_time> <unload_time>`` rows keyed by the TSPLIB node ids."""
    out: dict = {"hours": None, "fleet": None, "speed": None, "rows": {}}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if ":" in line:
            k, _, v = line.partition(":")
            k = k.strip().upper()
            if k == "HOURS":
                a, b = v.split()
                out["hours"] = (_number(a, lineno, source, "hours"), _number(b, lineno, source, "hours"))
            elif k == "FLEET":
                out["fleet"] = int(_number(v.strip(), lineno, source, "fleet"))
            elif k == "SPEED":
                out["speed"] = _number(v.strip(), lineno, source, "speed")
            else:
                raise InstanceParseError(f"unknown header {k}", lineno, source)
            continue
        t = line.split()
        if len(t) != 3:
            raise InstanceParseError("times row needs <id> <arrival> <unload>", lineno, source)
        nid = int(_number(t[0], lineno, source, "node id"))
        if nid in out["rows"]:
            raise InstanceParseError(f"duplicate node id {nid}", lineno, source)
        out["rows"][nid] = (_number(t[1], lineno, source, "arrival"), _number(t[2], lineno, source, "unload"))
    return out


def convert_tsplib(tsplib_text: str, times_text: str, *, t_start: float = 0.0, t_end: float | None = None,
                   fleet: int = 50, speed: float = 1.0, default_unload: float = 0.0) -> RawInstanceFile:
    tsp = parse_tsplib_cvrp(tsplib_text)
    times = parse_times_table(times_text)
    if times["hours"] is not None:
        t_start, t_end = times["hours"]
    if t_end is None:
        raise InstanceParseError("working hours unknown: give HOURS in the times table or t_end")
    fleet = times["fleet"] or fleet
    speed = times["speed"] or speed
    depot = tsp["depot"]
    clients = sorted(k for k in tsp["coords"] if k != depot)
    raw = RawInstanceFile(tsp["name"], tsp["capacity"], t_start, t_end,
                          {0: tsp["coords"][depot]}, {0: 0.0}, {0: 0.0}, {0: 0.0}, speed, fleet)
    for new_id, nid in enumerate(clients, start=1):
        if nid not in tsp["demands"]:
            raise InstanceParseError(f"node {nid} has no demand")
        arr, unl = times["rows"].get(nid, (t_start, default_unload))
        raw.coords[new_id] = tsp["coords"][nid]
        raw.demands[new_id] = tsp["demands"][nid]
        if raw.demands[new_id] > raw.capacity:
            raise InstanceParseError(f"demand of node {nid} exceeds capacity")
        raw.arrivals[new_id] = arr
        raw.unloads[new_id] = unl
    return raw


def parse_kilby(text: str, source: str | None = None) -> RawInstanceFile:
    """Reader for the sectioned dynamic benchmark layout (NUM_VEHICLES, CAPACITIES,
    DEMAND_SECTION with negative delivery demands, LOCATION_COORD_SECTION,
    VISIT_LOCATION_SECTION, DURATION_SECTION, DEPOT_TIME_WINDOW_SECTION,
    TIME_AVAIL_SECTION)."""
    lines = text.splitlines()
    spec: dict[str, str] = {}
    tables: dict[str, dict[int, list[str]]] = {}
    current = None
    for i, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line == "EOF":
            continue
        first = line.split()[0]
        if re.match(r"^-?\d", first):
            if current is None:
                raise InstanceParseError(f"data row outside a section: {line!r}", i, source)
            toks = line.split()
            tables[current].setdefault(int(toks[0]), toks[1:])
            continue
        if ":" in line:
            k, _, v = line.partition(":")
            spec[k.strip().upper()] = v.strip()
            current = None
            continue
        current = first.upper()
        tables.setdefault(current, {})

    def need(sec):
        if sec not in tables:
            raise InstanceParseError(f"missing section {sec}", None, source)
        return tables[sec]

    coords_tab = need("LOCATION_COORD_SECTION")
    demand_tab = need("DEMAND_SECTION")
    dur_tab = tables.get("DURATION_SECTION", {})
    avail_tab = need("TIME_AVAIL_SECTION")
    visit_loc = tables.get("VISIT_LOCATION_SECTION", {})
    depot_loc = tables.get("DEPOT_LOCATION_SECTION", {})
    depots = sorted(tables.get("DEPOTS", {0: []}))
    depot_id = depots[0] if depots else 0
    tw = tables.get("DEPOT_TIME_WINDOW_SECTION", {})
    if depot_id in tw and len(tw[depot_id]) >= 2:
        t_start, t_end = float(tw[depot_id][0]), float(tw[depot_id][1])
    else:
        raise InstanceParseError("missing depot working hours (DEPOT_TIME_WINDOW_SECTION)", None, source)
    cap_txt = spec.get("CAPACITIES") or spec.get("CAPACITY")
    if cap_txt is None:
        raise InstanceParseError("missing CAPACITIES", None, source)
    capacity = float(cap_txt.split()[0])
    fleet = int(float(spec.get("NUM_VEHICLES", "50")))

    def loc(node, mapping):
        lid = int(mapping[node][0]) if node in mapping else node
        if lid not in coords_tab:
            raise InstanceParseError(f"no coordinates for location {lid}", None, source)
        x, y = coords_tab[lid][:2]
        return (float(x), float(y))

    raw = RawInstanceFile(spec.get("NAME", "unnamed"), capacity, t_start, t_end,
                          {0: loc(depot_id, depot_loc)}, {0: 0.0}, {0: 0.0}, {0: 0.0}, 1.0, fleet)
    visits = sorted(v for v in demand_tab if v != depot_id)
    for new_id, v in enumerate(visits, start=1):
        raw.coords[new_id] = loc(v, visit_loc)
        raw.demands[new_id] = abs(float(demand_tab[v][0]))
        raw.unloads[new_id] = float(dur_tab[v][0]) if v in dur_tab else 0.0
        if v not in avail_tab:
            raise InstanceParseError(f"visit {v} missing from TIME_AVAIL_SECTION", None, source)
        raw.arrivals[new_id] = float(avail_tab[v][0])
        if raw.demands[new_id] > capacity:
            raise InstanceParseError(f"demand of visit {v} exceeds capacity", None, source)
    return raw


def random_raw_instance(m: int, seed: int = 0, *, name: str | None = None, side: float = 100.0,
                        capacity: float = 160.0, demand_range: tuple[int, int] = (3, 41),
                        unload: float = 10.0, day: float | None = None, fleet: int = 50,
                        clustered: bool = False) -> RawInstanceFile:
    """Synthetic dynamic instance shaped like the Christofides-derived benchmarks:
    central depot, integer demands, arrivals uniform over the day."""
    rng = np.random.default_rng(seed)
    if clustered:
        centers = rng.uniform(0, side, size=(max(2, m // 15), 2))
        pts = centers[rng.integers(len(centers), size=m)] + rng.normal(0, side / 12, size=(m, 2))
        pts = np.clip(pts, 0, side)
    else:
        pts = rng.uniform(0, side, size=(m, 2))
    pts = np.round(pts, 0)
    dem = rng.integers(demand_range[0], demand_range[1], size=m).astype(float)
    dem = np.minimum(dem, capacity)
    if day is None:
        # generous enough for any single trip started at the cut-off
        day = 4.0 * side * 1.5 + 20 * unload
    arr = np.round(rng.uniform(0, day, size=m), 2)
    depot = (side / 2, side / 2)
    raw = RawInstanceFile(name or f"rand{m}_{seed}", capacity, 0.0, float(day),
                          {0: depot}, {0: 0.0}, {0: 0.0}, {0: 0.0}, 1.0, fleet)
    for i in range(m):
        raw.coords[i + 1] = (float(pts[i, 0]), float(pts[i, 1]))
        raw.demands[i + 1] = float(dem[i])
        raw.arrivals[i + 1] = float(arr[i])
        raw.unloads[i + 1] = float(unload)
    return raw
