"""Experiment runner: repeated seeded day simulations, min/avg tables, time scaling fit."""
from __future__ import annotations

import csv
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .instance_io import load_instance
from .model import Instance
from .simulator import StrategyConfig, run_day

# Published min/avg route lengths per benchmark, columns: Tree 200TSx8P,
# MCTree 200TSx8P, MCTree+PSO 20TS+20TS(7x49) and 2MPSO 40TSx8P(4x28).
REFERENCE_RESULTS: dict[str, dict[str, tuple[float, float]]] = {}
_REF = """
c50 673.34 721.51 654.69 700.49 621.27 677.03 566.98 610.47
c75 1049.07 1117.71 1038.80 1123.43 998.72 1066.00 927.22 988.06
c100 1095.82 1193.98 1004.15 1119.42 979.95 1066.44 930.33 1038.53
c100b 828.94 843.07 828.94 836.75 823.23 831.72 828.63 858.75
c120 1072.86 1106.33 1078.23 1109.12 1068.46 1100.28 1071.20 1112.88
c150 1318.78 1463.85 1269.23 1399.93 1223.15 1323.35 1205.80 1306.79
c199 1644.67 1824.89 1571.05 1702.24 1533.68 1601.22 1471.16 1597.98
f71 290.37 348.80 303.49 333.99 288.72 323.85 278.56 310.31
f134 12730.29 13501.66 12719.73 13474.06 12134.30 12473.32 12377.63 12746.26
tai75a 1864.10 2016.29 1929.44 2016.40 1899.17 1980.37 1832.11 1957.01
tai75b 1578.05 1631.85 1523.07 1655.02 1515.71 1582.37 1499.58 1611.63
tai75c 1614.94 1800.66 1570.30 1704.14 1526.75 1657.88 1555.36 1642.58
tai75d 1431.89 1612.26 1430.75 1467.25 1426.39 1456.08 1444.70 1520.84
tai100a 2359.58 2651.78 2441.47 2640.06 2344.78 2532.85 2311.19 2467.77
tai100b 2324.19 2475.94 2297.78 2446.81 2221.67 2344.13 2204.54 2323.27
tai100c 1621.59 1752.83 1619.81 1742.85 1580.00 1676.72 1566.75 1675.89
tai100d 2019.34 2195.64 1909.52 2050.51 1888.07 2000.07 1789.90 1960.36
tai150a 3599.62 3839.13 3555.79 3711.96 3607.78 3763.44 3664.12 3904.32
tai150b 3052.73 3377.34 3145.64 3268.63 3070.44 3226.49 3104.98 3238.59
tai150c 2718.31 2867.25 2707.18 2844.86 2614.59 2725.45 2734.77 2874.79
tai150d 3194.07 3419.10 3100.97 3352.11 3081.26 3200.29 3134.93 3247.68
tai385 29088.27 31144.04 31331.32 33037.53 31876.05 33786.47 30122.29 32433.18
"""
for _line in _REF.strip().splitlines():
    _name, *_v = _line.split()
    _v = [float(x) for x in _v]
    REFERENCE_RESULTS[_name] = {"tree": (_v[0], _v[1]), "mctree": (_v[2], _v[3]),
                           "mctree_pso": (_v[4], _v[5]), "2mpso": (_v[6], _v[7])}
REFERENCE_SUMS = {"tree": (77170.82, 82905.91), "mctree": (79031.35, 83737.56),
                     "mctree_pso": (78324.14, 82395.82), "2mpso": (76622.73, 81427.94)}

BENCHMARK_NAMES = tuple(REFERENCE_RESULTS)
FAIL_MARK = "FAIL"


@dataclass(frozen=True)
class ResultRow:
    instance: str
    requests: int
    algorithm: str
    slices: int
    workers: int
    pso: str
    repetition: int
    seed: int
    cost: float
    wall_time: float
    feasible: bool

    @property
    def config_label(self) -> str:
        lab = f"{self.algorithm} {self.slices}TSx{self.workers}P"
        return lab if self.pso == "-" else f"{lab} ({self.pso})"

    def cost_key(self):
        return (self.instance, self.algorithm, self.slices, self.workers, self.pso, self.repetition, self.seed,
                self.cost if not math.isnan(self.cost) else None, self.feasible)


CSV_COLUMNS = [f.name for f in fields(ResultRow)]


@dataclass
class ExperimentSpec:
    instances: Sequence[str | os.PathLike | Instance]
    configs: Sequence[StrategyConfig]
    repetitions: int = 30
    base_seed: int = 0
    output: str | os.PathLike | None = None
    T_CO: float = 0.5
    parallel: int = 1
    errors: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")


def _load(src, T_CO: float) -> Instance:
    return src if isinstance(src, Instance) else load_instance(src, T_CO)


def run_one(instance: Instance, cfg: StrategyConfig, repetition: int, seed: int) -> ResultRow:
    cfg = StrategyConfig(**{**cfg.__dict__, "seed": seed})
    t0 = time.perf_counter()
    try:
        res = run_day(instance, cfg)
        cost, feasible = res.cost, res.feasible
    except Exception:  # recorded as a failed run, the batch goes on
        cost, feasible = float("nan"), False
    wall = time.perf_counter() - t0
    return ResultRow(instance.name, instance.m, cfg.algorithm, cfg.time_slices, cfg.workers, cfg.pso_label,
                     repetition, seed, cost, wall, feasible)


def _run_job(job):
    return run_one(*job)


def run_experiment(spec: ExperimentSpec) -> list[ResultRow]:
    """Run repetitions x configs x instances; seeds are ``base_seed + repetition``."""
    instances = []
    for src in spec.instances:
        try:
            instances.append(_load(src, spec.T_CO))
        except Exception as exc:
            spec.errors.append(f"{src}: {exc}")
    jobs = [(inst, cfg, rep, spec.base_seed + rep)
            for inst in instances for cfg in spec.configs for rep in range(spec.repetitions)]
    if spec.parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.parallel) as ex:
            rows = list(ex.map(_run_job, jobs))
    else:
        rows = [_run_job(j) for j in jobs]
    if spec.output is not None:
        write_csv(rows, spec.output)
    return rows


# --- CSV -----------------------------------------------------------------------------

def rows_to_csv(rows: Iterable[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([r.instance, r.requests, r.algorithm, r.slices, r.workers, r.pso, r.repetition, r.seed,
                    repr(float(r.cost)), repr(float(r.wall_time)), int(r.feasible)])
    return buf.getvalue()


def write_csv(rows: Iterable[ResultRow], path) -> None:
    Path(path).write_text(rows_to_csv(rows), encoding="utf-8")


def parse_csv(text: str) -> list[ResultRow]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    out = []
    for d in reader:
        out.append(ResultRow(d["instance"], int(d["requests"]), d["algorithm"], int(d["slices"]),
                             int(d["workers"]), d["pso"], int(d["repetition"]), int(d["seed"]),
                             float(d["cost"]), float(d["wall_time"]), d["feasible"] in ("1", "True", "true")))
    return out


def read_csv(path) -> list[ResultRow]:
    return parse_csv(Path(path).read_text(encoding="utf-8"))


# --- aggregation and report ------------------------------------------------------------

@dataclass(frozen=True)
class Aggregate:
    runs: int
    feasible: int
    min: float
    avg: float


def aggregate(rows: Iterable[ResultRow]) -> dict[tuple[str, str], Aggregate]:
    groups: dict[tuple[str, str], list[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.instance, r.config_label), []).append(r)
    out = {}
    for key, rs in groups.items():
        costs = [r.cost for r in rs if r.feasible and not math.isnan(r.cost)]
        out[key] = Aggregate(len(rs), len(costs), min(costs) if costs else math.nan,
                             float(np.mean(costs)) if costs else math.nan)
    return out


def _cell(x) -> str:
    if x is None:
        return "-"
    return FAIL_MARK if math.isnan(x) else f"{x:.2f}"


def report(rows: Sequence[ResultRow], reference: bool = True) -> tuple[str, str]:
    """Per-instance Min/Avg table (text) and the same aggregates as CSV."""
    if not rows:
        raise ValueError("no rows to report")
    agg = aggregate(rows)
    instances = list(dict.fromkeys(r.instance for r in rows))
    configs = list(dict.fromkeys(r.config_label for r in rows))
    algo_of = {r.config_label: r.algorithm for r in rows}

    header = ["instance"]
    for c in configs:
        header += [f"{c} min", f"{c} avg"]
        if reference:
            header += ["ref min", "ref avg"]
    table = [header]
    sums: list = [0.0] * (len(header) - 1)
    for inst in instances:
        line = [inst]
        for c in configs:
            a = agg.get((inst, c), Aggregate(0, 0, math.nan, math.nan))
            vals = [a.min, a.avg]
            if reference:
                vals += list(REFERENCE_RESULTS.get(inst, {}).get(algo_of[c], (None, None)))
            line += vals
        for i, v in enumerate(line[1:]):
            # nan (failed) propagates; a missing reference blanks the reference sum
            sums[i] = None if v is None or sums[i] is None else sums[i] + v
        table.append(line)
    table.append(["sum"] + sums)

    widths = [max(len(str(x) if isinstance(x, str) else _cell(x)) for x in col) for col in zip(*table)]
    text_lines = []
    for line in table:
        cells = [str(x) if isinstance(x, str) else _cell(x) for x in line]
        text_lines.append("  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(cells, widths))))
    text = "\n".join(text_lines) + "\n"

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["instance", "config", "runs", "feasible", "min", "avg", "ref_min", "ref_avg"])
    for inst in instances:
        for c in configs:
            a = agg.get((inst, c))
            if a is None:
                continue
            ref = REFERENCE_RESULTS.get(inst, {}).get(algo_of[c], (math.nan, math.nan))
            w.writerow([inst, c, a.runs, a.feasible, repr(a.min), repr(a.avg), repr(ref[0]), repr(ref[1])])
    return text, buf.getvalue()


# --- scaling ------------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    r2: float
    sizes: tuple[int, ...]
    mean_times: tuple[float, ...]

    def __iter__(self):
        return iter((self.slope, self.intercept, self.r2))


def fit_scaling(rows: Iterable[ResultRow]) -> ScalingFit:
    """Least squares of mean wall time per instance size against m^2 ln m."""
    by_size: dict[int, list[float]] = {}
    for r in rows:
        by_size.setdefault(r.requests, []).append(r.wall_time)
    if len(by_size) < 2:
        raise ValueError(f"need at least 2 distinct instance sizes, got {len(by_size)}")
    sizes = sorted(by_size)
    m = np.array(sizes, dtype=float)
    x = m ** 2 * np.log(m)
    y = np.array([np.mean(by_size[s]) for s in sizes])
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return ScalingFit(float(slope), float(intercept), r2, tuple(sizes), tuple(float(v) for v in y))


# --- benchmark lookup ---------------------------------------------------------------------

def benchmark_dir() -> Path:
    env = os.environ.get("DVRP_BENCHMARKS")
    return Path(env) if env else Path(__file__).resolve().parents[2] / "benchmarks"


def find_benchmark(name: str, directory: str | os.PathLike | None = None) -> Path | None:
    """Locate ``name`` as ``<name>.dvrp`` (canonical) or a Kilby-layout ``<name>D.txt`` / ``<name>.txt``."""
    d = Path(directory) if directory is not None else benchmark_dir()
    for cand in (f"{name}.dvrp", f"{name}D.txt", f"{name}.txt", f"{name}.vrp"):
        p = d / cand
        if p.is_file():
            return p
    return None
