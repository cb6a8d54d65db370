import math
from collections import OrderedDict

import numpy as np
import pytest

from dvrpkit.model import Instance, Request
from dvrpkit import bench


def make_instance(points, sizes=None, *, depot=(0.0, 0.0), capacity=10.0, t_start=0.0, t_end=1000.0,
                  unloads=None, arrivals=None, fleet=5, speed=1.0, name="t"):
    m = len(points)
    sizes = [1.0] * m if sizes is None else sizes
    unloads = [0.0] * m if unloads is None else unloads
    arrivals = [t_start] * m if arrivals is None else arrivals
    reqs = tuple(Request(i + 1, tuple(map(float, points[i])), float(sizes[i]), float(unloads[i]),
                         float(arrivals[i])) for i in range(m))
    return Instance(name, tuple(map(float, depot)), t_start, t_end, capacity, speed, fleet, reqs)


@pytest.fixture
def instance_factory():
    return make_instance


def benchmark_paths(names):
    """Map names to files; missing ones are listed so data-dependent checks can fail loudly."""
    found, missing = OrderedDict(), []
    for n in names:
        p = bench.find_benchmark(n)
        if p is None:
            missing.append(n)
        else:
            found[n] = p
    return found, missing


def require_benchmarks(names):
    found, missing = benchmark_paths(names)
    if missing:
        pytest.fail(f"benchmark files not available: {', '.join(missing)} "
                    f"(looked in {bench.benchmark_dir()}; set DVRP_BENCHMARKS to the directory holding them)",
                    pytrace=False)
    return found


def brute_force_tour(points_idx, start, end, D):
    """Shortest path start -> perm(points) -> end by full enumeration (vectorised)."""
    from itertools import permutations
    pts = list(points_idx)
    if not pts:
        return D[start][end], ()
    perms = np.array(list(permutations(pts)))
    Dm = np.asarray(D)
    cost = Dm[start, perms[:, 0]] + Dm[perms[:, -1], end]
    for k in range(perms.shape[1] - 1):
        cost = cost + Dm[perms[:, k], perms[:, k + 1]]
    best = int(np.argmin(cost))
    return float(cost[best]), tuple(perms[best])


# --- per-criterion summary --------------------------------------------------------

_criteria: dict[int, dict] = {}
_info: dict[int, list[str]] = {}


def criterion_note(number: int, text: str) -> None:
    """Extra line shown under the criterion in the terminal summary."""
    _info.setdefault(number, []).append(text)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    num, title = mark.args
    entry = _criteria.setdefault(num, {"title": title, "ok": True, "ran": False, "notes": []})
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        entry["ran"] = True
        if rep.outcome != "passed":
            entry["ok"] = False
            msg = str(rep.longrepr).strip().splitlines()
            entry["notes"].append(msg[-1] if msg else rep.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_criteria):
        e = _criteria[num]
        status = "PASS" if e["ok"] and e["ran"] else "FAIL"
        tr.write_line(f"criterion {num}: {status}  {e['title']}")
        for n in _info.get(num, []):
            tr.write_line(f"    {n}")
        if status == "FAIL":
            for n in e["notes"][:2]:
                tr.write_line(f"    {n[:300]}")


def close(a, b, tol=1e-9):
    return math.isclose(a, b, rel_tol=0, abs_tol=tol)
