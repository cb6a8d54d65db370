"""Capacitated clustering of requests with a modified Kruskal forest.

Edges are scanned by ascending length; two trees merge only if their joint
weight fits in one vehicle and the edge is no longer than either endpoint's
distance to the depot. Clients already committed to a vehicle start out as
one pre-merged tree bound to that vehicle.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ClusteringInfeasible(ValueError):
    pass


@dataclass(frozen=True)
class ClusterNode:
    request_index: int
    location: tuple[float, float]
    weight: float
    fixed_to: int | None = None


@dataclass
class Forest:
    nodes: list[ClusterNode]
    parent: list[int]
    weight: dict[int, float]
    binding: dict[int, int | None]
    edges: list[tuple[int, int, float]] = field(default_factory=list)  # merged (request, request, length)

    def find(self, i: int) -> int:
        parent = self.parent
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def trees(self) -> list[list[int]]:
        """Request indices grouped by tree, each sorted; trees ordered by smallest member."""
        groups: dict[int, list[int]] = {}
        for pos, n in enumerate(self.nodes):
            groups.setdefault(self.find(pos), []).append(n.request_index)
        return sorted((sorted(g) for g in groups.values()), key=lambda g: g[0])

    def tree_of(self, request_index: int) -> int:
        for pos, n in enumerate(self.nodes):
            if n.request_index == request_index:
                return self.find(pos)
        raise KeyError(request_index)

    def bound_vehicle(self, tree: list[int]) -> int | None:
        return self.binding[self.tree_of(tree[0])]

    def tree_weight(self, tree: list[int]) -> float:
        return self.weight[self.tree_of(tree[0])]


def cluster(requests: list[ClusterNode], depot, capacity: float, *, small_distance_rule: bool = True,
            dist: np.ndarray | None = None) -> Forest:
    """Run the modified Kruskal algorithm.

    ``dist`` optionally supplies the node-to-node distance matrix in the order of
    ``requests`` (saves recomputation when the caller already has one).
    """
    nodes = sorted(requests, key=lambda n: n.request_index)
    n = len(nodes)
    for nd in nodes:
        if nd.weight > capacity:
            raise ClusteringInfeasible(f"request {nd.request_index} weight {nd.weight} exceeds capacity {capacity}")

    parent = list(range(n))
    weight = {i: nodes[i].weight for i in range(n)}
    binding: dict[int, int | None] = {i: nodes[i].fixed_to for i in range(n)}
    forest = Forest(nodes, parent, weight, binding)

    # pre-merge each vehicle's fixed clients into one tree
    groups: dict[int, int] = {}
    for i, nd in enumerate(nodes):
        if nd.fixed_to is None:
            continue
        if nd.fixed_to in groups:
            r = groups[nd.fixed_to]
            parent[i] = r
            weight[r] += weight.pop(i)
            binding.pop(i)
        else:
            groups[nd.fixed_to] = i
    for v, r in groups.items():
        if weight[r] > capacity + 1e-9:
            raise ClusteringInfeasible(f"fixed clients of vehicle {v} already exceed capacity")
    if n < 2:
        return forest

    if dist is None:
        pts = np.array([nd.location for nd in nodes], dtype=float)
        dist = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    else:
        order = np.argsort([nd.request_index for nd in requests], kind="stable")
        if not np.array_equal(order, np.arange(n)):
            dist = dist[np.ix_(order, order)]
    dx, dy = depot
    locs = np.array([nd.location for nd in nodes], dtype=float)
    to_depot = np.hypot(locs[:, 0] - dx, locs[:, 1] - dy)
    free = np.array([nd.fixed_to is None for nd in nodes])
    w = np.array([nd.weight for nd in nodes])

    iu, ju = np.triu_indices(n, k=1)
    keep = free[iu] | free[ju]  # no edges between fixed clients
    lengths = dist[iu, ju]
    # edges no merge could ever accept are dropped before the scan
    keep &= (w[iu] + w[ju]) <= capacity
    if small_distance_rule:
        keep &= (lengths <= to_depot[iu]) & (lengths <= to_depot[ju])
    iu, ju, lengths = iu[keep], ju[keep], lengths[keep]
    # ascending length, ties by (smaller index, partner index)
    order = np.lexsort((ju, iu, lengths))

    find = forest.find
    for e in order:
        a, b = int(iu[e]), int(ju[e])
        ra, rb = find(a), find(b)
        if ra == rb:
            continue
        if weight[ra] + weight[rb] > capacity:
            continue
        ba, bb = binding[ra], binding[rb]
        if ba is not None and bb is not None:
            continue
        # small-distance rule already applied by the prefilter when enabled
        if ra > rb:
            ra, rb = rb, ra
        parent[rb] = ra
        weight[ra] += weight.pop(rb)
        binding[ra] = ba if ba is not None else bb
        binding.pop(rb)
        forest.edges.append((nodes[a].request_index, nodes[b].request_index, float(lengths[e])))
    return forest
