"""Shortest paths, connectivity and circulation checks on directed arc lists.

Functions here accept any object exposing ``nodes``, ``arcs`` (each with
``tail``, ``head``, ``length``) and ``index`` (node id -> position), which
is what :class:`equitransit.network.RoadNetwork` provides.  Distances are
dense ``numpy`` arrays indexed by node position; ``inf`` marks "no path".
"""

from __future__ import annotations

import heapq
from collections.abc import Iterable
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from equitransit.network import RoadNetwork

INF = float("inf")


def _adjacency(network: RoadNetwork, restrict: Iterable[int] | None) -> list[list[tuple[int, int]]]:
    """Outgoing (arc id, head position) lists, optionally limited to ``restrict``."""
    n = len(network.nodes)
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    arc_ids = range(len(network.arcs)) if restrict is None else sorted(set(restrict))
    for a in arc_ids:
        arc = network.arcs[a]
        adj[network.index[arc.tail]].append((a, network.index[arc.head]))
    return adj


def dijkstra(
    network: RoadNetwork, source: int, adj: list[list[tuple[int, int]]]
) -> tuple[np.ndarray, list[int]]:
    """Label-setting shortest paths from node position ``source``.

    Returns distances and, per node, the arc id used to reach it (-1 for the
    source and unreachable nodes).  Ties are resolved by arc id so results are
    reproducible.
    """
    n = len(network.nodes)
    dist = np.full(n, INF)
    pred = [-1] * n
    dist[source] = 0.0
    done = [False] * n
    heap: list[tuple[float, int]] = [(0.0, source)]
    while heap:
        d, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        for a, w in adj[v]:
            nd = d + network.arcs[a].length
            if nd < dist[w] or (nd == dist[w] and not done[w] and a < pred[w]):
                dist[w] = nd
                pred[w] = a
                heapq.heappush(heap, (nd, w))
    return dist, pred


def all_pairs_shortest(network: RoadNetwork, restrict: Iterable[int] | None = None) -> np.ndarray:
    """Dense matrix of shortest path lengths over the (restricted) arc set."""
    adj = _adjacency(network, restrict)
    n = len(network.nodes)
    out = np.empty((n, n))
    for s in range(n):
        out[s], _ = dijkstra(network, s, adj)
    return out


def shortest_path_arcs(pred: list[int], network: RoadNetwork, source: int, target: int) -> list[int]:
    """Walk a predecessor list back from ``target``; empty if unreachable."""
    path: list[int] = []
    v = target
    while v != source:
        a = pred[v]
        if a < 0:
            return []
        path.append(a)
        v = network.index[network.arcs[a].tail]
    path.reverse()
    return path


def _reachable(n: int, adj: list[list[int]], start: int) -> int:
    seen = [False] * n
    seen[start] = True
    stack = [start]
    count = 1
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if not seen[w]:
                seen[w] = True
                count += 1
                stack.append(w)
    return count


def is_strongly_connected(network: RoadNetwork) -> bool:
    n = len(network.nodes)
    if n <= 1:
        return True
    fwd: list[list[int]] = [[] for _ in range(n)]
    rev: list[list[int]] = [[] for _ in range(n)]
    for arc in network.arcs:
        t, h = network.index[arc.tail], network.index[arc.head]
        fwd[t].append(h)
        rev[h].append(t)
    return _reachable(n, fwd, 0) == n and _reachable(n, rev, 0) == n


def degree_imbalance(network: RoadNetwork, arc_subset: Iterable[int]) -> np.ndarray:
    """Out-degree minus in-degree per node for the selected arcs."""
    balance = np.zeros(len(network.nodes), dtype=int)
    for a in arc_subset:
        arc = network.arcs[a]
        balance[network.index[arc.tail]] += 1
        balance[network.index[arc.head]] -= 1
    return balance


def is_circulation(network: RoadNetwork, arc_subset: Iterable[int]) -> bool:
    return not degree_imbalance(network, arc_subset).any()
