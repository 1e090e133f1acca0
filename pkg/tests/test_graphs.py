import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import cycle_network
from equitransit import graphs
from equitransit.network import RoadNetwork


def floyd(n, arcs):
    d = [[0.0 if i == j else math.inf for j in range(n)] for i in range(n)]
    for t, h, w in arcs:
        d[t][h] = min(d[t][h], w)
    for k in range(n):
        for i in range(n):
            for j in range(n):
                d[i][j] = min(d[i][j], d[i][k] + d[k][j])
    return d


def test_two_node():
    net = RoadNetwork.from_arcs([("o", "d", 3.0), ("d", "o", 4.0)])
    dist = graphs.all_pairs_shortest(net)
    assert dist[0, 1] == 3.0 and dist[1, 0] == 4.0
    empty = graphs.all_pairs_shortest(net, restrict=[])
    assert np.isinf(empty[0, 1]) and np.isinf(empty[1, 0]) and empty[0, 0] == 0.0


def test_cycle_restriction():
    net = cycle_network()
    i = net.index
    assert graphs.all_pairs_shortest(net)[i[2], i[1]] == 1.0
    assert graphs.all_pairs_shortest(net, restrict=[0, 1, 2])[i[2], i[1]] == 3.0


def test_path_reconstruction():
    net = cycle_network()
    dist, pred = graphs.dijkstra(net, net.index[2], graphs._adjacency(net, [0, 1, 2]))
    path = graphs.shortest_path_arcs(pred, net, net.index[2], net.index[1])
    assert path == [1, 2]
    assert sum(net.arcs[a].length for a in path) == dist[net.index[1]]


def test_strong_connectivity():
    assert graphs.is_strongly_connected(RoadNetwork.from_arcs([], nodes=[1]))
    assert graphs.is_strongly_connected(cycle_network())


def test_one_way_pair_not_strongly_connected():
    from equitransit.network import Arc, Node

    net = object.__new__(RoadNetwork)
    object.__setattr__(net, "nodes", (Node("o"), Node("d")))
    object.__setattr__(net, "arcs", (Arc("o", "d", 1.0, 1.0),))
    assert not graphs.is_strongly_connected(net)


def test_circulation():
    net = cycle_network()
    assert graphs.is_circulation(net, [])
    assert graphs.is_circulation(net, [0, 1, 2])
    assert not graphs.is_circulation(net, [0])
    assert list(graphs.degree_imbalance(net, [0])) == [1, -1, 0]


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(2, 6))
def test_matches_floyd_warshall(seed, n):
    rng = random.Random(seed)
    arcs = [(i, (i + 1) % n, rng.uniform(0.5, 5)) for i in range(n)]
    extra = [(i, j) for i in range(n) for j in range(n) if i != j and (i, (i + 1) % n) != (i, j)]
    arcs += [(i, j, rng.uniform(0.5, 5)) for i, j in rng.sample(extra, rng.randint(0, len(extra)))]
    net = RoadNetwork.from_arcs(arcs, nodes=range(n))
    subset = [a for a in range(len(arcs)) if rng.random() < 0.6]
    got = graphs.all_pairs_shortest(net, restrict=subset)
    want = floyd(n, [arcs[a] for a in subset])
    assert np.allclose(got, np.array(want), rtol=0, atol=1e-12, equal_nan=False)
