import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from w1plus.errors import (DanglingEdge, DisconnectedGraph, DuplicateEdge, DuplicateVertex,
                           InvalidMeasure, SelfLoop, TooManyGeodesics)
from w1plus.graph_core import (Graph, Measure, all_pairs_distances, count_geodesics, geodesics_between,
                               load_graph, load_measure)
from w1plus.oracles import floyd_warshall

from instances import diamond, grid_graph, path_graph, random_connected


def test_load_path_and_diamond():
    p2 = load_graph({"vertices": [0, 1, 2], "edges": [[0, 1], [1, 2]]})
    assert p2.n == 3 and p2.edges == ((0, 1), (1, 2))
    d = load_graph('{"vertices": ["o", "a", "b", "z"], "edges": [["o","a"],["o","b"],["a","z"],["b","z"]]}')
    assert d.adj[d.index("o")] == (d.index("a"), d.index("b"))


@pytest.mark.parametrize("doc, err", [
    ({"vertices": [0, 1], "edges": []}, DisconnectedGraph),
    ({"vertices": [0, 0], "edges": []}, DuplicateVertex),
    ({"vertices": [0, 1], "edges": [[0, 2]]}, DanglingEdge),
    ({"vertices": [0, 1], "edges": [[0, 1], [1, 0]]}, DuplicateEdge),
    ({"vertices": [0, 1], "edges": [[0, 0], [0, 1]]}, SelfLoop),
])
def test_load_errors_have_distinct_codes(doc, err):
    with pytest.raises(err) as info:
        load_graph(doc)
    assert info.value.to_dict()["error"] == err.code


def test_error_codes_are_distinct():
    codes = [DisconnectedGraph.code, DuplicateVertex.code, DanglingEdge.code, DuplicateEdge.code, SelfLoop.code]
    assert len(set(codes)) == len(codes)


def test_distances_examples():
    g = path_graph(2)
    d = all_pairs_distances(g, [0])
    assert d(0, 1) == 1 and d(0, 2) == 2 and d(0, 0) == 0
    dm = diamond()
    o, z = dm.index("o"), dm.index("z")
    assert all_pairs_distances(dm, [o])(o, z) == 2


def test_geodesics_examples():
    dm = diamond()
    o, a, b, z = (dm.index(v) for v in "oabz")
    d = all_pairs_distances(dm)
    assert sorted(geodesics_between(dm, d, o, z)) == [(o, a, z), (o, b, z)]
    p2 = path_graph(2)
    assert geodesics_between(p2, all_pairs_distances(p2), 0, 2) == [(0, 1, 2)]
    assert geodesics_between(dm, d, a, a) == [(a,)]


def test_geodesic_listing_limit():
    g = grid_graph(6, 6)
    d = all_pairs_distances(g)
    with pytest.raises(TooManyGeodesics) as info:
        geodesics_between(g, d, 0, 35, limit=100)
    assert info.value.count == 252  # C(10, 5)
    assert len(geodesics_between(g, d, 0, 35, limit=100, force=True)) == 252


def test_measure_validation():
    g = path_graph(2)
    with pytest.raises(InvalidMeasure):
        load_measure(g, {"0": 0.5})
    with pytest.raises(InvalidMeasure):
        load_measure(g, {"7": 1.0})
    with pytest.raises(InvalidMeasure):
        load_measure(g, {"0": -0.5, "1": 1.5})
    m = load_measure(g, {"0": 0.25, "2": 0.75})
    assert m.support == [0, 2] and m[1] == 0.0


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 50), extra=st.integers(0, 30), seed=st.integers(0, 2**32 - 1))
def test_distances_match_floyd_warshall(n, extra, seed):
    g = random_connected(n, extra, np.random.default_rng(seed))
    d = all_pairs_distances(g)
    D = np.array([d.row(x) for x in range(g.n)])
    assert np.array_equal(D, floyd_warshall(g))
    assert np.array_equal(D, D.T)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 30), extra=st.integers(0, 15), seed=st.integers(0, 2**32 - 1))
def test_geodesic_counts_match_networkx(n, extra, seed):
    rng = np.random.default_rng(seed)
    g = random_connected(n, extra, rng)
    G = nx.Graph(list(g.edges))
    d = all_pairs_distances(g)
    x, y = (int(v) for v in rng.integers(0, n, size=2))
    paths = geodesics_between(g, d, x, y, force=True)
    assert len(paths) == count_geodesics(g, d, x, y) == len(list(nx.all_shortest_paths(G, x, y)))
    for p in paths:
        assert [d(x, v) for v in p] == list(range(len(p)))
