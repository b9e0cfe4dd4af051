import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from w1plus.errors import NotSpanning, OrientationConflict
from w1plus.geodesic import build_geodesic
from w1plus.graph_core import Measure, all_pairs_distances
from w1plus.orientation import PartialOrder, divergence, orient, spanning_forest, tree_flux
from w1plus.polynomial import Polynomial
from w1plus.transport import support_union

from instances import diamond, path_graph, random_connected, random_measure


def test_path_orientation():
    g = path_graph(2)
    og = orient(g, [(0, 2)])
    assert og.edges == ((0, 1), (1, 2)) and og.sources == (0,) and og.sinks == (2,)
    og2 = orient(g, [(0, 1), (0, 2), (1, 1), (1, 2)])
    assert og2.edges == og.edges


def test_diamond_orientation_and_order():
    g = diamond()
    o, a, b, z = (g.index(v) for v in "oabz")
    og = orient(g, [(o, z)])
    assert set(og.edges) == {(o, a), (o, b), (a, z), (b, z)}
    assert og.sources == (o,) and og.sinks == (z,)
    order = PartialOrder(og)
    assert order.leq(o, a) and order.leq(a, z) and order.leq(o, z)
    assert not order.comparable(a, b)
    assert order.leq(a, a)


def test_singleton_active_set():
    g = path_graph(2)
    og = orient(g, [(1, 1)])
    assert og.active == (1,) and og.edges == ()
    order = PartialOrder(og)
    assert order.pairs() == [(1, 1)]


def test_conflicting_pairs_raise():
    g = path_graph(2)
    with pytest.raises(OrientationConflict):
        orient(g, [(0, 2), (2, 0)])


def test_tree_flux_examples():
    g = path_graph(2)
    og = orient(g, [(0, 2)])
    flux = tree_flux(og, [(0, 1), (1, 2)], {0: -1, 1: 0, 2: 1})
    assert flux == {(0, 1): 1, (1, 2): 1}
    assert tree_flux(og, None, {0: 0, 1: 0, 2: 0}) == {(0, 1): 0, (1, 2): 0}

    d = diamond()
    o, a, b, z = (d.index(v) for v in "oabz")
    og = orient(d, [(o, z)])
    flux = tree_flux(og, [(o, a), (a, z), (o, b)], {o: -1, a: 0, b: 0, z: 1})
    assert flux == {(o, a): 1, (a, z): 1, (o, b): 0}


def test_tree_flux_needs_spanning_tree():
    d = diamond()
    o, a, b, z = (d.index(v) for v in "oabz")
    og = orient(d, [(o, z)])
    with pytest.raises(NotSpanning):
        tree_flux(og, [(o, a), (a, z)], {o: -1, a: 0, b: 0, z: 1})
    with pytest.raises(NotSpanning):
        tree_flux(og, [(o, a), (a, z), (o, b), (b, z)], {o: -1, a: 0, b: 0, z: 1})


def test_single_tree_flux_can_be_negative_on_the_diamond():
    # the pipeline flux g is positive, but a single spanning tree need not be
    d = diamond()
    o, a, b, z = (d.index(v) for v in "oabz")
    curve = build_geodesic(d, Measure.dirac(d, o), Measure.dirac(d, z))
    dfdt = {x: curve.f[x].derivative() for x in curve.og.active}
    flux = tree_flux(curve.og, [(o, a), (o, b), (a, z)], dfdt)
    assert flux[(o, b)] == Polynomial([1, -2])  # 1 - 2t
    assert flux[(o, b)](0.75) < 0
    assert all(p(0.75) > 0 for p in curve.g.values())


def _curve(n, extra, seed):
    rng = np.random.default_rng(seed)
    g = random_connected(n, extra, rng)
    return build_geodesic(g, random_measure(g, 4, rng), random_measure(g, 4, rng))


@settings(max_examples=30, deadline=None)
@given(n=st.integers(4, 30), extra=st.integers(0, 10), seed=st.integers(0, 2**32 - 1))
def test_orientation_invariants(n, extra, seed):
    rng = np.random.default_rng(seed)
    g = random_connected(n, extra, rng)
    f0, f1 = random_measure(g, 4, rng), random_measure(g, 4, rng)
    C = support_union(g, f0, f1)
    og = orient(g, C.pairs)
    es = og.edge_set
    assert not any((b, a) in es for a, b in es)
    order = PartialOrder(og)
    d = all_pairs_distances(g, og.active)
    # every comparable pair: oriented path lengths equal the graph distance
    longest = {}
    for x in og.active:
        dist = {x: 0}
        for y in og.topo:
            if y in dist:
                for w in og.succ[y]:
                    dist[w] = max(dist.get(w, -1), dist[y] + 1)
        for y, L in dist.items():
            assert order.leq(x, y) and d(x, y) == L
    for x, y in C.pairs:
        assert order.leq(x, y)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(4, 25), extra=st.integers(0, 8), seed=st.integers(0, 2**32 - 1))
def test_tree_flux_divergence_identity(n, extra, seed):
    curve = _curve(n, extra, seed)
    og = curve.og
    dfdt = {x: curve.f[x].derivative() for x in og.active}
    flux = tree_flux(og, spanning_forest(og), dfdt)
    div = divergence(og, flux)
    for x in og.active:
        assert not (div[x] + dfdt[x])


@settings(max_examples=20, deadline=None)
@given(n=st.integers(4, 25), extra=st.integers(0, 8), seed=st.integers(0, 2**32 - 1))
def test_orientation_is_stable_along_the_curve(n, extra, seed):
    curve = _curve(n, extra, seed)
    rng = np.random.default_rng(seed)
    s, t = sorted(rng.uniform(0, 1, size=2))
    C = support_union(curve.graph, curve.measure(s), curve.measure(t))
    assert orient(curve.graph, C.pairs).edge_set <= curve.og.edge_set
    order = curve.weights.order
    assert all(order.leq(x, y) for x, y in C.pairs)
