"""W1-orientation of a graph, the induced partial order and tree fluxes.

An edge a-b is oriented a -> b when it lies on a geodesic from x to y, in
that direction, for some pair (x, y) of the support union. The resulting
oriented graph is a DAG whose oriented paths are all geodesics.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import NotComparable, NotSpanning, OrientationConflict
from .graph_core import DistanceTable, Graph, all_pairs_distances


@dataclass
class OrientedGraph:
    """Oriented edges restricted to the active vertices.

    ``succ[x]`` / ``pred[x]`` hold the sorted out- and in-neighbours (the
    sets F(x) and E(x)); ``topo`` is a topological order of ``active``.
    """

    graph: Graph
    pairs: frozenset
    edges: tuple[tuple[int, int], ...]
    active: tuple[int, ...]
    succ: dict[int, tuple[int, ...]]
    pred: dict[int, tuple[int, ...]]
    sources: tuple[int, ...]
    sinks: tuple[int, ...]
    topo: tuple[int, ...]
    dist: DistanceTable = field(repr=False)

    @property
    def edge_set(self) -> frozenset:
        return frozenset(self.edges)

    def triples(self) -> list[tuple[int, int, int]]:
        """Oriented triples x0 -> x1 -> x2, sorted."""
        return [(a, b, c) for a, b in self.edges for c in self.succ[b]]

    def longest_path(self) -> int:
        depth = {x: 0 for x in self.active}
        for x in self.topo:
            for y in self.succ[x]:
                depth[y] = max(depth[y], depth[x] + 1)
        return max(depth.values(), default=0)

    def distance_to_sinks(self) -> dict[int, int]:
        """Length of the longest oriented path from each vertex to a sink."""
        out = {}
        for x in reversed(self.topo):
            out[x] = max((out[y] + 1 for y in self.succ[x]), default=0)
        return out

    def distance_from_sources(self) -> dict[int, int]:
        """Length of the longest oriented path from a source to each vertex."""
        out = {}
        for x in self.topo:
            out[x] = max((out[w] + 1 for w in self.pred[x]), default=0)
        return out

    def diameter(self) -> int:
        """Largest hop distance between two comparable active vertices."""
        return self.longest_path()

    def to_document(self) -> dict:
        name = self.graph.name
        return {
            "edges": [[name(a), name(b)] for a, b in self.edges],
            "sources": [name(x) for x in self.sources],
            "sinks": [name(x) for x in self.sinks],
            "active": [name(x) for x in self.active],
        }


def orient(g: Graph, C: Iterable[tuple[int, int]], d: DistanceTable | None = None) -> OrientedGraph:
    """Orient every edge lying on a geodesic of some pair in ``C``."""
    pairs = frozenset((int(x), int(y)) for x, y in C)
    if not pairs:
        raise ValueError("support union is empty")
    if d is None:
        d = all_pairs_distances(g, sorted({p for pair in pairs for p in pair}))

    ends = np.array(g.edges, dtype=np.int64).reshape(-1, 2)
    ei, ej = ends[:, 0], ends[:, 1]
    forward = np.zeros(len(ends), dtype=bool)
    backward = np.zeros(len(ends), dtype=bool)
    on_geodesic = np.zeros(g.n, dtype=bool)
    for x, y in pairs:
        dx, dy = d.row(x), d.row(y)
        length = dx[y]
        on_geodesic |= dx + dy == length
        forward |= dx[ei] + 1 + dy[ej] == length
        backward |= dx[ej] + 1 + dy[ei] == length

    both = np.flatnonzero(forward & backward)
    if both.size:
        a, b = ends[both[0]]
        raise OrientationConflict(
            f"edge {g.name(a)!r}-{g.name(b)!r} is oriented both ways", edge=[g.name(a), g.name(b)])
    edges = sorted([(int(a), int(b)) for a, b in ends[forward]] +
                   [(int(b), int(a)) for a, b in ends[backward]])
    active = tuple(int(i) for i in np.flatnonzero(on_geodesic))

    succ: dict[int, list[int]] = {x: [] for x in active}
    pred: dict[int, list[int]] = {x: [] for x in active}
    for a, b in edges:
        succ[a].append(b)
        pred[b].append(a)
    succ_t = {x: tuple(sorted(v)) for x, v in succ.items()}
    pred_t = {x: tuple(sorted(v)) for x, v in pred.items()}

    topo = _topological_order(active, succ_t, pred_t)
    if topo is None:
        raise OrientationConflict("orientation contains an oriented cycle")
    sources = tuple(x for x in active if not pred_t[x])
    sinks = tuple(x for x in active if not succ_t[x])
    if not sources or not sinks:
        raise OrientationConflict("orientation has no source or no sink")
    og = OrientedGraph(g, pairs, tuple(edges), active, succ_t, pred_t, sources, sinks, topo,
                       all_pairs_distances(g, active))
    _check_paths_are_geodesics(og)
    return og


def _topological_order(active, succ, pred):
    indeg = {x: len(pred[x]) for x in active}
    queue = deque(x for x in active if indeg[x] == 0)
    order = []
    while queue:
        x = queue.popleft()
        order.append(x)
        for y in succ[x]:
            indeg[y] -= 1
            if indeg[y] == 0:
                queue.append(y)
    return tuple(order) if len(order) == len(active) else None


def _check_paths_are_geodesics(og: OrientedGraph) -> None:
    # shortest and longest oriented path from each start must both equal d
    for s in og.active:
        ds = og.dist.row(s)
        lo = {s: 0}
        hi = {s: 0}
        for x in og.topo:
            if x not in lo:
                continue
            for y in og.succ[x]:
                lo[y] = min(lo.get(y, lo[x] + 1), lo[x] + 1)
                hi[y] = max(hi.get(y, 0), hi[x] + 1)
        for y in lo:
            if lo[y] != ds[y] or hi[y] != ds[y]:
                raise OrientationConflict(
                    f"oriented path {og.graph.name(s)!r} -> {og.graph.name(y)!r} is not a geodesic")


class PartialOrder:
    """Reachability along oriented edges; ``x <= y`` iff an oriented path joins them."""

    def __init__(self, og: OrientedGraph):
        self.og = og
        self._bit = {x: k for k, x in enumerate(og.active)}
        reach: dict[int, int] = {}
        for x in reversed(og.topo):
            r = 1 << self._bit[x]
            for y in og.succ[x]:
                r |= reach[y]
            reach[x] = r
        self._reach = reach

    def leq(self, x: int, y: int) -> bool:
        if x not in self._reach or y not in self._bit:
            return x == y
        return bool(self._reach[x] >> self._bit[y] & 1)

    def comparable(self, x: int, y: int) -> bool:
        return self.leq(x, y) or self.leq(y, x)

    def above(self, x: int) -> list[int]:
        """All active y with x <= y, in topological order."""
        return [y for y in self.og.topo if self.leq(x, y)]

    def below(self, y: int) -> list[int]:
        return [x for x in self.og.topo if self.leq(x, y)]

    def require(self, x: int, y: int) -> None:
        if not self.leq(x, y):
            g = self.og.graph
            raise NotComparable(f"{g.name(x)!r} is not below {g.name(y)!r}",
                                pair=[g.name(x), g.name(y)])

    def pairs(self) -> list[tuple[int, int]]:
        return [(x, y) for x in self.og.topo for y in self.above(x)]


def order(og: OrientedGraph) -> PartialOrder:
    return PartialOrder(og)


# --- divergence and tree fluxes ---------------------------------------------

def divergence(og: OrientedGraph, g: Mapping[tuple[int, int], object]) -> dict:
    """Out-sum minus in-sum of an edge function, at every active vertex."""
    out = {}
    for x in og.active:
        acc = 0
        for y in og.succ[x]:
            acc = g.get((x, y), 0) + acc
        for w in og.pred[x]:
            acc = acc - g.get((w, x), 0)
        out[x] = acc
    return out


def divergence_triples(og: OrientedGraph, h: Mapping[tuple[int, int, int], object]) -> dict:
    """Out-sum minus in-sum of a triple function, at every oriented edge."""
    out = {}
    for x1, x2 in og.edges:
        acc = 0
        for x3 in og.succ[x2]:
            acc = h.get((x1, x2, x3), 0) + acc
        for x0 in og.pred[x1]:
            acc = acc - h.get((x0, x1, x2), 0)
        out[(x1, x2)] = acc
    return out


def spanning_forest(og: OrientedGraph) -> list[tuple[int, int]]:
    """BFS forest of the active subgraph (orientation ignored).

    One tree per connected component, each grown from its source whose
    identifier sorts first as a string. Edges are returned oriented.
    """
    nbrs = {x: sorted(set(og.succ[x]) | set(og.pred[x])) for x in og.active}
    seen: set[int] = set()
    tree = []
    roots = sorted(og.sources, key=lambda x: (str(og.graph.name(x)), x))
    for root in roots + list(og.active):
        if root in seen:
            continue
        seen.add(root)
        queue = deque([root])
        while queue:
            x = queue.popleft()
            for y in nbrs[x]:
                if y not in seen:
                    seen.add(y)
                    queue.append(y)
                    tree.append((x, y) if y in og.succ[x] else (y, x))
    return tree


def tree_flux(og: OrientedGraph, tree: Iterable[tuple[int, int]] | None, dfdt: Mapping[int, object],
              *, tol: float = 1e-9) -> dict[tuple[int, int], object]:
    """Flux on tree edges whose divergence is ``-dfdt``.

    For a tree edge x0 -> y0 the flux is minus the sum of ``dfdt`` over the
    part of the tree containing x0 once the edge is removed. Values may be
    floats, exact rationals or polynomials.
    """
    tree = spanning_forest(og) if tree is None else [tuple(e) for e in tree]
    edge_set = og.edge_set
    nbrs: dict[int, list[int]] = {x: [] for x in og.active}
    for a, b in tree:
        if (a, b) not in edge_set:
            if (b, a) in edge_set:
                a, b = b, a
            else:
                raise NotSpanning(f"{og.graph.name(a)!r}-{og.graph.name(b)!r} is not an oriented edge")
        nbrs[a].append(b)
        nbrs[b].append(a)

    parent: dict[int, int | None] = {}
    order_: list[int] = []
    comp_root: dict[int, int] = {}
    for root in og.active:
        if root in parent:
            continue
        parent[root] = None
        comp_root[root] = root
        queue = deque([root])
        while queue:
            x = queue.popleft()
            order_.append(x)
            for y in nbrs[x]:
                if y in parent:
                    if parent[x] != y:
                        raise NotSpanning("tree edges contain a cycle")
                    continue
                parent[y] = x
                comp_root[y] = root
                queue.append(y)
    # the active subgraph's components must each be spanned by one tree
    og_components = _components(og)
    if len(set(comp_root.values())) != og_components:
        raise NotSpanning("tree does not span every active vertex")

    subtree: dict[int, object] = {x: dfdt.get(x, 0) for x in og.active}
    for x in reversed(order_):
        p = parent[x]
        if p is not None:
            subtree[p] = subtree[p] + subtree[x]
    for root in set(comp_root.values()):
        total = subtree[root]
        if isinstance(total, (int, float)) and abs(total) > tol:
            raise ValueError(f"dfdt sums to {total} on a component, not 0")

    flux = {}
    for x in order_:
        p = parent[x]
        if p is None:
            continue
        total = subtree[comp_root[x]]
        if (p, x) in edge_set:
            flux[(p, x)] = subtree[x] - total
        else:
            flux[(x, p)] = -subtree[x]
    return flux


def _components(og: OrientedGraph) -> int:
    seen: set[int] = set()
    count = 0
    for root in og.active:
        if root in seen:
            continue
        count += 1
        seen.add(root)
        stack = [root]
        while stack:
            x = stack.pop()
            for y in og.succ[x] + og.pred[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
    return count
