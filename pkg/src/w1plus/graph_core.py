"""Finite graphs, hop distances, measures and geodesic enumeration.

Vertices keep whatever identifiers the input document used (ints or strings);
everything downstream works on dense integer indices ``0..n-1`` in declaration
order, and translates back only for I/O.
"""

from __future__ import annotations

import json
import math
from collections import deque
from pathlib import Path
from typing import Hashable, Iterable, Iterator, Mapping

import numpy as np

from .errors import (
    DanglingEdge,
    DisconnectedGraph,
    DocumentError,
    DuplicateEdge,
    DuplicateVertex,
    InvalidMeasure,
    SelfLoop,
    TooManyGeodesics,
)

MASS_TOL = 1e-12
GEODESIC_LIST_LIMIT = 10_000


class Graph:
    """Undirected, connected, simple graph.

    Immutable after construction. ``adj[i]`` is the sorted tuple of neighbour
    indices of vertex ``i``.
    """

    def __init__(self, vertices: Iterable[Hashable], edges: Iterable[tuple]):
        vertices = list(vertices)
        index: dict = {}
        by_name: dict[str, int] = {}
        for i, v in enumerate(vertices):
            if isinstance(v, (list, dict)) or v is None or isinstance(v, bool):
                raise DocumentError(f"vertex identifier {v!r} is not a string or integer")
            if v in index or str(v) in by_name:
                raise DuplicateVertex(f"duplicate vertex {v!r}", vertex=v)
            index[v] = i
            by_name[str(v)] = i
        self.vertices: tuple = tuple(vertices)
        self._index = index
        self._by_name = by_name

        nbrs: list[set[int]] = [set() for _ in vertices]
        edge_list: list[tuple[int, int]] = []
        for e in edges:
            if len(e) != 2:
                raise DocumentError(f"edge {e!r} does not have two endpoints")
            a, b = e
            for v in (a, b):
                if self.lookup(v) is None:
                    raise DanglingEdge(f"edge {list(e)!r} uses undeclared vertex {v!r}", vertex=v)
            i, j = self.lookup(a), self.lookup(b)
            if i == j:
                raise SelfLoop(f"self-loop at {a!r}", vertex=a)
            if j in nbrs[i]:
                raise DuplicateEdge(f"duplicate edge {list(e)!r}", edge=[a, b])
            nbrs[i].add(j)
            nbrs[j].add(i)
            edge_list.append((min(i, j), max(i, j)))
        self.adj: tuple[tuple[int, ...], ...] = tuple(tuple(sorted(s)) for s in nbrs)
        self.edges: tuple[tuple[int, int], ...] = tuple(sorted(edge_list))
        self._bfs_cache: dict[int, np.ndarray] = {}

        if not vertices:
            raise DocumentError("graph has no vertices")
        if np.any(self.bfs(0) < 0):
            raise DisconnectedGraph("graph is not connected")

    @property
    def n(self) -> int:
        return len(self.vertices)

    def lookup(self, v) -> int | None:
        """Index of vertex ``v``; JSON object keys (strings) are accepted too."""
        i = self._index.get(v) if isinstance(v, Hashable) else None
        if i is None:
            i = self._by_name.get(str(v))
        return i

    def index(self, v) -> int:
        i = self.lookup(v)
        if i is None:
            raise KeyError(f"unknown vertex {v!r}")
        return i

    def name(self, i: int):
        return self.vertices[i]

    def adjacent(self, i: int, j: int) -> bool:
        return j in self.adj[i]

    def bfs(self, source: int) -> np.ndarray:
        """Hop distances from ``source``; -1 marks unreachable vertices."""
        row = self._bfs_cache.get(source)
        if row is None:
            row = np.full(self.n, -1, dtype=np.int64)
            row[source] = 0
            queue = deque([source])
            while queue:
                u = queue.popleft()
                du = row[u] + 1
                for w in self.adj[u]:
                    if row[w] < 0:
                        row[w] = du
                        queue.append(w)
            row.setflags(write=False)
            self._bfs_cache[source] = row
        return row

    def to_document(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "edges": [[self.vertices[i], self.vertices[j]] for i, j in self.edges],
        }

    def __repr__(self):
        return f"Graph(n={self.n}, edges={len(self.edges)})"


class DistanceTable:
    """Hop distances, one breadth-first row per source.

    Rows are computed on demand; symmetry lets ``d(x, y)`` reuse the row of
    ``y`` when ``x`` has not been expanded.
    """

    def __init__(self, graph: Graph, sources: Iterable[int] = ()):
        self.graph = graph
        self.rows: dict[int, np.ndarray] = {}
        for s in sources:
            self.row(s)

    def row(self, x: int) -> np.ndarray:
        r = self.rows.get(x)
        if r is None:
            r = self.rows[x] = self.graph.bfs(x)
        return r

    def __call__(self, x: int, y: int) -> int:
        if x in self.rows:
            return int(self.rows[x][y])
        if y in self.rows:
            return int(self.rows[y][x])
        return int(self.row(x)[y])

    def diameter(self) -> int:
        return max(int(self.row(x).max()) for x in range(self.graph.n))


def all_pairs_distances(g: Graph, sources: Iterable[int] | None = None) -> DistanceTable:
    """Breadth-first distances from every vertex of ``sources`` (default: all)."""
    if sources is None:
        sources = range(g.n)
    sources = list(sources)
    for s in sources:
        if not 0 <= s < g.n:
            raise ValueError(f"source index {s} out of range")
    return DistanceTable(g, sources)


class Measure:
    """Finitely supported probability vector on the vertices of a graph."""

    def __init__(self, graph: Graph, masses: Mapping[int, float], *, tol: float = MASS_TOL,
                 normalize: bool = False):
        clean: dict[int, float] = {}
        for i, m in masses.items():
            m = float(m)
            if not math.isfinite(m) or m < 0:
                raise InvalidMeasure(f"mass {m!r} at {graph.name(i)!r} is not a nonnegative number")
            if m > 0:
                clean[int(i)] = m
        total = math.fsum(clean.values())
        if not clean:
            raise InvalidMeasure("measure has empty support")
        if normalize:
            clean = {i: m / total for i, m in clean.items()}
        elif abs(total - 1.0) > tol:
            raise InvalidMeasure(f"masses sum to {total!r}, not 1", total=total)
        self.graph = graph
        self.masses: dict[int, float] = dict(sorted(clean.items()))

    @classmethod
    def from_mapping(cls, graph: Graph, mapping: Mapping, **kw) -> "Measure":
        masses: dict[int, float] = {}
        for v, m in mapping.items():
            i = graph.lookup(v)
            if i is None:
                raise InvalidMeasure(f"measure refers to unknown vertex {v!r}", vertex=v)
            if i in masses:
                raise InvalidMeasure(f"vertex {v!r} listed twice", vertex=v)
            if isinstance(m, bool) or not isinstance(m, (int, float)):
                raise InvalidMeasure(f"mass for {v!r} is not a number", vertex=v)
            masses[i] = m
        return cls(graph, masses, **kw)

    @classmethod
    def dirac(cls, graph: Graph, i: int) -> "Measure":
        return cls(graph, {i: 1.0})

    @property
    def support(self) -> list[int]:
        return list(self.masses)

    def __getitem__(self, i: int) -> float:
        return self.masses.get(i, 0.0)

    def as_array(self) -> np.ndarray:
        out = np.zeros(self.graph.n)
        for i, m in self.masses.items():
            out[i] = m
        return out

    def to_document(self) -> dict:
        return {str(self.graph.name(i)): m for i, m in self.masses.items()}

    def __repr__(self):
        inner = ", ".join(f"{self.graph.name(i)!r}: {m:.6g}" for i, m in self.masses.items())
        return f"Measure({{{inner}}})"


def load_graph(document) -> Graph:
    """Build a validated :class:`Graph` from a dict, JSON text or a path."""
    doc = _read_document(document)
    if not isinstance(doc, dict) or "vertices" not in doc or "edges" not in doc:
        raise DocumentError('graph document needs "vertices" and "edges" arrays')
    if not isinstance(doc["vertices"], list) or not isinstance(doc["edges"], list):
        raise DocumentError('"vertices" and "edges" must be arrays')
    for e in doc["edges"]:
        if not isinstance(e, (list, tuple)):
            raise DocumentError(f"edge {e!r} is not an array")
    return Graph(doc["vertices"], [tuple(e) for e in doc["edges"]])


def load_measure(graph: Graph, document, **kw) -> Measure:
    doc = _read_document(document)
    if not isinstance(doc, dict):
        raise DocumentError("measure document must be a JSON object")
    return Measure.from_mapping(graph, doc, **kw)


def _read_document(document):
    if isinstance(document, Path):
        try:
            return json.loads(document.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DocumentError(f"{document}: {exc}") from exc
    if isinstance(document, str):
        try:
            return json.loads(document)
        except json.JSONDecodeError as exc:
            raise DocumentError(str(exc)) from exc
    return document


# --- geodesics -------------------------------------------------------------

def _geodesic_dag(g: Graph, d: DistanceTable, x: int, y: int):
    dx, dy = d.row(x), d.row(y)
    total = int(dx[y])

    def step(z: int) -> list[int]:
        return [w for w in g.adj[z] if dx[w] == dx[z] + 1 and dy[w] == total - dx[w]]

    return total, step


def count_geodesics(g: Graph, d: DistanceTable, x: int, y: int) -> int:
    """Number of shortest paths from ``x`` to ``y`` (exact integer)."""
    total, step = _geodesic_dag(g, d, x, y)
    dx = d.row(x)
    layer = {x: 1}
    for _ in range(total):
        nxt: dict[int, int] = {}
        for z, c in layer.items():
            for w in step(z):
                nxt[w] = nxt.get(w, 0) + c
        layer = nxt
    assert set(layer) == {y} and dx[y] == total
    return layer[y]


def iter_geodesics(g: Graph, d: DistanceTable, x: int, y: int) -> Iterator[tuple[int, ...]]:
    """Lazily yield every geodesic from ``x`` to ``y`` as a vertex tuple."""
    total, step = _geodesic_dag(g, d, x, y)
    path = [x]
    stack = [iter(step(x))]
    if total == 0:
        yield (x,)
        return
    while stack:
        nxt = next(stack[-1], None)
        if nxt is None:
            stack.pop()
            path.pop()
            continue
        path.append(nxt)
        if len(path) == total + 1:
            yield tuple(path)
            path.pop()
        else:
            stack.append(iter(step(nxt)))


def geodesics_between(g: Graph, d: DistanceTable, x: int, y: int, *,
                      limit: int = GEODESIC_LIST_LIMIT, force: bool = False) -> list[tuple[int, ...]]:
    """All geodesics between ``x`` and ``y``.

    Raises :class:`TooManyGeodesics` (carrying the count) when there are more
    than ``limit`` of them, unless ``force`` is set.
    """
    if not force:
        n = count_geodesics(g, d, x, y)
        if n > limit:
            raise TooManyGeodesics(
                f"{n} geodesics between {g.name(x)!r} and {g.name(y)!r} exceed the listing limit",
                count=n,
            )
    return list(iter_geodesics(g, d, x, y))
