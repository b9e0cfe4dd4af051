"""Weight functions on the oriented graph and the kernels K, K*.

Weights are kept exact: the default (path-counting) weights are integers,
custom weights are converted to exact rationals. Pair weights m(x, y) for
non-adjacent comparable vertices are obtained by a forward pass over the
DAG, never by listing geodesics.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from gmpy2 import mpq

from .errors import DivergenceViolation, NotComparable, ValidationError
from .orientation import OrientedGraph, PartialOrder
from .polynomial import exact

DIVERGENCE_TOL = 1e-10
LARGE_WEIGHT = 2**62


@dataclass
class WeightSystem:
    """Vertex and edge weights plus memoised pair weights."""

    og: OrientedGraph
    vertex: dict[int, mpq]
    edge: dict[tuple[int, int], mpq]
    kind: str = "default"
    _pairs: dict[int, dict[int, mpq]] = field(default_factory=dict, repr=False)
    _order: PartialOrder | None = field(default=None, repr=False)

    @property
    def order(self) -> PartialOrder:
        if self._order is None:
            self._order = PartialOrder(self.og)
        return self._order

    def m(self, x: int) -> mpq:
        return self.vertex[x]

    def from_source(self, x: int) -> dict[int, mpq]:
        """m(x, y) for every y >= x."""
        row = self._pairs.get(x)
        if row is None:
            row = {x: self.vertex[x]}
            for y in self.og.topo:
                if y == x or not self.order.leq(x, y):
                    continue
                acc = mpq(0)
                for z in self.og.pred[y]:
                    r = row.get(z)
                    if r is not None:
                        acc += r * self.edge[(z, y)] / self.vertex[z]
                row[y] = acc
            self._pairs[x] = row
        return row

    def pair(self, x: int, y: int) -> mpq:
        if not self.order.leq(x, y):
            g = self.og.graph
            raise NotComparable(f"{g.name(x)!r} is not below {g.name(y)!r}",
                                pair=[g.name(x), g.name(y)])
        if x == y:
            return self.vertex[x]
        if (x, y) in self.edge:
            return self.edge[(x, y)]
        return self.from_source(x)[y]

    def chain(self, xs: Sequence[int]) -> mpq:
        """m(x0, ..., xp) for a chain x0 <= x1 <= ... <= xp."""
        xs = list(xs)
        if not xs:
            raise ValueError("empty tuple")
        if len(xs) == 1:
            return self.vertex[xs[0]]
        out = mpq(1)
        for a, b in zip(xs, xs[1:]):
            out *= self.pair(a, b)
        for z in xs[1:-1]:
            out /= self.vertex[z]
        return out

    def triple(self, a: int, b: int, c: int) -> mpq:
        return self.edge[(a, b)] * self.edge[(b, c)] / self.vertex[b]

    def path(self, gamma: Sequence[int]) -> mpq:
        """Weight of an oriented path: the chain weight of its vertices."""
        for a, b in zip(gamma, gamma[1:]):
            if (a, b) not in self.edge:
                raise NotComparable("path does not follow oriented edges")
        return self.chain(gamma)

    def divergence_residual(self) -> float:
        """Largest |in-sum - out-sum| over vertices that are neither sources nor sinks."""
        worst = mpq(0)
        ends = set(self.og.sources) | set(self.og.sinks)
        for x in self.og.active:
            if x in ends:
                continue
            res = abs(sum((self.edge[(x, y)] for y in self.og.succ[x]), mpq(0))
                      - sum((self.edge[(w, x)] for w in self.og.pred[x]), mpq(0)))
            worst = max(worst, res)
        return float(worst)

    def to_document(self) -> dict:
        name = self.og.graph.name
        return {
            "kind": self.kind,
            "vertices": {str(name(x)): _num(v) for x, v in self.vertex.items()},
            "edges": [[name(a), name(b), _num(v)] for (a, b), v in self.edge.items()],
        }


def _num(v: mpq):
    return int(v) if v.denominator == 1 else float(v)


def path_counts(og: OrientedGraph) -> tuple[dict[int, int], dict[int, int]]:
    """Number of oriented paths from the sources to x, and from x to the sinks."""
    up: dict[int, int] = {}
    for x in og.topo:
        up[x] = 1 if not og.pred[x] else sum(up[w] for w in og.pred[x])
    down: dict[int, int] = {}
    for x in reversed(og.topo):
        down[x] = 1 if not og.succ[x] else sum(down[y] for y in og.succ[x])
    return up, down


def default_weights(og: OrientedGraph) -> WeightSystem:
    """Path-counting weights: m(x) = up(x) down(x), m(x, y) = up(x) down(y)."""
    up, down = path_counts(og)
    vertex = {x: mpq(up[x] * down[x]) for x in og.active}
    edge = {(a, b): mpq(up[a] * down[b]) for a, b in og.edges}
    biggest = max(vertex.values(), default=mpq(0))
    if biggest > LARGE_WEIGHT:
        warnings.warn(f"path-count weights reach {float(biggest):.3g}; arithmetic stays exact but slow",
                      RuntimeWarning, stacklevel=2)
    return WeightSystem(og, vertex, edge, "default")


def validate_custom_weights(og: OrientedGraph, m_edges: Mapping[tuple[int, int], float],
                            tol: float = DIVERGENCE_TOL) -> WeightSystem:
    """Check user edge weights and derive vertex weights from them.

    Every oriented edge needs a positive weight. At vertices that are neither
    sources nor sinks, in- and out-sums must agree within ``tol``. The vertex
    weight is the out-sum, or the in-sum at sinks; a vertex with no oriented
    edge gets weight 1.
    """
    edge: dict[tuple[int, int], mpq] = {}
    name = og.graph.name
    edge_set = og.edge_set
    for (a, b), v in m_edges.items():
        if (a, b) not in edge_set:
            raise ValidationError(f"{name(a)!r} -> {name(b)!r} is not an oriented edge",
                                  edge=[name(a), name(b)])
        v = float(v) if not isinstance(v, mpq) else v
        if not (v > 0) or (isinstance(v, float) and not math.isfinite(v)):
            raise ValidationError(f"weight on {name(a)!r} -> {name(b)!r} must be positive",
                                  edge=[name(a), name(b)])
        edge[(a, b)] = exact(v)
    missing = [e for e in og.edges if e not in edge]
    if missing:
        a, b = missing[0]
        raise ValidationError(f"no weight given for {name(a)!r} -> {name(b)!r}", edge=[name(a), name(b)])

    ends = set(og.sources) | set(og.sinks)
    vertex: dict[int, mpq] = {}
    for x in og.active:
        out_sum = sum((edge[(x, y)] for y in og.succ[x]), mpq(0))
        in_sum = sum((edge[(w, x)] for w in og.pred[x]), mpq(0))
        if x not in ends:
            res = float(abs(out_sum - in_sum))
            if res > tol:
                raise DivergenceViolation(
                    f"weights are not divergence-free at {name(x)!r} (in {float(in_sum)}, out {float(out_sum)})",
                    vertex=name(x), residual=res)
        if og.succ[x]:
            vertex[x] = out_sum
        elif og.pred[x]:
            vertex[x] = in_sum
        else:
            vertex[x] = mpq(1)
    ordered = {e: edge[e] for e in og.edges}
    return WeightSystem(og, vertex, ordered, "custom")


def load_custom_weights(og: OrientedGraph, document: Iterable) -> WeightSystem:
    """Custom weights from a JSON-style list of ``[x, y, weight]`` triples."""
    g = og.graph
    m_edges = {}
    for entry in document:
        if isinstance(entry, Mapping):
            x, y, v = entry["x"], entry["y"], entry["m"]
        else:
            x, y, v = entry
        m_edges[(g.index(x), g.index(y))] = v
    return validate_custom_weights(og, m_edges)


def m_tuple(w: WeightSystem, xs: Sequence[int]) -> mpq:
    return w.chain(xs)


# --- kernels -----------------------------------------------------------------

class Kernel:
    """Sparse exact kernels K(x1, x0) = m(x0, x1)/m(x1) and K*(x0, x1) = m(x0, x1)/m(x0)."""

    def __init__(self, w: WeightSystem):
        self.w = w
        og = w.og
        self.K = {x1: {x0: w.edge[(x0, x1)] / w.vertex[x1] for x0 in og.pred[x1]} for x1 in og.active}
        self.Kstar = {x0: {x1: w.edge[(x0, x1)] / w.vertex[x0] for x1 in og.succ[x0]} for x0 in og.active}

    @staticmethod
    def _apply(mat, f: Mapping[int, object]) -> dict[int, object]:
        out = {}
        for x, row in mat.items():
            acc = 0
            for z, k in row.items():
                v = f.get(z)
                if v is not None:
                    acc = v * k + acc
            out[x] = acc
        return out

    def apply(self, f: Mapping[int, object]) -> dict[int, object]:
        """(Kf)(x1) = sum over x0 in E(x1) of K(x1, x0) f(x0)."""
        return self._apply(self.K, f)

    def apply_adjoint(self, f: Mapping[int, object]) -> dict[int, object]:
        """(K*f)(x0) = sum over x1 in F(x0) of K*(x0, x1) f(x1)."""
        return self._apply(self.Kstar, f)

    @staticmethod
    def _matmul(a, b):
        out = {}
        for x, row in a.items():
            acc: dict[int, mpq] = {}
            for z, k in row.items():
                for y, k2 in b.get(z, {}).items():
                    acc[y] = acc.get(y, mpq(0)) + k * k2
            out[x] = {y: v for y, v in acc.items() if v != 0}
        return out

    def power(self, n: int, adjoint: bool = False) -> dict[int, dict[int, mpq]]:
        base = self.Kstar if adjoint else self.K
        out = {x: {x: mpq(1)} for x in base}
        for _ in range(n):
            out = self._matmul(out, base)
        return out

    def nilpotency_index(self, adjoint: bool = False) -> int:
        """Smallest n with K^n = 0."""
        base = self.Kstar if adjoint else self.K
        cur = {x: {x: mpq(1)} for x in base}
        n = 0
        while any(cur.values()):
            cur = self._matmul(cur, base)
            n += 1
        return n

    def row_sums(self, adjoint: bool = False) -> dict[int, mpq]:
        base = self.Kstar if adjoint else self.K
        return {x: sum(row.values(), mpq(0)) for x, row in base.items()}

    def inner(self, u: Mapping[int, object], v: Mapping[int, object]):
        """<u, v> = sum of u(x) v(x) m(x)."""
        return sum((u.get(x, 0) * v.get(x, 0) * self.w.vertex[x] for x in self.w.og.active), mpq(0))


def kernels(w: WeightSystem) -> Kernel:
    return Kernel(w)
