"""Entropy minimisation over the optimal face and the product-form coupling.

The face is parameterised by the pair set D = {(x, y) : x in supp f0,
y in supp f1, x <= y}. On D the cost kernel is c(x, y) = m(x, y)/d(x, y)!
and the minimiser of J(pi) = sum pi log(pi/c) - pi among D-supported
couplings has the form c(x, y) a(x) b(y). It is found by alternating
marginal fitting in the log domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from gmpy2 import mpq

from .errors import EmptyFace, NoConvergence, SupportViolation
from .graph_core import Measure
from .orientation import PartialOrder
from .transport import Coupling
from .weights import WeightSystem

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 100_000


def exact_log(v: mpq) -> float:
    """Natural log of a positive rational, safe for huge numerators."""
    return math.log(v.numerator) - math.log(v.denominator)


@dataclass
class CostKernel:
    pairs: list[tuple[int, int]]
    dist: list[int]
    c: list[mpq]
    log_c: np.ndarray
    rows: list[int]
    cols: list[int]
    index: dict[tuple[int, int], int] = field(repr=False)

    def __len__(self):
        return len(self.pairs)

    def value(self, x: int, y: int) -> mpq:
        return self.c[self.index[(x, y)]]


def cost_kernel(w: WeightSystem, order: PartialOrder | None, f0: Measure, f1: Measure) -> CostKernel:
    """Pairs x <= y between the supports with c = m(x, y)/d(x, y)!."""
    order = order or w.order
    d = w.og.dist
    pairs, dist, c, log_c = [], [], [], []
    for x in f0.support:
        for y in f1.support:
            if order.leq(x, y):
                k = d(x, y)
                cxy = w.pair(x, y) / math.factorial(k)
                pairs.append((x, y))
                dist.append(k)
                c.append(cxy)
                log_c.append(exact_log(cxy))
    if not pairs:
        raise EmptyFace("no comparable pair between the supports")
    rows_hit = {x for x, _ in pairs}
    cols_hit = {y for _, y in pairs}
    name = w.og.graph.name
    for x in f0.support:
        if x not in rows_hit:
            raise EmptyFace(f"support point {name(x)!r} of f0 is below no support point of f1")
    for y in f1.support:
        if y not in cols_hit:
            raise EmptyFace(f"support point {name(y)!r} of f1 is above no support point of f0")
    return CostKernel(pairs, dist, c, np.array(log_c), f0.support, f1.support,
                      {p: k for k, p in enumerate(pairs)})


@dataclass
class ScalingResult:
    kernel: CostKernel
    a: dict[int, float]
    b: dict[int, float]
    coupling: Coupling
    iterations: int
    marginal_error: float
    method: str
    J: float
    J_history: list[float] = field(default_factory=list, repr=False)
    dual_history: list[float] = field(default_factory=list, repr=False)

    def product_mass(self, x: int, y: int) -> mpq:
        """c(x, y) a(x) b(y), computed exactly from the stored doubles a and b."""
        return self.kernel.value(x, y) * mpq(self.a[x]) * mpq(self.b[y])

    def to_document(self) -> dict:
        g = self.coupling.graph
        return {
            "a": {str(g.name(x)): v for x, v in self.a.items()},
            "b": {str(g.name(y)): v for y, v in self.b.items()},
            "pi": self.coupling.to_document(),
            "J": self.J,
            "iterations": self.iterations,
            "marginal_error": self.marginal_error,
            "method": self.method,
        }


def _group_logsumexp(values: np.ndarray, groups: np.ndarray, n: int) -> np.ndarray:
    top = np.full(n, -np.inf)
    np.maximum.at(top, groups, values)
    acc = np.zeros(n)
    np.add.at(acc, groups, np.exp(values - top[groups]))
    return top + np.log(acc)


def _group_sum(values: np.ndarray, groups: np.ndarray, n: int) -> np.ndarray:
    acc = np.zeros(n)
    np.add.at(acc, groups, values)
    return acc


def _is_forest(ck: CostKernel) -> bool:
    parent = {}

    def find(u):
        while parent.setdefault(u, u) != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    for x, y in ck.pairs:
        ru, rv = find(("r", x)), find(("c", y))
        if ru == rv:
            return False
        parent[ru] = rv
    return True


def _solve_unique(ck: CostKernel, f0: Measure, f1: Measure):
    """The only D-supported coupling when D is a forest, and scalings a, b reproducing it."""
    nbrs: dict[tuple, list[tuple]] = {}
    for x, y in ck.pairs:
        nbrs.setdefault(("r", x), []).append(("c", y))
        nbrs.setdefault(("c", y), []).append(("r", x))
    left = {("r", x): f0[x] for x in ck.rows}
    left.update({("c", y): f1[y] for y in ck.cols})
    degree = {u: len(v) for u, v in nbrs.items()}
    mass: dict[tuple[int, int], float] = {}
    stack = [u for u, k in degree.items() if k == 1]
    done: set = set()
    while stack:
        u = stack.pop()
        if u in done or degree[u] != 1:
            continue
        (v,) = [w for w in nbrs[u] if w not in done]
        q = max(left[u], 0.0)
        key = (u[1], v[1]) if u[0] == "r" else (v[1], u[1])
        mass[key] = q
        left[v] -= q
        left[u] = 0.0
        done.add(u)
        degree[v] -= 1
        if degree[v] == 1:
            stack.append(v)
        elif degree[v] == 0:
            done.add(v)

    if min(mass.values()) <= 0:
        raise EmptyFace("the unique coupling on the face leaves a pair empty")
    # a = 1 at one row per tree, then propagate pi = c a b along the tree
    a: dict[int, float] = {}
    b: dict[int, float] = {}
    for start in ck.rows:
        if start in a:
            continue
        a[start] = 1.0
        queue = [("r", start)]
        while queue:
            u = queue.pop()
            for v in nbrs[u]:
                if u[0] == "r" and v[1] not in b:
                    x, y = u[1], v[1]
                    b[y] = mass[(x, y)] / float(ck.value(x, y)) / a[x]
                    queue.append(v)
                elif u[0] == "c" and v[1] not in a:
                    x, y = v[1], u[1]
                    a[x] = mass[(x, y)] / float(ck.value(x, y)) / b[y]
                    queue.append(v)
    return a, b


def minimize_J(ck: CostKernel, f0: Measure, f1: Measure, tol: float = DEFAULT_TOL,
               max_iter: int = DEFAULT_MAX_ITER, *, record: bool = False) -> ScalingResult:
    """Product-form minimiser of J over D-supported couplings."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    g = f0.graph
    rows, cols = ck.rows, ck.cols
    ri = {x: k for k, x in enumerate(rows)}
    ci = {y: k for k, y in enumerate(cols)}
    r = np.array([ri[x] for x, _ in ck.pairs])
    c = np.array([ci[y] for _, y in ck.pairs])
    log_f0 = np.log([f0[x] for x in rows])
    log_f1 = np.log([f1[y] for y in cols])
    f0v = np.array([f0[x] for x in rows])
    f1v = np.array([f1[y] for y in cols])
    history: list[float] = []
    dual: list[float] = []

    def dual_value(la, lb):
        # Lagrange dual of J; each half step maximises it over one block
        return (math.fsum(f0v * la) + math.fsum(f1v * lb)
                - math.fsum(np.exp(ck.log_c + la[r] + lb[c])))

    if _is_forest(ck):
        a_d, b_d = _solve_unique(ck, f0, f1)
        la = np.log([a_d[x] for x in rows])
        lb = np.log([b_d[y] for y in cols])
        iterations, method = 0, "unique"
    else:
        la = np.zeros(len(rows))
        lb = np.zeros(len(cols))
        method = "ipfp"
        iterations = 0
        while True:
            la = log_f0 - _group_logsumexp(ck.log_c + lb[c], r, len(rows))
            if record:
                dual.append(dual_value(la, lb))
            lb = log_f1 - _group_logsumexp(ck.log_c + la[r], c, len(cols))
            iterations += 1
            pi = np.exp(ck.log_c + la[r] + lb[c])
            err = np.max(np.abs(_group_sum(pi, r, len(rows)) - f0v))
            if record:
                dual.append(dual_value(la, lb))
                history.append(_J(pi, ck.log_c))
            if err <= tol:
                break
            if iterations >= max_iter:
                raise NoConvergence(f"marginal fitting stopped at error {err:.3g} after {iterations} iterations",
                                    residual=float(err), iterations=iterations)

    if method == "unique":
        a_v = np.array([a_d[x] for x in rows])
        b_v = np.array([b_d[y] for y in cols])
    else:
        a_v, b_v = np.exp(la), np.exp(lb)
    c_v = np.array([float(v) for v in ck.c])
    pi = c_v * a_v[r] * b_v[c]
    err = max(np.max(np.abs(_group_sum(pi, r, len(rows)) - f0v)),
              np.max(np.abs(_group_sum(pi, c, len(cols)) - f1v)))
    coupling = Coupling(g, {p: float(v) for p, v in zip(ck.pairs, pi)})
    return ScalingResult(ck, {x: float(v) for x, v in zip(rows, a_v)},
                         {y: float(v) for y, v in zip(cols, b_v)}, coupling, iterations,
                         float(err), method, _J(pi, ck.log_c), history, dual)


def _J(pi: np.ndarray, log_c: np.ndarray) -> float:
    pos = pi > 0
    return math.fsum(pi[pos] * (np.log(pi[pos]) - log_c[pos]) - pi[pos])


def J_value(pi: Coupling, ck: CostKernel) -> float:
    """sum pi log(pi/c) - pi over the support of ``pi`` (0 log 0 = 0)."""
    terms = []
    for (x, y), m in pi.mass.items():
        k = ck.index.get((x, y))
        if k is None:
            g = pi.graph
            raise SupportViolation(f"coupling puts mass on ({g.name(x)!r}, {g.name(y)!r}) outside the face",
                                   pair=[g.name(x), g.name(y)])
        if m > 0:
            terms.append(m * (math.log(m) - ck.log_c[k]) - m)
    return math.fsum(terms)
