"""W1 distance, optimal couplings and the support union of the optimal face.

The solver is a transportation simplex on the bipartite graph
supp(f0) x supp(f1). Arc costs are integers (hop distances, or scaled
distances for the face probes), so dual potentials and reduced costs are
exact integers; only the flows are doubles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import InfeasibleCoupling
from .graph_core import Graph, Measure

MARGINAL_TOL = 1e-10
OPTIMALITY_TOL = 1e-9
PROBE_MASS_TOL = 1e-12
BALANCE_TOL = 1e-9


@dataclass
class Coupling:
    """Sparse transport plan ``(x, y) -> mass`` over vertex indices."""

    graph: Graph
    mass: dict[tuple[int, int], float]
    cost: float = field(init=False)

    def __post_init__(self):
        self.mass = {k: float(v) for k, v in sorted(self.mass.items()) if v != 0}
        self.cost = math.fsum(
            m * int(self.graph.bfs(x)[y]) for (x, y), m in self.mass.items()
        )

    def marginals(self) -> tuple[dict[int, float], dict[int, float]]:
        rows: dict[int, list[float]] = {}
        cols: dict[int, list[float]] = {}
        for (x, y), m in self.mass.items():
            rows.setdefault(x, []).append(m)
            cols.setdefault(y, []).append(m)
        return ({k: math.fsum(v) for k, v in rows.items()},
                {k: math.fsum(v) for k, v in cols.items()})

    def marginal_error(self, f0: Measure, f1: Measure) -> float:
        rows, cols = self.marginals()
        err = 0.0
        for i in set(rows) | set(f0.masses):
            err = max(err, abs(rows.get(i, 0.0) - f0[i]))
        for j in set(cols) | set(f1.masses):
            err = max(err, abs(cols.get(j, 0.0) - f1[j]))
        return err

    def support(self, tol: float = 0.0) -> set[tuple[int, int]]:
        return {k for k, m in self.mass.items() if m > tol}

    def to_document(self) -> list[dict]:
        name = self.graph.name
        return [{"x": name(x), "y": name(y), "mass": m} for (x, y), m in self.mass.items()]

    @classmethod
    def from_document(cls, graph: Graph, doc: list[dict]) -> "Coupling":
        mass: dict[tuple[int, int], float] = {}
        for entry in doc:
            key = (graph.index(entry["x"]), graph.index(entry["y"]))
            mass[key] = mass.get(key, 0.0) + float(entry["mass"])
        return cls(graph, mass)


@dataclass
class TransportSolution:
    """Optimal basic solution of one transportation problem."""

    rows: list[int]
    cols: list[int]
    dist: np.ndarray  # integer hop distances, shape (len(rows), len(cols))
    flow: np.ndarray
    basis: list[tuple[int, int]]
    u: np.ndarray
    v: np.ndarray
    value: float

    def coupling(self, graph: Graph) -> Coupling:
        mass = {}
        for a, b in zip(*np.nonzero(self.flow > 0)):
            mass[(self.rows[a], self.cols[b])] = float(self.flow[a, b])
        return Coupling(graph, mass)

    def tight_arcs(self) -> np.ndarray:
        """Mask of arcs with zero reduced cost under the optimal potentials."""
        return self.dist - self.u[:, None] - self.v[None, :] == 0


@dataclass(frozen=True)
class SupportUnion:
    pairs: frozenset
    w1: float

    def __contains__(self, pair):
        return pair in self.pairs

    def __iter__(self):
        return iter(sorted(self.pairs))

    def __len__(self):
        return len(self.pairs)


# --- transportation simplex -------------------------------------------------

def _northwest(supply: np.ndarray, demand: np.ndarray):
    n, m = len(supply), len(demand)
    s, d = supply.copy(), demand.copy()
    flow = np.zeros((n, m))
    basis = []
    i = j = 0
    while True:
        q = min(s[i], d[j])
        flow[i, j] = q
        basis.append((i, j))
        s[i] -= q
        d[j] -= q
        if i == n - 1 and j == m - 1:
            break
        if j == m - 1 or (i < n - 1 and s[i] <= d[j]):
            i += 1
        else:
            j += 1
    return flow, basis


def _tree(n: int, m: int, basis, cost):
    """Potentials, BFS parents and depths of the basis tree rooted at row 0."""
    adj = [[] for _ in range(n + m)]
    for i, j in basis:
        adj[i].append(n + j)
        adj[n + j].append(i)
    pot = [0] * (n + m)
    parent = [-1] * (n + m)
    depth = [0] * (n + m)
    seen = [False] * (n + m)
    seen[0] = True
    order = [0]
    for node in order:
        for nb in adj[node]:
            if not seen[nb]:
                seen[nb] = True
                parent[nb] = node
                depth[nb] = depth[node] + 1
                if node < n:
                    pot[nb] = int(cost[node, nb - n]) - pot[node]
                else:
                    pot[nb] = int(cost[nb, node - n]) - pot[node]
                order.append(nb)
    if len(order) != n + m:
        raise RuntimeError("transport basis is not a spanning tree")
    return np.array(pot[:n], dtype=np.int64), np.array(pot[n:], dtype=np.int64), parent, depth


def _solve(supply, demand, cost, start=None, max_iter=None) -> tuple[np.ndarray, list, np.ndarray, np.ndarray]:
    n, m = cost.shape
    if start is None:
        flow, basis = _northwest(supply, demand)
    else:
        flow, basis = start[0].copy(), list(start[1])
    basic = np.zeros((n, m), dtype=bool)
    for c in basis:
        basic[c] = True
    if max_iter is None:
        max_iter = 50 * (n + m) ** 2 + 1000
    degenerate_run = 0
    for _ in range(max_iter):
        u, v, parent, depth = _tree(n, m, basis, cost)
        red = cost - u[:, None] - v[None, :]
        red[basic] = 0
        bland = degenerate_run > 25
        if bland:
            neg = np.flatnonzero(red < 0)
            if neg.size == 0:
                return flow, basis, u, v
            k = int(neg[0])
        else:
            k = int(np.argmin(red))
            if red.flat[k] >= 0:
                return flow, basis, u, v
        i, j = divmod(k, m)

        # cycle: entering arc, then the tree path from column j back to row i
        a, b = n + j, i
        up_a, up_b = [a], [b]
        while a != b:
            if depth[a] >= depth[b]:
                a = parent[a]
                up_a.append(a)
            else:
                b = parent[b]
                up_b.append(b)
        path = up_a + up_b[-2::-1]
        cells = []
        for p, q in zip(path, path[1:]):
            cells.append((p, q - n) if p < n else (q, p - n))
        minus = cells[0::2]
        plus = cells[1::2]
        theta = min(flow[c] for c in minus)
        ties = [c for c in minus if flow[c] <= theta]
        leave = min(ties, key=lambda c: c[0] * m + c[1]) if bland else ties[0]

        for c in minus:
            flow[c] = max(flow[c] - theta, 0.0)
        for c in plus:
            flow[c] += theta
        flow[i, j] = theta
        flow[leave] = 0.0
        basic[leave] = False
        basic[i, j] = True
        basis.remove(leave)
        basis.append((i, j))
        degenerate_run = degenerate_run + 1 if theta <= 1e-15 else 0
    raise RuntimeError("transportation simplex did not terminate")


def _distance_matrix(g: Graph, rows, cols) -> np.ndarray:
    return np.array([[g.bfs(x)[y] for y in cols] for x in rows], dtype=np.int64)


def solve_transport(g: Graph, f0: Measure, f1: Measure) -> TransportSolution:
    """Min-cost flow between the supports of ``f0`` and ``f1``."""
    rows, cols = f0.support, f1.support
    supply = np.array([f0[x] for x in rows])
    demand = np.array([f1[y] for y in cols])
    s_tot, d_tot = supply.sum(), demand.sum()
    if abs(s_tot - d_tot) > BALANCE_TOL:
        raise InfeasibleCoupling(
            f"total masses differ ({s_tot!r} vs {d_tot!r})", difference=float(s_tot - d_tot))
    demand = demand * (s_tot / d_tot)
    dist = _distance_matrix(g, rows, cols)
    flow, basis, u, v = _solve(supply, demand, dist)
    value = math.fsum((flow * dist).ravel())
    return TransportSolution(rows, cols, dist, flow, basis, u, v, value)


def w1(g: Graph, f0: Measure, f1: Measure) -> tuple[float, Coupling]:
    """W1 distance and an optimal coupling (the simplex's basic solution)."""
    sol = solve_transport(g, f0, f1)
    return sol.value, sol.coupling(g)


def probe(sol: TransportSolution, pair: tuple[int, int]) -> np.ndarray:
    """Among W1-optimal plans, one maximising the mass on ``pair``.

    ``pair`` is a (row, column) position in ``sol``. Costs are M*d on every
    arc and M*d - 1 on the probed arc with M = (number of arcs + 1); an optimal
    basis for these costs is optimal for d (reduced costs of d are integers),
    and among d-optimal plans it maximises the probed mass.
    """
    n, m = sol.dist.shape
    big = n * m + 1
    cost = sol.dist * big
    cost[pair] -= 1
    supply = sol.flow.sum(axis=1)
    demand = sol.flow.sum(axis=0)
    flow, _, _, _ = _solve(supply, demand, cost, start=(sol.flow, sol.basis))
    achieved = math.fsum((flow * sol.dist).ravel())
    if achieved > sol.value + OPTIMALITY_TOL:
        raise RuntimeError(f"probe left the optimal face ({achieved} > {sol.value})")
    return flow


def support_union(g: Graph, f0: Measure, f1: Measure, *, method: str = "probe",
                  solution: TransportSolution | None = None) -> SupportUnion:
    """Pairs carrying positive mass under at least one W1-optimal coupling.

    ``method="probe"`` maximises the mass of each undecided pair over the
    optimal face. ``method="residual"`` decides all pairs at once: an arc of
    the tight (zero reduced cost) graph can carry mass iff it already does, or
    it closes a cycle in the residual graph of one optimal plan.
    """
    sol = solution or solve_transport(g, f0, f1)
    tight = sol.tight_arcs()
    certified = sol.flow > PROBE_MASS_TOL
    if method == "probe":
        for a, b in zip(*np.nonzero(tight & ~certified)):
            if certified[a, b]:
                continue
            flow = probe(sol, (a, b))
            certified |= flow > PROBE_MASS_TOL
    elif method == "residual":
        n, m = tight.shape
        ta, tb = np.nonzero(tight)
        fa, fb = np.nonzero(certified)
        src = np.concatenate([ta, n + fb])
        dst = np.concatenate([n + tb, fa])
        graph = coo_matrix((np.ones(len(src)), (src, dst)), shape=(n + m, n + m))
        _, label = connected_components(graph, directed=True, connection="strong")
        certified = certified | (tight & (label[:n, None] == label[None, n:]))
    else:
        raise ValueError(f"unknown method {method!r}")
    pairs = frozenset((sol.rows[a], sol.cols[b]) for a, b in zip(*np.nonzero(certified)))
    return SupportUnion(pairs, sol.value)


def check_feasible(pi: Coupling, f0: Measure, f1: Measure, tol: float = MARGINAL_TOL) -> None:
    if any(v < 0 for v in pi.mass.values()):
        raise InfeasibleCoupling("coupling has negative mass")
    err = pi.marginal_error(f0, f1)
    if err > tol:
        raise InfeasibleCoupling(f"coupling marginals are off by {err:.3g}", error=err)


def is_optimal(g: Graph, f0: Measure, f1: Measure, pi: Coupling, tol: float = OPTIMALITY_TOL,
               *, w1_value: float | None = None) -> bool:
    """True iff ``pi`` is feasible and its cost is within ``tol`` of W1."""
    check_feasible(pi, f0, f1)
    if w1_value is None:
        w1_value = solve_transport(g, f0, f1).value
    return pi.cost <= w1_value + tol
