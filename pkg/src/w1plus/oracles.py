"""Independent reference computations used to cross-check the pipeline.

Each oracle takes a different route from the production code: closed-form
binomial laws, explicit geodesic listing, a general-purpose LP solver, and
direct minimisation of J over an explicit parameterisation of the face.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog, minimize
from scipy.stats import binom

from .graph_core import DistanceTable, Graph, Measure, all_pairs_distances, iter_geodesics

# HiGHS defaults to 1e-7 feasibility tolerances, too loose to check W1 identities at 1e-7
_TIGHT = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


def thinning_oracle(f: Mapping[int, float], t: float) -> dict[int, float]:
    """Binomial thinning of a law on {0, 1, 2, ...}: sum_l Bin(l, t)(k) f(l)."""
    out: dict[int, float] = {}
    for l, mass in f.items():
        ks = np.arange(l + 1)
        for k, p in zip(ks, binom.pmf(ks, l, t)):
            out[int(k)] = out.get(int(k), 0.0) + mass * float(p)
    return out


def contraction_oracle(g: Graph, o: int, f1: Measure, t: float,
                       d: DistanceTable | None = None) -> dict[int, float]:
    """Contraction of ``f1`` on ``o``: for every z, the uniform mixture over
    geodesics o -> z of binomial laws laid along the geodesic, weighted by f1(z)."""
    d = d or all_pairs_distances(g, [o])
    out: dict[int, float] = {}
    for z, mass in f1.masses.items():
        paths = list(iter_geodesics(g, d, o, z))
        L = len(paths[0]) - 1
        pmf = binom.pmf(np.arange(L + 1), L, t)
        share = mass / len(paths)
        for path in paths:
            for p, v in enumerate(path):
                out[v] = out.get(v, 0.0) + share * float(pmf[p])
    return out


def w1_lp(g: Graph, f0: Measure, f1: Measure) -> float:
    """W1 by a dense LP over every pair of support points."""
    rows, cols = f0.support, f1.support
    cost = np.array([[g.bfs(x)[y] for y in cols] for x in rows], dtype=float)
    n, m = cost.shape
    A = np.zeros((n + m, n * m))
    for i in range(n):
        A[i, i * m:(i + 1) * m] = 1
    for j in range(m):
        A[n + j, j::m] = 1
    b = np.array([f0[x] for x in rows] + [f1[y] for y in cols])
    res = linprog(cost.ravel(), A_eq=A, b_eq=b, bounds=(0, None), method="highs-ds", options=_TIGHT)
    if res.status != 0:
        raise RuntimeError(f"LP failed: {res.message}")
    return float(res.fun)


def w1_flow(g: Graph, f0: Measure, f1: Measure) -> float:
    """W1 as a min-cost flow on the edges of g: unit cost per edge and direction,
    net outflow f0 - f1 at every vertex. Uses no distances at all."""
    E = len(g.edges)
    A = np.zeros((g.n, 2 * E))
    for k, (i, j) in enumerate(g.edges):
        A[i, k], A[j, k] = 1, -1          # i -> j
        A[j, E + k], A[i, E + k] = 1, -1  # j -> i
    b = f0.as_array() - f1.as_array()
    res = linprog(np.ones(2 * E), A_eq=A, b_eq=b, bounds=(0, None), method="highs-ds", options=_TIGHT)
    if res.status != 0:
        raise RuntimeError(f"flow LP failed: {res.message}")
    return float(res.fun)


def floyd_warshall(g: Graph) -> np.ndarray:
    """All-pairs hop distances by the O(n^3) recurrence."""
    n = g.n
    D = np.full((n, n), np.inf)
    np.fill_diagonal(D, 0)
    for i, j in g.edges:
        D[i, j] = D[j, i] = 1
    for k in range(n):
        D = np.minimum(D, D[:, k:k + 1] + D[k:k + 1, :])
    return D


# --- entropy over the face ------------------------------------------------------

def _face_system(pairs: Sequence[tuple[int, int]], f0: Measure, f1: Measure):
    rows = sorted({x for x, _ in pairs})
    cols = sorted({y for _, y in pairs})
    A = np.zeros((len(rows) + len(cols), len(pairs)))
    for k, (x, y) in enumerate(pairs):
        A[rows.index(x), k] = 1
        A[len(rows) + cols.index(y), k] = 1
    b = np.array([f0[x] for x in rows] + [f1[y] for y in cols])
    return A, b


def _J(pi: np.ndarray, log_c: np.ndarray) -> float:
    if np.any(pi < 0):
        return math.inf
    pos = pi > 0
    return float(np.sum(pi[pos] * (np.log(pi[pos]) - log_c[pos]) - pi[pos]))


def _interior_point(A, b, rng, samples: int = 20):
    """Average of LP vertices found by random objectives: a point inside the face."""
    pts = []
    for _ in range(samples):
        res = linprog(rng.normal(size=A.shape[1]), A_eq=A, b_eq=b, bounds=(0, None), method="highs")
        if res.status == 0:
            pts.append(res.x)
    return np.mean(pts, axis=0), np.array(pts)


def golden_face_oracle(pairs, log_c, f0: Measure, f1: Measure) -> tuple[np.ndarray, float]:
    """Minimiser of J on a one-dimensional face by golden-section search.

    The search minimises |dJ/dp| along the face direction, whose zero is the
    minimiser; unlike J itself it has no flat constant part, so the search
    resolves the argument to near machine precision.
    """
    log_c = np.asarray(log_c, dtype=float)
    A, b = _face_system(pairs, f0, f1)
    N = null_space(A)
    if N.shape[1] != 1:
        raise ValueError(f"face has dimension {N.shape[1]}, not 1")
    direction = N[:, 0]
    base, _ = _interior_point(A, b, np.random.default_rng(0))
    # feasible interval for base + s * direction
    with np.errstate(divide="ignore"):
        bounds = -base / direction
    lo = max(bounds[direction > 0], default=-math.inf)
    hi = min(bounds[direction < 0], default=math.inf)

    def slope(s):
        pi = base + s * direction
        if np.any(pi <= 0):
            return math.inf
        return abs(float(direction @ (np.log(pi) - log_c)))

    ratio = (math.sqrt(5) - 1) / 2
    a, c = lo, hi
    x1, x2 = c - ratio * (c - a), a + ratio * (c - a)
    s1, s2 = slope(x1), slope(x2)
    for _ in range(200):
        if s1 <= s2:
            c, x2, s2 = x2, x1, s1
            x1 = c - ratio * (c - a)
            s1 = slope(x1)
        else:
            a, x1, s1 = x1, x2, s2
            x2 = a + ratio * (c - a)
            s2 = slope(x2)
        if c - a < 1e-16:
            break
    pi = base + 0.5 * (a + c) * direction
    return pi, _J(pi, log_c)


def face_J_oracle(pairs, log_c, f0: Measure, f1: Measure, *, grid: int = 400, seed: int = 0) -> tuple[np.ndarray, float]:
    """Minimum of J over D-supported couplings by sampling plus local refinement.

    The face is written as base + N theta with N a null-space basis of the
    marginal constraints. Candidate points are convex combinations of LP
    vertices; the best one seeds a Nelder-Mead search on theta.
    """
    log_c = np.asarray(log_c, dtype=float)
    A, b = _face_system(pairs, f0, f1)
    N = null_space(A)
    rng = np.random.default_rng(seed)
    base, verts = _interior_point(A, b, rng, samples=max(20, 4 * len(pairs)))
    if N.shape[1] == 0:
        return base, _J(base, log_c)
    candidates = [base]
    for _ in range(grid):
        w = rng.dirichlet(np.ones(len(verts)))
        candidates.append(w @ verts)
    best = min(candidates, key=lambda p: _J(p, log_c))
    start = N.T @ (best - base)

    def objective(theta):
        return _J(base + N @ theta, log_c)

    res = minimize(objective, start, method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 20000 * N.shape[1],
                            "maxfev": 40000 * N.shape[1]})
    pi = base + N @ res.x
    return pi, _J(pi, log_c)
