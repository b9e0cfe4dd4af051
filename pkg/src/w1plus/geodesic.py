"""Assembly and evaluation of the interpolating curve (f, g, h).

The curve is generated by two families of polynomials,

    P(x; t) = sum_l t^l / l! (K^l a)(x),   Q(x; t) = sum_l (1-t)^l / l! (K*^l b)(x),

and f = m P Q on vertices, g = m(x0, x1) P(x0) Q(x1) on oriented edges and
h = m(x0, x1, x2) P(x0) Q(x2) on oriented triples. Everything is exact
rational arithmetic; floats appear only when a value is evaluated.

P has nonnegative coefficients in t and Q nonnegative coefficients in
s = 1 - t, so floating evaluation through those two bases never cancels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import comb
from typing import Iterable, Mapping, Sequence

import numpy as np
from gmpy2 import mpq

from .errors import PerturbationInfeasible, ZeroDensity
from .graph_core import Graph, Measure
from .orientation import OrientedGraph, orient
from .polynomial import Polynomial, exact
from .scaling import DEFAULT_MAX_ITER, DEFAULT_TOL, ScalingResult, cost_kernel, minimize_J
from .transport import SupportUnion, TransportSolution, solve_transport, support_union
from .weights import WeightSystem, default_weights, kernels, load_custom_weights

ZERO_DENSITY = 1e-300


@dataclass
class GeodesicCurve:
    graph: Graph
    og: OrientedGraph
    weights: WeightSystem
    w1: float
    P: dict[int, Polynomial]
    Qs: dict[int, Polynomial]  # Q in the variable s = 1 - t
    f: dict[int, Polynomial]
    g: dict[tuple[int, int], Polynomial]
    h: dict[tuple[int, int, int], Polynomial]
    f0: Measure | None = None
    f1: Measure | None = None
    scaling: ScalingResult | None = None
    support: SupportUnion | None = None
    transport: TransportSolution | None = field(default=None, repr=False)
    _Q: dict[int, Polynomial] | None = field(default=None, repr=False)

    @property
    def Q(self) -> dict[int, Polynomial]:
        if self._Q is None:
            self._Q = {x: q.reflect() for x, q in self.Qs.items()}
        return self._Q

    @property
    def active(self) -> tuple[int, ...]:
        return self.og.active

    # --- float evaluation ------------------------------------------------

    def _PQ(self, ts: np.ndarray, derivatives: bool = False):
        ts = np.asarray(ts, dtype=float)
        ss = 1.0 - ts
        P = {x: p.eval_float(ts) for x, p in self.P.items()}
        Q = {x: q.eval_float(ss) for x, q in self.Qs.items()}
        if not derivatives:
            return P, Q
        dP = {x: p.derivative().eval_float(ts) for x, p in self.P.items()}
        dQ = {x: -q.derivative().eval_float(ss) for x, q in self.Qs.items()}
        return P, Q, dP, dQ

    def evaluate(self, ts, derivatives: bool = False) -> dict:
        """Values of f (per vertex) and g (per edge) on a grid of times.

        With ``derivatives`` also returns their t-derivatives under "df", "dg".
        """
        w = self.weights
        out = self._PQ(ts, derivatives)
        P, Q = out[0], out[1]
        mv = {x: float(w.vertex[x]) for x in self.active}
        me = {e: float(w.edge[e]) for e in self.og.edges}
        res = {
            "f": {x: mv[x] * P[x] * Q[x] for x in self.active},
            "g": {(a, b): me[(a, b)] * P[a] * Q[b] for a, b in self.og.edges},
        }
        if derivatives:
            dP, dQ = out[2], out[3]
            res["df"] = {x: mv[x] * (dP[x] * Q[x] + P[x] * dQ[x]) for x in self.active}
            res["dg"] = {(a, b): me[(a, b)] * (dP[a] * Q[b] + P[a] * dQ[b]) for a, b in self.og.edges}
        return res

    def density(self, t: float) -> dict[int, float]:
        f = self.evaluate(np.array([t]))["f"]
        return {x: float(v[0]) for x, v in f.items()}

    def density_matrix(self, ts) -> np.ndarray:
        """Array of shape (len(ts), n) with f(x; t), zero off the active set."""
        ts = np.asarray(ts, dtype=float)
        f = self.evaluate(ts)["f"]
        out = np.zeros((len(ts), self.graph.n))
        for x, v in f.items():
            out[:, x] = v
        return out

    def measure(self, t: float) -> Measure:
        masses = {x: v for x, v in self.density(t).items() if v > 0}
        return Measure(self.graph, masses, tol=1e-9, normalize=True)

    # --- exact evaluation ------------------------------------------------

    def exact_values(self, t) -> tuple[dict[int, mpq], dict[int, mpq]]:
        """P and Q at a rational time, exactly."""
        t = exact(t)
        s = 1 - t
        return ({x: p.eval_exact(t) for x, p in self.P.items()},
                {x: q.eval_exact(s) for x, q in self.Qs.items()})

    def exact_fg(self, t) -> tuple[dict[int, mpq], dict[tuple[int, int], mpq]]:
        P, Q = self.exact_values(t)
        w = self.weights
        return ({x: w.vertex[x] * P[x] * Q[x] for x in self.active},
                {(a, b): w.edge[(a, b)] * P[a] * Q[b] for a, b in self.og.edges})

    def sample(self, times: Iterable[float]) -> list[tuple[float, object, float]]:
        rows = []
        for t in times:
            dens = self.density(t)
            for x in sorted(dens):
                rows.append((t, self.graph.name(x), dens[x]))
        return rows


# --- construction -------------------------------------------------------------

def build_PQ(w: WeightSystem, a: Mapping[int, float], b: Mapping[int, float]):
    """Exact P (in t) and Q (in s = 1 - t) for scalings a, b (zero off their keys)."""
    K = kernels(w)
    active = w.og.active

    def series(start, step):
        coeffs = {x: [] for x in active}
        cur = {x: exact(start.get(x, 0.0)) for x in active}
        fact = 1
        level = 0
        while any(cur.values()):
            for x in active:
                coeffs[x].append(cur[x] / fact)
            level += 1
            fact *= level
            cur = step(cur)
        return {x: Polynomial(c) for x, c in coeffs.items()}

    return series(a, K.apply), series(b, K.apply_adjoint)


def build_curve(w: WeightSystem, P: Mapping[int, Polynomial], Qs: Mapping[int, Polynomial], *,
                w1: float = float("nan"), **extra) -> GeodesicCurve:
    og = w.og
    Q = {x: q.reflect() for x, q in Qs.items()}
    f = {x: P[x] * Q[x] * w.vertex[x] for x in og.active}
    g = {(a, b): P[a] * Q[b] * w.edge[(a, b)] for a, b in og.edges}
    PQ_pairs: dict[tuple[int, int], Polynomial] = {}
    h = {}
    for a, b, c in og.triples():
        base = PQ_pairs.get((a, c))
        if base is None:
            base = PQ_pairs[(a, c)] = P[a] * Q[c]
        h[(a, b, c)] = base * w.triple(a, b, c)
    return GeodesicCurve(og.graph, og, w, w1, dict(P), dict(Qs), f, g, h, _Q=Q, **extra)


def build_geodesic(g: Graph, f0: Measure, f1: Measure, *, weights=None, tol: float = DEFAULT_TOL,
                   max_iter: int = DEFAULT_MAX_ITER, support_method: str = "probe") -> GeodesicCurve:
    """Full chain: transport, support union, orientation, weights, scaling, curve.

    ``weights`` may be ``None`` (path counting), a :class:`WeightSystem`, or a
    list of ``[x, y, m]`` entries naming oriented edges.
    """
    sol = solve_transport(g, f0, f1)
    C = support_union(g, f0, f1, method=support_method, solution=sol)
    og = orient(g, C.pairs)
    if weights is None:
        w = default_weights(og)
    elif isinstance(weights, WeightSystem):
        w = weights
    else:
        w = load_custom_weights(og, weights)
    ck = cost_kernel(w, w.order, f0, f1)
    sr = minimize_J(ck, f0, f1, tol=tol, max_iter=max_iter)
    P, Qs = build_PQ(w, sr.a, sr.b)
    return build_curve(w, P, Qs, w1=sol.value, f0=f0, f1=f1, scaling=sr, support=C, transport=sol)


# --- binomial mixture -----------------------------------------------------------

def binomial_mixture(sr: ScalingResult, w: WeightSystem, t: float) -> dict[int, float]:
    """f_t as a mixture over face pairs of binomial laws spread along geodesics.

    Each pair (x, y) with mass pi(x, y) sends the share m(x, z, y)/m(x, y) of
    Bin(d(x, y), t)(d(x, z)) to every z between x and y.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    order = w.order
    d = w.og.dist
    out: dict[int, float] = {}
    for (x, y), p in sr.coupling.mass.items():
        L = d(x, y)
        mxy = w.pair(x, y)
        for z in order.above(x):
            if not order.leq(z, y):
                continue
            k = d(x, z)
            share = float(w.pair(x, z) * w.pair(z, y) / (w.vertex[z] * mxy))
            out[z] = out.get(z, 0.0) + p * share * comb(L, k) * t**k * (1.0 - t) ** (L - k)
    return out


# --- velocities -------------------------------------------------------------------

@dataclass
class Velocities:
    vplus: dict[tuple[int, int], float]
    vminus: dict[tuple[int, int], float]
    Vplus: dict[int, float]
    Vminus: dict[int, float]


def velocities(curve: GeodesicCurve, t: float) -> Velocities:
    """v+ = g/f(tail), v- = g/f(head); V+ sums v+ over out-edges, V- sums v- over in-edges."""
    if not 0.0 < t < 1.0:
        raise ValueError("velocities are defined for t in (0, 1)")
    ev = curve.evaluate(np.array([t]))
    f = {x: float(v[0]) for x, v in ev["f"].items()}
    g = {e: float(v[0]) for e, v in ev["g"].items()}
    og = curve.og
    for a, b in og.edges:
        for x in (a, b):
            if f[x] <= ZERO_DENSITY:
                raise ZeroDensity(f"density vanishes at {curve.graph.name(x)!r} at t={t}",
                                  vertex=curve.graph.name(x), t=t)
    vp = {(a, b): g[(a, b)] / f[a] for a, b in og.edges}
    vm = {(a, b): g[(a, b)] / f[b] for a, b in og.edges}
    Vp = {x: math.fsum(vp[(x, y)] for y in og.succ[x]) for x in og.active}
    Vm = {x: math.fsum(vm[(w_, x)] for w_ in og.pred[x]) for x in og.active}
    return Velocities(vp, vm, Vp, Vm)


def velocity_ode_residual(curve: GeodesicCurve, t) -> float:
    """Exact check of dv/dt + v (V(head) - V(tail)) = 0 for v+ and v-.

    Evaluated in rational arithmetic at ``t``; returns the largest residual
    relative to |v| (|V(head)| + |V(tail)|).
    """
    t = exact(t)
    og, w = curve.og, curve.weights
    P, Q = curve.exact_values(t)
    s = 1 - t
    dP = {x: p.derivative().eval_exact(t) for x, p in curve.P.items()}
    dQ = {x: -q.derivative().eval_exact(s) for x, q in curve.Qs.items()}
    f = {x: w.vertex[x] * P[x] * Q[x] for x in og.active}
    df = {x: w.vertex[x] * (dP[x] * Q[x] + P[x] * dQ[x]) for x in og.active}
    g = {(a, b): w.edge[(a, b)] * P[a] * Q[b] for a, b in og.edges}
    dg = {(a, b): w.edge[(a, b)] * (dP[a] * Q[b] + P[a] * dQ[b]) for a, b in og.edges}
    for x in og.active:
        if f[x] == 0 and (og.succ[x] or og.pred[x]):
            raise ZeroDensity(f"density vanishes at {curve.graph.name(x)!r}", vertex=curve.graph.name(x))
    worst = 0.0
    for mode in ("+", "-"):
        ref = (lambda a, b: a) if mode == "+" else (lambda a, b: b)
        v = {(a, b): g[(a, b)] / f[ref(a, b)] for a, b in og.edges}
        dv = {(a, b): (dg[(a, b)] * f[ref(a, b)] - g[(a, b)] * df[ref(a, b)]) / f[ref(a, b)] ** 2
              for a, b in og.edges}
        if mode == "+":
            V = {x: sum((v[(x, y)] for y in og.succ[x]), mpq(0)) for x in og.active}
        else:
            V = {x: sum((v[(z, x)] for z in og.pred[x]), mpq(0)) for x in og.active}
        for a, b in og.edges:
            res = dv[(a, b)] + v[(a, b)] * (V[b] - V[a])
            scale = abs(v[(a, b)]) * (abs(V[a]) + abs(V[b]))
            if res:
                worst = max(worst, float(abs(res) / scale))
    return worst


# --- C_gamma -----------------------------------------------------------------------

def C_gamma_exact(curve: GeodesicCurve, gamma: Sequence[int], t) -> mpq:
    f, g = curve.exact_fg(t)
    gamma = list(gamma)
    if len(gamma) == 1:
        return f[gamma[0]]
    num = mpq(1)
    for a, b in zip(gamma, gamma[1:]):
        num *= g[(a, b)]
    for z in gamma[1:-1]:
        if f[z] == 0:
            raise ZeroDensity(f"density vanishes at {curve.graph.name(z)!r}", vertex=curve.graph.name(z))
        num /= f[z]
    return num


def C_gamma(curve: GeodesicCurve, gamma: Sequence[int], t: float) -> float:
    """Product of g along the path over the product of interior densities."""
    gamma = list(gamma)
    ev = curve.evaluate(np.array([t]))
    f, g = ev["f"], ev["g"]
    if len(gamma) == 1:
        return float(f[gamma[0]][0])
    log_val = 0.0
    for a, b in zip(gamma, gamma[1:]):
        log_val += math.log(g[(a, b)][0])
    for z in gamma[1:-1]:
        fz = float(f[z][0])
        if fz <= ZERO_DENSITY:
            raise ZeroDensity(f"density vanishes at {curve.graph.name(z)!r}", vertex=curve.graph.name(z))
        log_val -= math.log(fz)
    return math.exp(log_val)


def random_extremal_path(og: OrientedGraph, rng: np.random.Generator, start: int | None = None,
                         down: Mapping[int, int] | None = None) -> list[int]:
    """Uniformly random oriented path from ``start`` (or a random source) to a sink."""
    from .weights import path_counts

    if down is None:
        _, down = path_counts(og)
    if start is None:
        weights = np.array([down[s] for s in og.sources], dtype=float)
        start = og.sources[int(rng.choice(len(og.sources), p=weights / weights.sum()))]
    path = [start]
    while og.succ[path[-1]]:
        nxt = og.succ[path[-1]]
        weights = np.array([down[y] for y in nxt], dtype=float)
        path.append(nxt[int(rng.choice(len(nxt), p=weights / weights.sum()))])
    return path


def random_initial_path(og: OrientedGraph, rng: np.random.Generator, end: int,
                        up: Mapping[int, int] | None = None) -> list[int]:
    """Uniformly random oriented path from a source to ``end``."""
    from .weights import path_counts

    if up is None:
        up, _ = path_counts(og)
    path = [end]
    while og.pred[path[-1]]:
        prv = og.pred[path[-1]]
        weights = np.array([up[x] for x in prv], dtype=float)
        path.append(prv[int(rng.choice(len(prv), p=weights / weights.sum()))])
    return path[::-1]


def extremal_paths(og: OrientedGraph, limit: int = 500, rng: np.random.Generator | None = None) -> list[list[int]]:
    """All source-to-sink oriented paths, or ``limit`` uniform samples if there are more."""
    from .weights import path_counts

    up, down = path_counts(og)
    total = sum(down[s] for s in og.sources)
    if total > limit:
        rng = rng or np.random.default_rng(0)
        return [random_extremal_path(og, rng, down=down) for _ in range(limit)]
    out = []

    def walk(path):
        if not og.succ[path[-1]]:
            out.append(list(path))
            return
        for y in og.succ[path[-1]]:
            path.append(y)
            walk(path)
            path.pop()

    for s in og.sources:
        walk([s])
    return out


# --- entropy and action ---------------------------------------------------------------

def entropy_profile(curve: GeodesicCurve, grid: Sequence[float]) -> list[tuple[float, float]]:
    """H(t) = sum of f log f over vertices with positive mass."""
    ts = np.asarray(grid, dtype=float)
    if np.any((ts < 0) | (ts > 1)):
        raise ValueError("grid must lie in [0, 1]")
    F = curve.density_matrix(ts)
    out = []
    for t, row in zip(ts, F):
        pos = row[row > 0]
        out.append((float(t), math.fsum(pos * np.log(pos))))
    return out


def _trapezoid_weights(n: int) -> np.ndarray:
    w = np.full(n, 1.0 / (n - 1))
    w[0] = w[-1] = 0.5 / (n - 1)
    return w


def _phi(g: np.ndarray, f: np.ndarray) -> np.ndarray:
    out = np.zeros_like(g)
    pos = g > 0
    out[pos] = g[pos] * np.log(g[pos] / f[pos])
    return out


def action(curve: GeodesicCurve, grid: int = 1001, mode: str = "+") -> float:
    """Midpoint-rule value of the integral of sum_e g log(g/f(ref)), ref = tail (+) or head (-).

    The midpoint rule never samples t = 0 or 1, where f(ref) may vanish while g
    does not; the integrand then has an integrable log singularity.
    """
    if mode not in ("+", "-"):
        raise ValueError("mode must be '+' or '-'")
    ts = (np.arange(grid) + 0.5) / grid
    ev = curve.evaluate(ts)
    total = 0.0
    for (a, b), gv in ev["g"].items():
        ref = a if mode == "+" else b
        total += float(np.sum(_phi(gv, ev["f"][ref]))) / grid
    return total


def action_I_plus(curve: GeodesicCurve, grid: int = 1001) -> float:
    return action(curve, grid, "+")


@dataclass
class Perturbation:
    """u_e(t) = amp_e t^2 (1-t)^2 g_e(t) (1 + tilt_e t) on oriented edges."""

    amp: dict[tuple[int, int], float]
    tilt: dict[tuple[int, int], float]

    @classmethod
    def zero(cls, og: OrientedGraph) -> "Perturbation":
        return cls({e: 0.0 for e in og.edges}, {e: 0.0 for e in og.edges})

    @classmethod
    def random(cls, og: OrientedGraph, rng: np.random.Generator, scale: float = 1.0) -> "Perturbation":
        return cls({e: scale * float(rng.uniform(-1, 1)) for e in og.edges},
                   {e: float(rng.uniform(-0.5, 0.5)) for e in og.edges})

    def values(self, ts: np.ndarray, g: Mapping, dg: Mapping):
        bump = ts**2 * (1 - ts) ** 2
        dbump = 2 * ts * (1 - ts) ** 2 - 2 * ts**2 * (1 - ts)
        u, du = {}, {}
        for e, amp in self.amp.items():
            tilt = self.tilt[e]
            lin = 1 + tilt * ts
            u[e] = amp * bump * g[e] * lin
            du[e] = amp * (dbump * g[e] * lin + bump * dg[e] * lin + bump * g[e] * tilt)
        return u, du


@dataclass
class CriticalityReport:
    mode: str
    etas: list[float]
    deltas: list[float]
    coefficients: list[float]
    scale: float

    @property
    def relative(self) -> float:
        """|first-order coefficient| over the size of the first-order integrand."""
        if self.scale == 0:
            return 0.0 if self.coefficients[0] == 0 else math.inf
        return abs(self.coefficients[0]) / self.scale


def criticality_test(curve: GeodesicCurve, u: Perturbation, etas: Sequence[float] = (1e-2, 1e-3, 1e-4),
                     grid: int = 1001, mode: str = "+") -> CriticalityReport:
    """Fit I(f + eta div u, g - eta du/dt) - I(f, g) by c1 eta + c2 eta^2 + ... .

    The boundary values of u vanish, so the endpoint terms of the difference
    are zero and only interior grid points are evaluated.
    """
    if mode not in ("+", "-"):
        raise ValueError("mode must be '+' or '-'")
    og = curve.og
    ts = np.linspace(0.0, 1.0, grid)[1:-1]
    w = _trapezoid_weights(grid)[1:-1]
    ev = curve.evaluate(ts, derivatives=True)
    f, g = ev["f"], ev["g"]
    uu, du = u.values(ts, g, ev["dg"])
    div_u = {x: sum((uu[(x, y)] for y in og.succ[x]), np.zeros_like(ts))
             - sum((uu[(z, x)] for z in og.pred[x]), np.zeros_like(ts)) for x in og.active}

    def ref(e):
        return e[0] if mode == "+" else e[1]

    scale = 0.0
    for e in og.edges:
        v = g[e] / f[ref(e)]
        scale += float(w @ (np.abs(du[e] * (1 + np.log(v))) + np.abs(div_u[ref(e)] * v)))

    deltas = []
    for eta in etas:
        total = 0.0
        for e in og.edges:
            ft = f[ref(e)] + eta * div_u[ref(e)]
            gt = g[e] - eta * du[e]
            if np.any(ft <= 0) or np.any(gt <= 0):
                raise PerturbationInfeasible(f"perturbation with eta={eta} leaves the positive cone", eta=eta)
            total += float(w @ (gt * np.log(gt / ft) - g[e] * np.log(g[e] / f[ref(e)])))
        deltas.append(total)
    V = np.array([[eta**k for k in range(1, len(etas) + 1)] for eta in etas])
    coeffs = np.linalg.solve(V, np.array(deltas))
    return CriticalityReport(mode, list(etas), deltas, [float(c) for c in coeffs], scale)
