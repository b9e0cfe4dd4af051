"""Residual checks for a constructed curve, collected into one report."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from gmpy2 import mpq

from .errors import W1PlusError
from .geodesic import (
    GeodesicCurve,
    Perturbation,
    binomial_mixture,
    criticality_test,
    entropy_profile,
    extremal_paths,
    random_extremal_path,
    random_initial_path,
    velocity_ode_residual,
)
from .graph_core import Graph, Measure
from .orientation import orient, tree_flux
from .polynomial import Polynomial, interpolate
from .transport import solve_transport, support_union
from .weights import kernels, path_counts


@dataclass(frozen=True)
class Tolerances:
    marginal: float = 1e-10
    normalization: float = 1e-10
    boundary: float = 1e-10
    continuity: float = 1e-10
    benamou_brenier: float = 1e-10
    edge_sum: float = 1e-9
    w1_geodesic: float = 1e-7
    scaling: float = 1e-12
    optimality: float = 1e-8
    product_form: float = 1e-9
    divergence: float = 1e-10
    kernel: float = 1e-10
    c_gamma_constant: float = 1e-9
    c_gamma_fit: float = 1e-8
    velocity_ode: float = 1e-10
    product_quotient: float = 1e-10
    pq_ode: float = 1e-10
    tree_flux: float = 1e-12
    mixture: float = 1e-10
    contraction: float = 1e-9
    entropy_convexity: float = 1e-8
    criticality: float = 1e-3
    roundtrip: float = 1e-12


@dataclass
class Check:
    name: str
    residual: float
    tolerance: float
    passed: bool
    samples: str = ""
    gating: bool = True

    def row(self) -> str:
        flag = "pass" if self.passed else ("FAIL" if self.gating else "note")
        return f"{self.name:<28} {self.residual:>12.3e} {self.tolerance:>10.1e}  {flag}  {self.samples}"


@dataclass
class VerificationReport:
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.gating)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def names(self) -> list[str]:
        return [c.name for c in self.checks]

    def add(self, name: str, residual: float, tolerance: float, samples: str = "", *,
            passed: bool | None = None, gating: bool = True) -> Check:
        residual = float(residual)
        if passed is None:
            passed = residual <= tolerance
        check = Check(name, residual, tolerance, bool(passed), samples, gating)
        self.checks.append(check)
        return check

    def table(self) -> str:
        head = f"{'check':<28} {'residual':>12} {'tolerance':>10}  result"
        lines = [head, "-" * len(head)] + [c.row() for c in self.checks]
        lines.append(f"overall: {'pass' if self.passed else 'FAIL'}")
        return "\n".join(lines)

    def to_document(self) -> dict:
        return {"passed": self.passed, "checks": [asdict(c) for c in self.checks]}

    def to_json(self) -> str:
        return json.dumps(self.to_document(), indent=2)


# --- helpers ---------------------------------------------------------------------

def _coef_max(p: Polynomial) -> float:
    return p.max_abs_coeff()


def _grid(n: int, interior: bool = False) -> list[Fraction]:
    """n equally spaced rational times on [0, 1], or strictly inside it."""
    if interior:
        return [Fraction(k + 1, n + 1) for k in range(n)]
    return [Fraction(k, n - 1) for k in range(n)]


class _ExactCache:
    """Exact f and g at rational times, computed once per time."""

    def __init__(self, curve: GeodesicCurve):
        self.curve = curve
        self.cache: dict = {}

    def __call__(self, t):
        key = Fraction(t)
        if key not in self.cache:
            self.cache[key] = self.curve.exact_fg(key)
        return self.cache[key]

    def C(self, gamma, t) -> mpq:
        f, g = self(t)
        if len(gamma) == 1:
            return f[gamma[0]]
        out = mpq(1)
        for a, b in zip(gamma, gamma[1:]):
            out *= g[(a, b)]
        for z in gamma[1:-1]:
            out /= f[z]
        return out


def _guard(report: VerificationReport, name: str, tol: float, fn: Callable[[], tuple]) -> None:
    """Run one check; an exception becomes a failed entry instead of aborting the report."""
    try:
        residual, samples = fn()
        report.add(name, residual, tol, samples)
    except W1PlusError as exc:
        report.add(name, math.inf, tol, f"{exc.code}: {exc}", passed=False)


# --- individual checks ------------------------------------------------------------

def _normalization(curve: GeodesicCurve):
    total = Polynomial()
    for p in curve.f.values():
        total = total + p
    resid = (total - 1).max_abs_coeff()
    ts = np.linspace(0, 1, 11)
    F = curve.density_matrix(ts)
    negative = max(0.0, -float(F.min()))
    return max(resid, negative), "coefficients of sum f - 1; f >= 0 on 11 t"


def _boundary(curve: GeodesicCurve):
    worst = 0.0
    for x in range(curve.graph.n):
        p = curve.f.get(x, Polynomial())
        worst = max(worst, abs(float(p.eval_exact(0)) - curve.f0[x]), abs(float(p.eval_exact(1)) - curve.f1[x]))
    return worst, "t in {0, 1}"


def _flux_positive(curve: GeodesicCurve):
    # g = m P(tail) Q(head) with P >= 0 in t and Q >= 0 in 1 - t, so g > 0 on (0, 1)
    # exactly when both factors are nonzero polynomials
    zero = [e for e in curve.og.edges if not curve.P[e[0]] or not curve.Qs[e[1]]]
    ts = np.linspace(0, 1, 23)[1:-1]
    g = curve.evaluate(ts)["g"]
    low = min((float(v.min()) for v in g.values()), default=1.0)
    residual = float(len(zero)) + (0.0 if low > 0 else 1.0)
    return residual, f"{len(curve.og.edges)} edges, min g on 21 interior t = {low:.3e}"


def _continuity(curve: GeodesicCurve):
    og = curve.og
    worst_f = 0.0
    for x in og.active:
        acc = curve.f[x].derivative()
        for y in og.succ[x]:
            acc = acc + curve.g[(x, y)]
        for z in og.pred[x]:
            acc = acc - curve.g[(z, x)]
        worst_f = max(worst_f, _coef_max(acc))
    worst_g = 0.0
    for a, b in og.edges:
        acc = curve.g[(a, b)].derivative()
        for c in og.succ[b]:
            acc = acc + curve.h[(a, b, c)]
        for z in og.pred[a]:
            acc = acc - curve.h[(z, a, b)]
        worst_g = max(worst_g, _coef_max(acc))
    return worst_f, worst_g


def _benamou_brenier(curve: GeodesicCurve):
    worst = 0.0
    for (a, b, c), h in curve.h.items():
        worst = max(worst, _coef_max(curve.f[b] * h - curve.g[(a, b)] * curve.g[(b, c)]))
    return worst, f"{len(curve.h)} triples"


def _edge_sum(curve: GeodesicCurve):
    ts = np.linspace(0, 1, 11)
    g = curve.evaluate(ts)["g"]
    total = sum(g.values(), np.zeros_like(ts))
    return float(np.max(np.abs(total - curve.w1))), "11 t"


def _w1_geodesic(curve: GeodesicCurve, rng: np.random.Generator, pairs: int):
    worst = 0.0
    for _ in range(pairs):
        s, t = sorted(rng.uniform(0, 1, size=2))
        fs, ft = curve.measure(s), curve.measure(t)
        val = solve_transport(curve.graph, fs, ft).value
        worst = max(worst, abs(val - (t - s) * curve.w1))
    return worst, f"{pairs} random (s, t)"


def _degree(curve: GeodesicCurve):
    bound = curve.og.longest_path()
    top = max((p.degree for p in curve.f.values()), default=0)
    return max(0, top - bound), f"max degree {top}, bound {bound}"


def _pq_ode(curve: GeodesicCurve):
    K = kernels(curve.weights)
    KP = K.apply(curve.P)
    KQ = K.apply_adjoint(curve.Q)
    worst = 0.0
    for x in curve.og.active:
        worst = max(worst, _coef_max(curve.P[x].derivative() - KP[x]),
                    _coef_max(curve.Q[x].derivative() + KQ[x]))
    return worst, "dP/dt = KP, dQ/dt = -K*Q"


def _kernel_algebra(curve: GeodesicCurve, rng: np.random.Generator):
    w, og = curve.weights, curve.og
    K = kernels(w)
    worst = 0.0
    rows = K.row_sums()
    for x in og.active:
        if og.pred[x]:
            worst = max(worst, abs(float(rows[x] - 1)))
    rows = K.row_sums(adjoint=True)
    for x in og.active:
        if og.succ[x]:
            worst = max(worst, abs(float(rows[x] - 1)))
    for _ in range(3):
        u = {x: float(rng.normal()) for x in og.active}
        v = {x: float(rng.normal()) for x in og.active}
        lhs = float(K.inner(K.apply(u), v))
        rhs = float(K.inner(u, K.apply_adjoint(v)))
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
    diam = og.longest_path()
    pairs = [(x, y) for x in og.active for y in og.active if x != y and w.order.leq(x, y)]
    powers = {}
    if pairs:
        picks = rng.choice(len(pairs), size=min(10, len(pairs)), replace=False)
        for k in picks:
            x0, xn = pairs[int(k)]
            n = og.dist(x0, xn)
            Kn = powers.get(n)
            if Kn is None:
                Kn = powers[n] = K.power(n)
            worst = max(worst, abs(float(Kn[xn].get(x0, 0) - w.pair(x0, xn) / w.vertex[xn])))
    nil = K.nilpotency_index()
    nil_star = K.nilpotency_index(adjoint=True)
    if nil > diam + 1 or nil_star > diam + 1:
        worst = math.inf
    return worst, f"nilpotency index {nil}, longest path {diam}"


def _c_gamma(curve: GeodesicCurve, rng: np.random.Generator, limit: int):
    og = curve.og
    cache = _ExactCache(curve)
    grid = _grid(21, interior=True)
    const_worst = 0.0
    paths = extremal_paths(og, limit=limit, rng=rng)
    for gamma in paths:
        vals = [float(cache.C(gamma, t)) for t in grid]
        const_worst = max(const_worst, max(vals) - min(vals))

    up, down = path_counts(og)
    to_sink = og.distance_to_sinks()
    from_source = og.distance_from_sources()
    fit_worst = 0.0
    pq_worst = 0.0
    targets = list(og.active)
    if len(targets) > 20:
        targets = [targets[int(k)] for k in rng.choice(len(targets), size=20, replace=False)]
    for x in targets:
        first = random_initial_path(og, rng, x, up=up)      # source -> x
        second = random_extremal_path(og, rng, start=x, down=down)  # x -> sink
        for gamma, bound in ((first, to_sink[x]), (second, from_source[x])):
            ts = grid[: bound + 1]
            ys = [cache.C(gamma, t) for t in ts]
            poly = interpolate(ts, ys)
            scale = max(abs(float(y)) for y in ys) or 1.0
            for t in grid[bound + 1:]:
                fit_worst = max(fit_worst, abs(float(poly.eval_exact(t) - cache.C(gamma, t))) / scale)
        joined = first + second[1:]
        for t in grid[::5]:
            f, _ = cache(t)
            pred = cache.C(first, t) * cache.C(second, t) / cache.C(joined, t)
            pq_worst = max(pq_worst, float(abs(pred - f[x]) / f[x]))
    return const_worst, fit_worst, pq_worst, len(paths), len(targets)


def _tree_flux(curve: GeodesicCurve):
    og = curve.og
    dfdt = {x: curve.f[x].derivative() for x in og.active}
    flux = tree_flux(og, None, dfdt)
    ident = 0.0
    for x in og.active:
        acc = dfdt[x]
        for y in og.succ[x]:
            acc = acc + flux.get((x, y), 0)
        for z in og.pred[x]:
            acc = acc - flux.get((z, x), 0)
        ident = max(ident, _coef_max(acc))
    low = math.inf
    for p in flux.values():
        for t in _grid(9, interior=True):
            low = min(low, float(p.eval_exact(t)))
    return ident, low, len(flux)


def _scaling_checks(curve: GeodesicCurve, report: VerificationReport, tol: Tolerances):
    sr = curve.scaling
    ck = sr.kernel
    report.add("face_equals_support", 0.0 if set(ck.pairs) == set(curve.support.pairs) else 1.0, 0.0,
               f"|D| = {len(ck.pairs)}, |C| = {len(curve.support.pairs)}")
    worst = 0.0
    for (x, y), m in sr.coupling.mass.items():
        prod = float(sr.product_mass(x, y))
        worst = max(worst, abs(m / prod - 1))
    report.add("product_form", worst, tol.product_form, sr.method)
    report.add("scaling_marginals", sr.marginal_error, tol.scaling, f"{sr.iterations} iterations")
    report.add("coupling_optimal", max(0.0, sr.coupling.cost - curve.w1), tol.optimality,
               f"cost {sr.coupling.cost:.15g}, W1 {curve.w1:.15g}")


def _mixture(curve: GeodesicCurve):
    worst = 0.0
    for t in np.linspace(0, 1, 11):
        mix = binomial_mixture(curve.scaling, curve.weights, float(t))
        dens = curve.density(float(t))
        for x in set(mix) | set(dens):
            worst = max(worst, abs(mix.get(x, 0.0) - dens.get(x, 0.0)))
    return worst, "11 t"


def _contraction(curve: GeodesicCurve):
    from .oracles import contraction_oracle

    (o,) = curve.f0.support
    worst = 0.0
    for t in np.linspace(0, 1, 11):
        ref = contraction_oracle(curve.graph, o, curve.f1, float(t))
        dens = curve.density(float(t))
        for x in set(ref) | set(dens):
            worst = max(worst, abs(ref.get(x, 0.0) - dens.get(x, 0.0)))
    return worst, "11 t"


def path_positions(g: Graph) -> list[int] | None:
    """Vertices of a path graph listed from one end, or None if g is not a path."""
    if len(g.edges) != g.n - 1 or any(len(a) > 2 for a in g.adj):
        return None
    if g.n == 1:
        return [0]
    start = min(i for i in range(g.n) if len(g.adj[i]) == 1)
    order = [start]
    prev = -1
    while len(order) < g.n:
        nxt = [y for y in g.adj[order[-1]] if y != prev]
        prev = order[-1]
        order.append(nxt[0])
    return order


def monotone_path_order(curve: GeodesicCurve) -> list[int] | None:
    """Path vertices ordered so that every oriented edge points forward, if possible."""
    order = path_positions(curve.graph)
    if order is None:
        return None
    pos = {v: k for k, v in enumerate(order)}
    steps = {pos[b] - pos[a] for a, b in curve.og.edges}
    if steps <= {1}:
        return order
    if steps <= {-1}:
        return order[::-1]
    return None


def _one_dimensional(curve: GeodesicCurve, order: list[int]):
    f = [curve.f.get(v, Polynomial()) for v in order]
    g1, acc = [], Polynomial()
    for p in f:
        acc = acc - p.derivative()
        g1.append(acc)
    h1, acc = [], Polynomial()
    for p in g1:
        acc = acc - p.derivative()
        h1.append(acc)
    worst = 0.0
    for k in range(1, len(f)):
        worst = max(worst, _coef_max(f[k] * h1[k - 1] - g1[k] * g1[k - 1]))
    # the cumulative flux must coincide with the edge flux of the curve
    for k in range(len(f) - 1):
        e = (order[k], order[k + 1])
        worst = max(worst, _coef_max(g1[k] - curve.g.get(e, Polynomial())))
    return worst, f"{len(f)} sites"


def _entropy_convexity(curve: GeodesicCurve):
    H = np.array([h for _, h in entropy_profile(curve, np.linspace(0, 1, 101))])
    second = H[2:] - 2 * H[1:-1] + H[:-2]
    return max(0.0, -float(second.min())), "101 t"


def _stability(curve: GeodesicCurve, rng: np.random.Generator, samples: int):
    bad = 0
    edges = curve.og.edge_set
    order = curve.weights.order
    for _ in range(samples):
        s, t = sorted(rng.uniform(0, 1, size=2))
        fs, ft = curve.measure(s), curve.measure(t)
        C = support_union(curve.graph, fs, ft, method="residual")
        bad += sum(1 for x, y in C.pairs if not order.leq(x, y))
        og2 = orient(curve.graph, C.pairs)
        bad += len(og2.edge_set - edges)
    return float(bad), f"{samples} random (s, t)"


def _criticality(curve: GeodesicCurve, rng: np.random.Generator, count: int):
    worst = 0.0
    for _ in range(count):
        u = Perturbation.random(curve.og, rng)
        for mode in ("+", "-"):
            worst = max(worst, criticality_test(curve, u, mode=mode).relative)
    return worst, f"{count} perturbations, both functionals"


# --- entry point --------------------------------------------------------------------

def verify(curve: GeodesicCurve, tol: Tolerances | None = None, *, seed: int = 0, w1_pairs: int = 10,
           geodesic_limit: int = 500, criticality: int = 2, stability: int = 2) -> VerificationReport:
    """Run every structural check on ``curve`` and collect residuals."""
    tol = tol or Tolerances()
    rng = np.random.default_rng(seed)
    report = VerificationReport()

    _guard(report, "normalization", tol.normalization, lambda: _normalization(curve))
    if curve.f0 is not None and curve.f1 is not None:
        _guard(report, "boundary", tol.boundary, lambda: _boundary(curve))
    residual, samples = _flux_positive(curve)
    report.add("flux_positive", residual, 0.0, samples)
    cont_f, cont_g = _continuity(curve)
    report.add("continuity_f", cont_f, tol.continuity, "coefficients of df/dt + div g")
    report.add("continuity_g", cont_g, tol.continuity, "coefficients of dg/dt + div h")
    _guard(report, "benamou_brenier", tol.benamou_brenier, lambda: _benamou_brenier(curve))
    _guard(report, "edge_sum", tol.edge_sum, lambda: _edge_sum(curve))
    if curve.f0 is not None:
        _guard(report, "w1_geodesic", tol.w1_geodesic, lambda: _w1_geodesic(curve, rng, w1_pairs))
    _guard(report, "degree_bound", 0.0, lambda: _degree(curve))
    _guard(report, "pq_ode", tol.pq_ode, lambda: _pq_ode(curve))
    _guard(report, "weights_divergence", tol.divergence,
           lambda: (curve.weights.divergence_residual(), curve.weights.kind))
    _guard(report, "kernel_algebra", tol.kernel, lambda: _kernel_algebra(curve, rng))

    try:
        const, fit, pq, n_paths, n_targets = _c_gamma(curve, rng, geodesic_limit)
        report.add("c_gamma_constant", const, tol.c_gamma_constant, f"{n_paths} extremal geodesics, 21 t")
        report.add("c_gamma_semi_extremal", fit, tol.c_gamma_fit, f"{n_targets} vertices")
        report.add("product_quotient", pq, tol.product_quotient, f"{n_targets} vertices")
    except W1PlusError as exc:
        report.add("c_gamma_constant", math.inf, tol.c_gamma_constant, str(exc), passed=False)

    _guard(report, "velocity_ode", tol.velocity_ode,
           lambda: (max(velocity_ode_residual(curve, Fraction(k, 12)) for k in range(1, 12)), "11 interior t"))
    ident, low, n_tree = _tree_flux(curve)
    report.add("tree_flux_divergence", ident, tol.tree_flux, f"{n_tree} tree edges")
    # a single spanning tree can carry a negative flux on some edge (the diamond
    # already does for every tree), so this is reported without gating the result
    report.add("tree_flux_positive", 0.0 if low > 0 else -low if low < 0 else 1.0, 0.0,
               f"min flux on 9 interior t = {low:.3e}", passed=low > 0, gating=False)

    if curve.scaling is not None and curve.support is not None:
        _scaling_checks(curve, report, tol)
        _guard(report, "binomial_mixture", tol.mixture, lambda: _mixture(curve))
        # the contraction formula weights geodesics uniformly, i.e. the path-counting m
        if len(curve.f0.support) == 1 and curve.weights.kind == "default":
            _guard(report, "contraction_oracle", tol.contraction, lambda: _contraction(curve))
        if stability:
            _guard(report, "orientation_stability", 0.0, lambda: _stability(curve, rng, stability))

    order = monotone_path_order(curve)
    if order is not None:
        _guard(report, "one_dimensional_bb", tol.benamou_brenier, lambda: _one_dimensional(curve, order))
        _guard(report, "entropy_convexity", tol.entropy_convexity, lambda: _entropy_convexity(curve))

    if criticality and curve.og.edges:
        _guard(report, "criticality", tol.criticality, lambda: _criticality(curve, rng, criticality))
    return report
