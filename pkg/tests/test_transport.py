import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from w1plus.errors import InfeasibleCoupling
from w1plus.graph_core import Measure
from w1plus.oracles import w1_flow, w1_lp
from w1plus.transport import Coupling, is_optimal, solve_transport, support_union, w1

from instances import path_graph, random_connected, random_measure


def test_dirac_pair():
    g = path_graph(2)
    value, pi = w1(g, Measure.dirac(g, 0), Measure.dirac(g, 2))
    assert value == 2 and pi.mass == {(0, 2): 1.0}
    assert support_union(g, Measure.dirac(g, 0), Measure.dirac(g, 2)).pairs == {(0, 2)}


def test_identical_measures():
    g = path_graph(3)
    f = Measure(g, {0: 0.3, 2: 0.7})
    value, pi = w1(g, f, f)
    assert value == 0 and pi.mass == {(0, 0): 0.3, (2, 2): 0.7}
    assert support_union(g, f, f).pairs == {(0, 0), (2, 2)}


def test_two_point_instance():
    g = path_graph(2)
    f0, f1 = Measure(g, {0: 0.5, 1: 0.5}), Measure(g, {1: 0.5, 2: 0.5})
    value, _ = w1(g, f0, f1)
    assert value == 1
    for method in ("probe", "residual"):
        assert support_union(g, f0, f1, method=method).pairs == {(0, 1), (0, 2), (1, 1), (1, 2)}
    assert is_optimal(g, f0, f1, Coupling(g, {(0, 1): 0.5, (1, 2): 0.5}))
    # every coupling of this instance costs 1
    assert is_optimal(g, f0, f1, Coupling(g, {(0, 2): 0.5, (1, 1): 0.5}))


def test_mismatched_mass_rejected():
    g = path_graph(2)
    f0 = Measure(g, {0: 1.0})
    f1 = Measure(g, {2: 0.5}, tol=1.0)
    with pytest.raises(InfeasibleCoupling):
        solve_transport(g, f0, f1)


def test_non_optimal_coupling_detected():
    g = path_graph(3)
    f0, f1 = Measure(g, {0: 0.5, 1: 0.5}), Measure(g, {0: 0.5, 1: 0.5})
    assert not is_optimal(g, f0, f1, Coupling(g, {(0, 1): 0.5, (1, 0): 0.5}))


def _instance(n, extra, s0, s1, seed):
    rng = np.random.default_rng(seed)
    g = random_connected(n, extra, rng)
    return g, random_measure(g, s0, rng), random_measure(g, s1, rng)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(3, 30), extra=st.integers(0, 10), s0=st.integers(1, 6), s1=st.integers(1, 6),
       seed=st.integers(0, 2**32 - 1))
def test_w1_matches_lp_and_flow(n, extra, s0, s1, seed):
    g, f0, f1 = _instance(n, extra, s0, s1, seed)
    value, pi = w1(g, f0, f1)
    assert pi.marginal_error(f0, f1) <= 1e-12
    assert abs(value - pi.cost) <= 1e-12
    assert math.isclose(value, w1_lp(g, f0, f1), abs_tol=1e-9)
    assert math.isclose(value, w1_flow(g, f0, f1), abs_tol=1e-9)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(3, 25), extra=st.integers(0, 8), s0=st.integers(1, 7), s1=st.integers(1, 7),
       seed=st.integers(0, 2**32 - 1))
def test_probe_and_residual_agree(n, extra, s0, s1, seed):
    g, f0, f1 = _instance(n, extra, s0, s1, seed)
    sol = solve_transport(g, f0, f1)
    a = support_union(g, f0, f1, solution=sol)
    b = support_union(g, f0, f1, method="residual", solution=sol)
    assert a.pairs == b.pairs


@settings(max_examples=40, deadline=None)
@given(n=st.integers(3, 25), extra=st.integers(0, 8), s0=st.integers(2, 7), s1=st.integers(2, 7),
       seed=st.integers(0, 2**32 - 1))
def test_cyclic_monotonicity(n, extra, s0, s1, seed):
    g, f0, f1 = _instance(n, extra, s0, s1, seed)
    pairs = sorted(support_union(g, f0, f1).pairs)
    rng = np.random.default_rng(seed)
    d = lambda x, y: int(g.bfs(x)[y])
    for _ in range(20):
        k = int(rng.integers(2, min(5, len(pairs)) + 1)) if len(pairs) >= 2 else 1
        cyc = [pairs[int(i)] for i in rng.choice(len(pairs), size=k, replace=False)]
        lhs = sum(d(x, y) for x, y in cyc)
        rhs = d(cyc[0][0], cyc[-1][1]) + sum(d(cyc[i + 1][0], cyc[i][1]) for i in range(k - 1))
        assert lhs <= rhs


def test_support_union_pairs_are_attainable():
    # each pair certified by a probe carries mass under some optimal plan: check by LP
    from scipy.optimize import linprog

    g, f0, f1 = _instance(15, 4, 5, 5, 11)
    sol = solve_transport(g, f0, f1)
    C = support_union(g, f0, f1, solution=sol)
    rows, cols = sol.rows, sol.cols
    n, m = len(rows), len(cols)
    A = np.zeros((n + m + 1, n * m))
    for i in range(n):
        A[i, i * m:(i + 1) * m] = 1
    for j in range(m):
        A[n + j, j::m] = 1
    A[-1] = sol.dist.ravel()
    b = np.concatenate([[f0[x] for x in rows], [f1[y] for y in cols], [sol.value]])
    for i, x in enumerate(rows):
        for j, y in enumerate(cols):
            c = np.zeros(n * m)
            c[i * m + j] = -1
            res = linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
            assert ((x, y) in C) == (-res.fun > 1e-9)
