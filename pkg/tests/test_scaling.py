import math

import numpy as np
import pytest
from gmpy2 import mpq
from hypothesis import given, settings, strategies as st

from w1plus.errors import EmptyFace, NoConvergence, SupportViolation
from w1plus.graph_core import Measure
from w1plus.oracles import golden_face_oracle
from w1plus.orientation import orient
from w1plus.scaling import J_value, cost_kernel, minimize_J
from w1plus.transport import Coupling, support_union
from w1plus.weights import default_weights

from instances import path_graph, random_connected, random_measure, suite


def _setup(g, f0, f1):
    og = orient(g, support_union(g, f0, f1).pairs)
    w = default_weights(og)
    return cost_kernel(w, w.order, f0, f1)


def two_point():
    g = path_graph(2)
    return g, Measure(g, {0: 0.5, 1: 0.5}), Measure(g, {1: 0.5, 2: 0.5})


def test_dirac_face():
    g = path_graph(2)
    f0, f1 = Measure.dirac(g, 0), Measure.dirac(g, 2)
    ck = _setup(g, f0, f1)
    assert ck.pairs == [(0, 2)] and ck.c == [mpq(1, 2)]
    sr = minimize_J(ck, f0, f1)
    assert sr.coupling.mass == {(0, 2): 1.0} and sr.iterations == 0
    assert sr.a[0] * sr.b[2] == 2.0
    # single-pair face: J = log(1/c) - 1
    assert math.isclose(sr.J, math.log(2) - 1, rel_tol=1e-15)


def test_two_point_costs_and_coupling():
    g, f0, f1 = two_point()
    ck = _setup(g, f0, f1)
    assert {p: ck.value(*p) for p in ck.pairs} == {(0, 1): 1, (1, 1): 1, (0, 2): mpq(1, 2), (1, 2): 1}
    sr = minimize_J(ck, f0, f1)
    p = 1 - math.sqrt(2) / 2
    q = math.sqrt(2) / 2 - 0.5
    pi = sr.coupling.mass
    assert abs(pi[(0, 1)] - p) <= 1e-12 and abs(pi[(1, 2)] - p) <= 1e-12
    assert abs(pi[(0, 2)] - q) <= 1e-12 and abs(pi[(1, 1)] - q) <= 1e-12
    ref, _ = golden_face_oracle(ck.pairs, ck.log_c, f0, f1)
    assert abs(ref[ck.pairs.index((0, 1))] - p) <= 1e-10


def test_identical_measures_give_diagonal():
    g = path_graph(4)
    f = Measure(g, {0: 0.2, 2: 0.5, 4: 0.3})
    sr = minimize_J(_setup(g, f, f), f, f)
    assert sr.coupling.mass == {(0, 0): 0.2, (2, 2): 0.5, (4, 4): 0.3}


def test_J_minimal_against_random_feasible_couplings():
    g, f0, f1 = two_point()
    ck = _setup(g, f0, f1)
    sr = minimize_J(ck, f0, f1)
    best = J_value(sr.coupling, ck)
    for p in np.random.default_rng(0).uniform(0, 0.5, size=20):
        pi = Coupling(g, {(0, 1): p, (1, 2): p, (0, 2): 0.5 - p, (1, 1): 0.5 - p})
        assert best <= J_value(pi, ck) + 1e-15


def test_J_decreases_moving_inward_from_the_boundary():
    g, f0, f1 = two_point()
    ck = _setup(g, f0, f1)

    def J(p):
        return J_value(Coupling(g, {(0, 1): p, (1, 2): p, (0, 2): 0.5 - p, (1, 1): 0.5 - p}), ck)

    for eps in (1e-3, 1e-6, 1e-9):
        assert J(eps) < J(0.0)
        assert J(0.5 - eps) < J(0.5)
    # the slope blows up at the boundary
    slopes = [(J(2 * e) - J(e)) / e for e in (1e-3, 1e-6, 1e-9)]
    assert slopes[0] > slopes[1] > slopes[2] and slopes[2] < -30


def test_J_value_rejects_mass_off_the_face():
    g, f0, f1 = two_point()
    ck = _setup(g, f0, f1)
    with pytest.raises(SupportViolation):
        J_value(Coupling(g, {(1, 0): 1.0}), ck)


def test_empty_face():
    g = path_graph(2)
    og = orient(g, [(0, 2)])
    w = default_weights(og)
    with pytest.raises(EmptyFace):
        cost_kernel(w, w.order, Measure.dirac(g, 2), Measure.dirac(g, 0))


def test_no_convergence_reports_residual():
    g, f0, f1 = two_point()
    ck = _setup(g, f0, f1)
    with pytest.raises(NoConvergence) as info:
        minimize_J(ck, f0, f1, max_iter=1)
    assert info.value.exit_code == 2 and info.value.residual > 0 and info.value.iterations == 1
    with pytest.raises(ValueError):
        minimize_J(ck, f0, f1, tol=0)


@pytest.mark.parametrize("seed", range(3))
def test_dual_is_monotone_and_meets_J(seed):
    for g, f0, f1 in suite(12, seed, max_n=40):
        ck = _setup(g, f0, f1)
        sr = minimize_J(ck, f0, f1, record=True)
        h = np.array(sr.dual_history)
        if len(h) < 2:
            continue
        assert np.all(np.diff(h) >= -1e-12 * np.maximum(1.0, np.abs(h[1:])))
        assert abs(h[-1] - sr.J) <= 1e-9 * max(1.0, abs(sr.J))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(3, 30), extra=st.integers(0, 8), s0=st.integers(1, 8), s1=st.integers(1, 8),
       seed=st.integers(0, 2**32 - 1))
def test_product_form_and_marginals(n, extra, s0, s1, seed):
    rng = np.random.default_rng(seed)
    g = random_connected(n, extra, rng)
    f0, f1 = random_measure(g, s0, rng), random_measure(g, s1, rng)
    ck = _setup(g, f0, f1)
    sr = minimize_J(ck, f0, f1)
    assert sr.marginal_error <= 1e-12
    assert sr.coupling.marginal_error(f0, f1) <= 1e-12
    for (x, y), m in sr.coupling.mass.items():
        assert abs(m / float(sr.product_mass(x, y)) - 1) <= 1e-12
    assert set(sr.coupling.mass) == set(ck.pairs)
