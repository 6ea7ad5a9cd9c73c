import numpy as np
import pytest
import hypothesis.strategies as st
from hypothesis import given, settings

from conftest import fibered
from fiberot.errors import SizeCapExceeded, ValidationError
from fiberot.measure import dirac, explicit_metric, make_discrete_measure, mix, real_line
from fiberot.ot import (c_transform, fiber_cost, fiber_mk, fiber_potentials, ot_1d, ot_lp,
                        pair_dual_value, potentials_1d, transport_1d)
from fiberot.preprocessing import random_fiber

LINE = real_line()


def measure(points, weights=None):
    weights = np.ones(len(points)) if weights is None else weights
    return make_discrete_measure(points, weights, space=LINE)


@st.composite
def line_measures(draw, max_atoms=5):
    n = draw(st.integers(1, max_atoms))
    points = draw(st.lists(st.integers(-20, 20), min_size=n, max_size=n))
    weights = draw(st.lists(st.integers(1, 10), min_size=n, max_size=n))
    return measure(np.asarray(points, dtype=float)/4, weights)


def test_ot_1d_forced_monotone():
    cost, plan = ot_1d(measure([0, 1]), measure([2, 4]), 1)
    assert cost == pytest.approx(2.5, abs=1e-15)
    assert sorted(plan.triples()) == [(0, 0, 0.5), (1, 1, 0.5)]


def test_ot_1d_points():
    assert ot_1d(dirac(0.0, LINE), dirac(3.0, LINE), 2)[0] == 9.0


def test_ot_1d_partial_overlap():
    cost, plan = ot_1d(measure([0, 1], [0.25, 0.75]), measure([0, 1], [0.5, 0.5]), 1)
    assert cost == pytest.approx(0.25, abs=1e-15)
    plan.check([0.25, 0.75], [0.5, 0.5], LINE.cost_matrix([0, 1], [0, 1], 1))


def test_transport_1d_zero_weights():
    cost, plan, duals = transport_1d([0.0, 1.0], [1.0, 0.0], [0.0, 5.0, 2.0], [0.0, 0.0, 1.0], 2,
                                     duals=True)
    assert cost == 4.0
    assert plan.triples() == [(0, 2, 1.0)]
    cm = LINE.cost_matrix([0.0, 1.0], [0.0, 5.0, 2.0], 2)
    assert duals.violation(cm) <= 1e-12


def test_ot_lp_identical():
    mu = measure([0, 1, 3])
    cost, plan, duals = ot_lp(mu, mu, LINE, 2)
    assert cost == pytest.approx(0, abs=1e-12)
    assert np.allclose(plan.entries.toarray(), np.diag(mu.weights))
    assert duals.psi[0] == 0


def test_ot_lp_discrete_metric():
    space = explicit_metric(1 - np.eye(3))
    mu = make_discrete_measure([0, 1, 2], np.ones(3), space=space)
    assert ot_lp(mu, mu, space, 1)[0] == pytest.approx(0, abs=1e-12)
    nu = dirac(0, space)
    assert fiber_mk(mu, nu, space, 1) == pytest.approx(2/3, abs=1e-10)


def test_ot_lp_size_cap():
    mu = measure(np.arange(20))
    with pytest.raises(SizeCapExceeded) as err:
        ot_lp(mu, mu, LINE, 1, cap=100)
    assert err.value.exit_code == 3


def test_fiber_mk_points():
    for p in (1, 2, 3.5):
        assert fiber_mk(dirac(0.0, LINE), dirac(3.0, LINE), LINE, p) == pytest.approx(3)


def test_c_transform_examples(rng):
    support = np.sort(rng.normal(size=6))
    assert np.all(c_transform(np.zeros(6), support, support, LINE, 2) == 0)
    assert np.all(c_transform(np.full(6, 1.5), support, support, LINE, 2) == -1.5)
    with pytest.raises(ValidationError):
        c_transform(np.zeros(6), support, support, LINE, 2, lam=0)


def test_triple_transform(rng):
    x = rng.normal(size=7)
    y = rng.normal(size=5)
    phi = rng.normal(size=7)
    for p in (1, 2):
        once = c_transform(phi, x, y, LINE, p)
        twice = c_transform(once, y, x, LINE, p)
        thrice = c_transform(twice, x, y, LINE, p)
        assert np.allclose(once, thrice, rtol=0, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(line_measures(), line_measures(), st.sampled_from([1, 2, 3]))
def test_solvers_agree(mu, nu, p):
    exact = ot_1d(mu, nu, p)[0]
    cost, plan, duals = ot_lp(mu, nu, LINE, p)
    cm = LINE.cost_matrix(mu.points, nu.points, p)
    assert abs(exact - cost) <= 1e-10
    plan.check(mu.weights, nu.weights, cm)
    assert duals.violation(cm) <= 1e-9
    assert abs(pair_dual_value(mu, nu, duals) - cost) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(line_measures(), line_measures(), st.sampled_from([1, 2]))
def test_potentials_1d_strong_duality(mu, nu, p):
    duals = potentials_1d(mu, nu, p)
    cm = LINE.cost_matrix(mu.points, nu.points, p)
    assert duals.violation(cm) <= 1e-9
    assert abs(pair_dual_value(mu, nu, duals) - ot_1d(mu, nu, p)[0]) <= 1e-9


def test_transformed_potentials_keep_value(rng):
    space = explicit_metric(np.abs(np.subtract.outer(np.arange(5), np.arange(5))**0.5))
    for _ in range(10):
        mu = random_fiber(rng, space, 3)
        nu = random_fiber(rng, space, 4)
        cost, duals = fiber_potentials(mu, nu, space, 2)
        phi = c_transform(duals.psi, nu.points, mu.points, space, 2)
        value = -np.dot(mu.weights, phi) - np.dot(nu.weights, duals.psi)
        assert abs(value - cost) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(line_measures(), line_measures(), line_measures(), st.sampled_from([1, 2]))
def test_fiber_mk_metric_axioms(a, b, c, p):
    assert fiber_mk(a, b, LINE, p) == fiber_mk(b, a, LINE, p)
    assert fiber_mk(a, a, LINE, p) == 0
    assert fiber_mk(a, b, LINE, p) + fiber_mk(b, c, LINE, p) - fiber_mk(a, c, LINE, p) >= -1e-9


def test_convexity(rng, line):
    for _ in range(20):
        mus = [fibered([rng.normal(size=3)]) for _ in range(2)]
        nus = [fibered([rng.normal(size=2)]) for _ in range(2)]
        lam = rng.random()
        left = fiber_cost(mix(mus, [lam, 1-lam]).fibers[0], mix(nus, [lam, 1-lam]).fibers[0],
                          line, 2)
        right = (lam*fiber_cost(mus[0].fibers[0], nus[0].fibers[0], line, 2)
                 + (1-lam)*fiber_cost(mus[1].fibers[0], nus[1].fibers[0], line, 2))
        assert left <= right + 1e-9
