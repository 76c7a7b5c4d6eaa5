from __future__ import annotations

import numpy as np
import pytest

from mocdp.metrics import hausdorff
from mocdp.oracle import CurveSample, analytic_front, objective_curve, problem_front
from mocdp.pareto import dominates
from mocdp.problem import PRESETS, Polynomial, load_problem

MOC1 = Polynomial((-1.0, 1.0))
MOC2 = Polynomial((1.0, -1.0))
MOC4 = Polynomial((-0.125, -1.5))


def test_moc1_curve():
    c = objective_curve(MOC1, 1.0, 0.5, 101)
    d = c.deltas
    assert d[0] == -0.5 and d[-1] == 0.5 and d[50] == 0.0
    np.testing.assert_allclose(c.points[:, 0], d**2 / 2, atol=1e-15)
    np.testing.assert_array_equal(c.points[:, 1], d)


def test_moc4_curve():
    c = objective_curve(MOC4, 0.0, 0.5, 11)
    d = c.deltas
    np.testing.assert_allclose(c.points[:, 0], -0.75 * d**2 - d / 8, atol=1e-15)


def test_zero_sample_maps_to_origin():
    for entry in PRESETS.values():
        c = objective_curve(Polynomial(tuple(entry["P"])), entry["x0"], 0.5, 1001)
        assert tuple(c.points[500]) == (0.0, 0.0)


def test_moc1_front():
    front = analytic_front(MOC1, 1.0, 0.5, 1001)
    pts = front.points
    assert (0.125, -0.5) in front.as_tuples() and (0.0, 0.0) in front.as_tuples()
    assert (pts[:, 1] <= 0).all()


def test_moc2_front_endpoints():
    # J1 = -d/2 - d^2/2 strictly decreases on [-0.5, 0.5], so the whole curve is optimal
    front = analytic_front(MOC2, 1.5, 0.5, 1001)
    assert len(front) == 1001
    tuples = front.as_tuples()
    assert (-0.375, 0.5) in tuples
    assert (0.125, -0.5) in tuples


def test_guards():
    with pytest.raises(ValueError):
        analytic_front(MOC1, 1.0, 0.5, 999)
    with pytest.raises(ValueError):
        objective_curve(MOC1, 1.0, 0.5, 1)
    with pytest.raises(ValueError):
        CurveSample(np.array([0.0, 0.0]), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        problem_front(load_problem("moc1").with_cost_components(1))


def test_origin_membership_matches_brute_force():
    for name in PRESETS:
        prob = load_problem(name)
        curve = objective_curve(prob.poly, prob.x0[0], prob.T, 2001).points
        front = problem_front(prob, 2001).as_tuples()
        dominated = any(dominates(tuple(p), (0.0, 0.0)) for p in curve)
        assert ((0.0, 0.0) in front) == (not dominated)


def test_density_refinement():
    prob = load_problem("moc3")
    f1, f2, f4 = (problem_front(prob, n) for n in (2001, 4001, 8001))
    assert hausdorff(f2.points, f4.points) <= hausdorff(f1.points, f2.points)
