from __future__ import annotations

import numpy as np
import pytest

from mocdp import viability as vb
from mocdp.pareto import ParetoFront
from mocdp.solver import ValueFunction, plan_grid


@pytest.fixture(scope="module")
def tiny():
    return vb.tiny_instance()


@pytest.fixture(scope="module")
def report(tiny):
    return vb.kernel_check(*tiny)


def test_floor_examples(tiny):
    prob, plan, _ = tiny
    m_bar = vb.default_m_bar(prob, plan)
    j_T = round((plan.T + plan.h) / plan.h)
    assert plan.time(j_T) == plan.T
    assert vb.floor_coord(plan, m_bar, j_T) == -1
    j_0 = 1
    expected = -(plan.T * m_bar + plan.h) / plan.h
    assert vb.floor_coord(plan, m_bar, j_0) == int(np.ceil(expected))


def test_default_m_bar_is_minimal(tiny):
    prob, plan, _ = tiny
    m_bar = vb.default_m_bar(prob, plan)
    assert m_bar == pytest.approx(4.625)
    with pytest.raises(vb.ViabilityError):
        vb.build_constraint_set(prob, plan, m_bar * 0.99, tiny[2])


def test_constraint_set_slices(tiny):
    prob, plan, window = tiny
    m_bar = vb.default_m_bar(prob, plan)
    H = vb.build_constraint_set(prob, plan, m_bar, window)
    assert not H.clipped
    last = plan.J - 1
    fl = vb.floor_coord(plan, m_bar, last)
    assert vb.KernelPoint(last, (16,), (fl, fl)) in H
    assert vb.KernelPoint(last, (16,), (fl - 1, fl)) not in H
    tight = vb.Window(window.state, ((-1.0, 1.0),) * 2)
    assert vb.build_constraint_set(prob, plan, m_bar, tight).clipped


def test_constraint_set_needs_strict_plan(tiny):
    prob, _, window = tiny
    with pytest.raises(vb.ViabilityError):
        vb.build_constraint_set(prob, plan_grid(prob, 2), 10.0, window)


def test_gamma_terminal_contains_point(tiny):
    prob, plan, _ = tiny
    pt = vb.KernelPoint(plan.J - 2, (20,), (3, -4))
    image = vb.gamma_transition(prob, plan, pt)
    assert pt in image


def test_gamma_single_control_is_product(tiny):
    prob, plan, _ = tiny
    one = prob.with_controls([1.0])
    plan1 = plan_grid(one, 2, "strict")
    image = vb.gamma_transition(one, plan1, vb.KernelPoint(0, (16,), (0, 0)))
    layers = {p.j for p in image.points()}
    states = {p.x for p in image.points()}
    costs = {p.z for p in image.points()}
    assert layers == set(range(plan1.layer_advance, plan1.layer_advance + 5))
    assert len(states) == 5  # K_f = 0 gives alpha_f = 2h
    assert len(image) == len(layers) * len(states) * len(costs)


def test_kernel_identity_transition_converges_at_once(tiny):
    prob, plan, window = tiny
    m_bar = vb.default_m_bar(prob, plan)
    H = vb.build_constraint_set(prob, plan, m_bar, window)
    # every layer treated as terminal: each triple lies in its own image
    frozen = plan.__class__(**{**plan.__dict__, "terminal_threshold": -1.0, "j_star": -1})
    run = vb.kernel_fixpoint(prob, H, frozen)
    assert run.iterations == 1
    assert np.array_equal(run.fixpoint.mask, H.mask)


def test_kernel_of_empty_set(tiny):
    prob, plan, window = tiny
    H = vb.build_constraint_set(prob, plan, vb.default_m_bar(prob, plan), window)
    empty = H.like(np.zeros_like(H.mask))
    run = vb.kernel_fixpoint(prob, empty, plan)
    assert len(run.fixpoint) == 0


def _grid_and_vf(tiny, fronts):
    prob, plan, window = tiny
    grid = vb.make_grid(prob, plan, window)
    vf = ValueFunction(plan.h, [dict() for _ in range(plan.J)])
    vf.layers[0][(16,)] = ParetoFront(np.array(fronts))
    return grid, vf


def test_epigraph_orthant(tiny):
    grid, vf = _grid_and_vf(tiny, [(0, 0)])
    epi = vb.epigraph(vf, grid)
    assert vb.KernelPoint(0, (16,), (0, 0)) in epi
    assert vb.KernelPoint(0, (16,), (5, 1)) in epi
    assert vb.KernelPoint(0, (16,), (-1, 3)) not in epi
    assert vb.KernelPoint(1, (16,), (5, 5)) not in epi


def test_epigraph_antichain_gap(tiny):
    grid, vf = _grid_and_vf(tiny, [(0, 2), (2, 0)])
    epi = vb.epigraph(vf, grid)
    assert vb.KernelPoint(0, (16,), (1, 1)) not in epi
    assert vb.KernelPoint(0, (16,), (2, 2)) in epi


def test_tiny_cross_check(report):
    assert report.interior_points > 0 and report.initial_interior
    assert report.kernel_interior == report.epigraph_interior > 0
    assert report.symmetric_difference == 0
    assert not any(report.iterate_mismatches)
    assert report.kernel_monotone and report.epigraph_monotone
    assert report.sweep_matches_iteration
    assert report.terminal_union_misses == 0
    assert report.passed


def test_cross_check_detects_a_corrupted_epigraph(tiny):
    prob, plan, window = tiny
    m_bar = vb.default_m_bar(prob, plan)
    grid = vb.make_grid(prob, plan, window)
    H = vb.build_constraint_set(prob, plan, m_bar, window)
    run = vb.kernel_fixpoint(prob, H, plan)
    interior = vb.interior_mask(prob, grid)
    vf = vb.windowed_solve(prob, grid, m_bar)
    x0 = (16,)
    vf.layers[0][x0] = vf.layers[0][x0].shifted((1, 0))
    epi = vb.epigraph(vf, grid).mask
    assert ((epi ^ run.fixpoint.mask) & interior).sum() > 0


def test_literal_tiny_instance_is_trivial():
    prob, plan, window = vb.tiny_instance(T=0.25, state_radius=0.5, cost_box=(-0.75, 0.75))
    assert plan.j_star == -1
    rep = vb.kernel_check(prob, plan, window)
    assert rep.passed and rep.iterations == 1


def test_small_window_excludes_boundary():
    prob, plan, window = vb.tiny_instance(state_radius=0.5, cost_box=(-0.75, 0.75))
    rep = vb.kernel_check(prob, plan, window)
    assert rep.clipped and not rep.initial_interior
    assert rep.passed
