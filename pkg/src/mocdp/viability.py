"""Finite discrete viability kernels and the kernel/epigraph cross-check.

Triples ``(j, x, z)`` live on the lattice: ``j`` is a time layer, ``x`` and
``z`` are integer state and cost coordinates.  The constraint set keeps the
triples whose cost lies above the layer's floor ``-(T - t) Mbar_L - h``, and
the kernel iteration drops every triple whose transition image misses the
current set.  Everything is truncated to a finite :class:`Window`; only
triples whose whole transition image is resolved inside the window
("interior" triples) are compared with the dynamic-programming epigraph.

Transition images are unions of boxes, so membership queries reduce to box
sums over a prefix-sum table.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .lattice import coord_range, snap_coord
from .pareto import ParetoFront, check_external_stability
from .problem import ControlProblem, load_problem
from .solver import (
    STRICT_LAYER_SPAN,
    GridPlan,
    SolverError,
    ValueFunction,
    _point_front,
    check_key_relation,
    plan_grid,
    velocity_cost_pairs,
)

log = logging.getLogger(__name__)

Coords = tuple[int, ...]


class ViabilityError(ValueError):
    """Parameters break the hypotheses of the kernel construction."""


@dataclass(frozen=True, order=True)
class KernelPoint:
    j: int
    x: Coords
    z: Coords


@dataclass(frozen=True)
class Window:
    """Real-valued truncation boxes for states and costs."""

    state: tuple[tuple[float, float], ...]
    cost: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        for lo, hi in (*self.state, *self.cost):
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise ViabilityError(f"bad window interval [{lo}, {hi}]")

    def axes(self, h: float) -> tuple[list[range], list[range]]:
        def grid(box):
            return [coord_range((lo + hi) / 2, (hi - lo) / 2, h) for lo, hi in box]

        return grid(self.state), grid(self.cost)


@dataclass(frozen=True)
class Box:
    """Product set ``layers x states x (z + shift)`` of a transition image."""

    layers: range
    states: tuple[range, ...]
    shift: tuple[range, ...]


@dataclass(eq=False)
class KernelSet:
    """Dense boolean set of lattice triples.

    ``mask[a, b..., c...]`` stands for the triple whose coordinates are
    ``origin`` plus the index.  Layers always start at 0.
    """

    h: float
    n: int
    origin: Coords
    mask: np.ndarray
    clipped: bool = False

    def __len__(self) -> int:
        return int(self.mask.sum())

    def _index(self, pt: KernelPoint) -> tuple[int, ...] | None:
        coords = (pt.j, *pt.x, *pt.z)
        idx = tuple(c - o for c, o in zip(coords, self.origin))
        if len(coords) != self.mask.ndim or any(not 0 <= i < s for i, s in zip(idx, self.mask.shape)):
            return None
        return idx

    def __contains__(self, pt: KernelPoint) -> bool:
        idx = self._index(pt)
        return idx is not None and bool(self.mask[idx])

    def points(self) -> Iterator[KernelPoint]:
        """Members in lexicographic order."""
        for idx in np.argwhere(self.mask):
            c = tuple(int(i) + o for i, o in zip(idx, self.origin))
            yield KernelPoint(c[0], c[1 : 1 + self.n], c[1 + self.n :])

    def as_set(self) -> frozenset[KernelPoint]:
        return frozenset(self.points())

    def like(self, mask: np.ndarray) -> "KernelSet":
        return KernelSet(self.h, self.n, self.origin, mask, self.clipped)


@dataclass(frozen=True)
class KernelGrid:
    """Index bookkeeping shared by every set on one window."""

    plan: GridPlan
    n: int
    p: int
    states: tuple[range, ...]
    costs: tuple[range, ...]

    @property
    def origin(self) -> Coords:
        return (0, *(r.start for r in self.states), *(r.start for r in self.costs))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.plan.J, *(len(r) for r in self.states), *(len(r) for r in self.costs))

    def state_points(self) -> Iterator[Coords]:
        return itertools.product(*self.states)

    def contains_state(self, x: Sequence[int]) -> bool:
        return all(c in r for c, r in zip(x, self.states))


def make_grid(prob: ControlProblem, plan: GridPlan, window: Window) -> KernelGrid:
    if len(window.state) != prob.n or len(window.cost) != prob.p:
        raise ViabilityError(
            f"window has {len(window.state)} state / {len(window.cost)} cost axes, "
            f"problem needs {prob.n} / {prob.p}"
        )
    states, costs = window.axes(plan.h)
    if any(len(r) == 0 for r in (*states, *costs)):
        raise ViabilityError("window contains no lattice point on some axis")
    return KernelGrid(plan, prob.n, prob.p, tuple(states), tuple(costs))


def default_m_bar(prob: ControlProblem, plan: GridPlan) -> float:
    """Smallest float ``Mbar_L`` satisfying the key relation."""
    gap = plan.eps - 2 * plan.h
    m_bar = max(prob.M_L, (plan.eps * prob.M_L + plan.alpha_cost) / gap)
    while not check_key_relation(plan.eps, plan.h, prob.M_L, m_bar, plan.alpha_cost):
        m_bar = math.nextafter(m_bar, math.inf)
    return m_bar


def floor_coord(plan: GridPlan, m_bar: float, j: int) -> int:
    """Least cost coordinate allowed at layer ``j``: ``z >= -(T - t_j) Mbar - h``."""
    h = Fraction(plan.h)
    t = Fraction(plan.time(j))
    bound = -(Fraction(plan.T) - t) * Fraction(m_bar) - h
    return math.ceil(bound / h)


def sentinel_front(p: int, plan: GridPlan, m_bar: float, j: int) -> ParetoFront:
    """Initial front ``{floor(j) 1}``: its epigraph is the constraint slice."""
    return ParetoFront(np.full((1, p), floor_coord(plan, m_bar, j), dtype=np.int64), _trusted=True)


def _require_strict(plan: GridPlan) -> None:
    if plan.mode != "strict":
        raise ViabilityError("the kernel construction needs a strict-mode plan")


def build_constraint_set(
    prob: ControlProblem, plan: GridPlan, m_bar: float, window: Window
) -> KernelSet:
    """Constraint set ``H_h`` truncated to ``window``.

    Raises :class:`ViabilityError` when the key relation fails for ``m_bar``.
    ``clipped`` is set when some layer's floor lies below the cost window.
    """
    _require_strict(plan)
    if not check_key_relation(plan.eps, plan.h, prob.M_L, m_bar, plan.alpha_cost):
        raise ViabilityError(
            f"key relation eps*M_L + alpha <= (eps - 2h)*Mbar_L fails for Mbar_L={m_bar}"
        )
    grid = make_grid(prob, plan, window)
    mask = np.zeros(grid.shape, dtype=bool)
    clipped = False
    lows = [r.start for r in grid.costs]
    for j in range(plan.J):
        fl = floor_coord(plan, m_bar, j)
        clipped |= any(fl < lo for lo in lows)
        ok = [np.arange(r.start, r.stop) >= fl for r in grid.costs]
        slab = ok[0]
        for axis_ok in ok[1:]:
            slab = np.logical_and.outer(slab, axis_ok)
        mask[j] = slab  # broadcast over the state axes
    if clipped:
        log.warning("cost window cuts the constraint floor; the set is clipped")
    return KernelSet(plan.h, prob.n, grid.origin, mask, clipped)


def gamma_boxes(prob: ControlProblem, plan: GridPlan, j: int, x: Coords) -> list[Box]:
    """Transition image of ``(j, x, z)`` as boxes, with costs relative to ``z``.

    Non-terminal layers reach ``[t + eps - 2h, t + eps + 2h]`` with a state
    ball of radius ``alpha_f`` and a cost ball of radius ``alpha_L`` around
    ``(x + eps f, z - eps l)``.  Terminal layers reach ``[t, t + eps + 2h]``
    (cut at the last layer) and add the self ball of radius ``2h``; the hull
    of the two pieces is replaced by their union.
    """
    _require_strict(plan)
    h, eps = plan.h, plan.eps
    terminal = plan.is_terminal(j)
    if terminal:
        layers = range(j, min(j + plan.layer_advance + STRICT_LAYER_SPAN, plan.J))
    else:
        layers = plan.target_layers(j)
        if layers[-1] > plan.J - 1:
            raise SolverError(f"successor layer {layers[-1]} exceeds J-1={plan.J - 1}")
    xr = [k * h for k in x]
    boxes = []
    for f, l in velocity_cost_pairs(prob, plan, xr):
        states = tuple(coord_range(xi + eps * fi, plan.alpha_state, h) for xi, fi in zip(xr, f))
        shift = tuple(coord_range(-eps * li, plan.alpha_cost, h) for li in l)
        boxes.append(Box(layers, states, shift))
    if terminal:
        self_ball = coord_range(0.0, 2 * h, h)
        boxes.append(
            Box(
                layers,
                tuple(range(k + self_ball.start, k + self_ball.stop) for k in x),
                (self_ball,) * prob.p,
            )
        )
    return boxes


def gamma_transition(prob: ControlProblem, plan: GridPlan, pt: KernelPoint) -> KernelSet:
    """The finite set ``Gamma(j, x, z)`` as a :class:`KernelSet`."""
    boxes = gamma_boxes(prob, plan, pt.j, tuple(pt.x))
    n, p = prob.n, prob.p
    lo = [0] + [min(b.states[a].start for b in boxes) for a in range(n)]
    lo += [pt.z[a] + min(b.shift[a].start for b in boxes) for a in range(p)]
    hi = [max(b.layers.stop for b in boxes)]
    hi += [max(b.states[a].stop for b in boxes) for a in range(n)]
    hi += [pt.z[a] + max(b.shift[a].stop for b in boxes) for a in range(p)]
    mask = np.zeros([u - v for u, v in zip(hi, lo)], dtype=bool)
    for b in boxes:
        sl = [slice(b.layers.start, b.layers.stop)]
        sl += [slice(r.start - lo[1 + a], r.stop - lo[1 + a]) for a, r in enumerate(b.states)]
        sl += [
            slice(pt.z[a] + r.start - lo[1 + n + a], pt.z[a] + r.stop - lo[1 + n + a])
            for a, r in enumerate(b.shift)
        ]
        mask[tuple(sl)] = True
    return KernelSet(plan.h, n, tuple(lo), mask)


class _BoxCounter:
    """Box sums over a boolean array through a padded prefix-sum table."""

    def __init__(self, grid: KernelGrid, mask: np.ndarray) -> None:
        self.grid = grid
        table = mask.astype(np.int32)
        for axis in range(table.ndim):
            table = np.cumsum(table, axis=axis, dtype=np.int32)
        self.table = np.pad(table, [(1, 0)] * table.ndim)

    def counts(self, box: Box) -> np.ndarray:
        """For every window cost ``z``, the count of members in ``box`` at ``z``.

        Parts of the box outside the window count as empty.
        """
        g = self.grid
        bounds = [_clip(box.layers.start, box.layers.stop, g.plan.J)]
        for r, axis in zip(box.states, g.states):
            bounds.append(_clip(r.start - axis.start, r.stop - axis.start, len(axis)))
        for r, axis in zip(box.shift, g.costs):
            idx = np.arange(len(axis))
            lo = np.clip(idx + r.start, 0, len(axis))
            hi = np.maximum(np.clip(idx + r.stop, 0, len(axis)), lo)
            bounds.append((lo, hi))
        fixed = 1 + g.n
        total = np.zeros([len(a) for a in g.costs], dtype=np.int64)
        for corner in itertools.product((0, 1), repeat=len(bounds)):
            sign = -1 if (len(bounds) - sum(corner)) % 2 else 1
            head = tuple(bounds[a][corner[a]] for a in range(fixed))
            tail = np.ix_(*(bounds[a][corner[a]] for a in range(fixed, len(bounds))))
            total += sign * self.table[head][tail]
        return total


def _clip(start: int, stop: int, size: int) -> tuple[int, int]:
    lo = min(max(start, 0), size)
    return lo, max(min(max(stop, 0), size), lo)


def _box_inside(grid: KernelGrid, box: Box) -> np.ndarray:
    """Cost-window mask of ``z`` whose shifted box lies inside the window."""
    if box.layers.start < 0 or box.layers.stop > grid.plan.J:
        return np.zeros([len(a) for a in grid.costs], dtype=bool)
    for r, axis in zip(box.states, grid.states):
        if r.start < axis.start or r.stop > axis.stop:
            return np.zeros([len(a) for a in grid.costs], dtype=bool)
    ok = [
        (np.arange(len(axis)) + r.start >= 0) & (np.arange(len(axis)) + r.stop <= len(axis))
        for r, axis in zip(box.shift, grid.costs)
    ]
    return _outer_all(ok)


def _outer_all(flags: list[np.ndarray]) -> np.ndarray:
    out = flags[0]
    for f in flags[1:]:
        out = np.logical_and.outer(out, f)
    return out


@dataclass
class KernelRun:
    fixpoint: KernelSet
    iterations: int
    iterates: list[KernelSet]
    monotone: bool
    terminal_union_misses: int


def _hits(prob: ControlProblem, grid: KernelGrid, current: np.ndarray) -> tuple[np.ndarray, int]:
    counter = _BoxCounter(grid, current)
    hit = np.zeros(grid.shape, dtype=bool)
    union_misses = 0
    plan = grid.plan
    for j in range(plan.J):
        for ix, x in enumerate(grid.state_points()):
            idx = (j, *np.unravel_index(ix, grid.shape[1 : 1 + grid.n]))
            acc = np.zeros(grid.shape[1 + grid.n :], dtype=bool)
            for box in gamma_boxes(prob, plan, j, x):
                acc |= counter.counts(box) > 0
            if plan.is_terminal(j):
                union_misses += int((current[idx] & ~acc).sum())
            hit[idx] = acc
    return hit, union_misses


def kernel_fixpoint(prob: ControlProblem, H: KernelSet, plan: GridPlan) -> KernelRun:
    """Iterate ``A^{k+1} = {a in A^k : Gamma(a) meets A^k}`` to its fixpoint.

    ``monotone`` records whether ``A^{k+1}`` stayed inside ``A^k`` at every
    step and ``terminal_union_misses`` counts terminal members whose image,
    realised as a union instead of a hull, missed the current set.
    """
    _require_strict(plan)
    n, p = prob.n, prob.p
    shape = H.mask.shape
    states = tuple(range(H.origin[1 + a], H.origin[1 + a] + shape[1 + a]) for a in range(n))
    costs = tuple(range(H.origin[1 + n + a], H.origin[1 + n + a] + shape[1 + n + a]) for a in range(p))
    grid = KernelGrid(plan, n, p, states, costs)
    current = H.mask.copy()
    iterates = [H]
    monotone = True
    misses = 0
    while True:
        if not current.any():
            break
        hit, union_misses = _hits(prob, grid, current)
        misses += union_misses
        nxt = current & hit
        monotone &= not bool((nxt & ~current).any())
        if np.array_equal(nxt, current):
            break
        current = nxt
        iterates.append(H.like(current.copy()))
    return KernelRun(iterates[-1], len(iterates), iterates, monotone, misses)


def interior_mask(prob: ControlProblem, grid: KernelGrid) -> np.ndarray:
    """Triples whose membership cannot be changed by the truncation.

    Terminal triples always qualify: their image contains themselves.  A
    non-terminal triple qualifies when its whole image lies in the window
    and consists of qualifying triples.
    """
    plan = grid.plan
    exact = np.zeros(grid.shape, dtype=bool)
    for j in range(plan.J - 1, -1, -1):
        if plan.is_terminal(j):
            exact[j] = True
            continue
        counter = _BoxCounter(grid, ~exact)
        for ix, x in enumerate(grid.state_points()):
            idx = (j, *np.unravel_index(ix, grid.shape[1 : 1 + grid.n]))
            ok = np.ones(grid.shape[1 + grid.n :], dtype=bool)
            for box in gamma_boxes(prob, plan, j, x):
                ok &= _box_inside(grid, box) & (counter.counts(box) == 0)
            exact[idx] = ok
    return exact


def windowed_domains(prob: ControlProblem, grid: KernelGrid) -> list[list[Coords]]:
    """Window states whose value is computable without leaving the window."""
    plan = grid.plan
    defined: list[set[Coords]] = [set() for _ in range(plan.J)]
    for j in range(plan.J - 1, -1, -1):
        for x in grid.state_points():
            if plan.is_terminal(j):
                defined[j].add(x)
                continue
            ok = True
            for box in gamma_boxes(prob, plan, j, x):
                for jp in box.layers:
                    if not all(xp in defined[jp] for xp in itertools.product(*box.states)):
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                defined[j].add(x)
    return [sorted(s) for s in defined]


def value_iterates(
    prob: ControlProblem, grid: KernelGrid, m_bar: float, *, limit: int = 1000
) -> list[ValueFunction]:
    """Jacobi iterates ``V^0, V^1, ...`` from the sentinel, up to the fixpoint.

    Terminal layers keep the sentinel; non-terminal fronts are recomputed
    from the previous iterate on every sweep.
    """
    plan = grid.plan
    domains = windowed_domains(prob, grid)
    first = ValueFunction(plan.h, [dict() for _ in range(plan.J)])
    for j in range(plan.J):
        front = sentinel_front(prob.p, plan, m_bar, j)
        first.layers[j] = {x: front for x in domains[j]}
    out = [first]
    for _ in range(limit):
        prev = out[-1]
        nxt = ValueFunction(plan.h, [dict(layer) for layer in prev.layers])
        for j in range(plan.J):
            if plan.is_terminal(j):
                continue
            for x in domains[j]:
                nxt.layers[j][x] = _point_front(prob, plan, prev, j, x)
        if nxt == prev:
            return out
        out.append(nxt)
    raise SolverError(f"value iteration did not settle within {limit} sweeps")


def windowed_solve(prob: ControlProblem, grid: KernelGrid, m_bar: float) -> ValueFunction:
    """One backward sweep over the windowed domains with sentinel terminals."""
    plan = grid.plan
    domains = windowed_domains(prob, grid)
    value = ValueFunction(plan.h, [dict() for _ in range(plan.J)])
    for j in range(plan.J - 1, -1, -1):
        if plan.is_terminal(j):
            front = sentinel_front(prob.p, plan, m_bar, j)
            value.layers[j] = {x: front for x in domains[j]}
            continue
        value.layers[j] = {x: _point_front(prob, plan, value, j, x) for x in domains[j]}
    return value


def epigraph(vf: ValueFunction, grid: KernelGrid) -> KernelSet:
    """Window triples ``(j, x, z)`` with ``z`` in ``V(j, x) + R^p_+``."""
    mask = np.zeros(grid.shape, dtype=bool)
    axes = [np.arange(r.start, r.stop) for r in grid.costs]
    for j, layer in enumerate(vf.layers):
        for x, front in layer.items():
            if not grid.contains_state(x):
                continue
            idx = (j, *(c - r.start for c, r in zip(x, grid.states)))
            slab = np.zeros([len(a) for a in axes], dtype=bool)
            for v in front.points:
                slab |= _outer_all([a >= int(c) for a, c in zip(axes, v)])
            mask[idx] = slab
    return KernelSet(vf.h, grid.n, grid.origin, mask)


def _front_is_interior(
    grid: KernelGrid, interior: np.ndarray, vf: ValueFunction, x0: Sequence[float]
) -> bool:
    """Whether every point of the front at ``(0, x0)`` is an interior triple."""
    x = tuple(snap_coord(c, grid.plan.h) for c in x0)
    front = vf.lookup(0, x)
    if front is None or not grid.contains_state(x):
        return False
    head = (0, *(c - r.start for c, r in zip(x, grid.states)))
    for z in front.as_tuples():
        if not all(c in r for c, r in zip(z, grid.costs)):
            return False
        if not interior[head + tuple(c - r.start for c, r in zip(z, grid.costs))]:
            return False
    return True


@dataclass
class KernelReport:
    level: int
    T: float
    m_bar: float
    iterations: int
    window_points: int
    interior_points: int
    kernel_interior: int
    epigraph_interior: int
    symmetric_difference: int
    iterate_mismatches: list[int]
    kernel_monotone: bool
    epigraph_monotone: bool
    sweep_matches_iteration: bool
    terminal_union_misses: int
    clipped: bool
    initial_interior: bool
    hull_note: str = field(
        default="terminal hull realised as a union of lattice balls; "
        "terminal_union_misses counts the triples where this could differ"
    )

    @property
    def passed(self) -> bool:
        return (
            self.symmetric_difference == 0
            and not any(self.iterate_mismatches)
            and self.kernel_monotone
            and self.epigraph_monotone
            and self.sweep_matches_iteration
            and self.terminal_union_misses == 0
        )

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["passed"] = self.passed
        return out


TINY_PROBLEM = "moc1"
TINY_HORIZON = 0.5
TINY_LEVEL = 2
TINY_STATE_RADIUS = 1.0
TINY_COST_BOX = (-3.5, 1.0)


def tiny_instance(
    problem: str | ControlProblem = TINY_PROBLEM,
    *,
    T: float = TINY_HORIZON,
    level: int = TINY_LEVEL,
    state_radius: float = TINY_STATE_RADIUS,
    cost_box: tuple[float, float] = TINY_COST_BOX,
) -> tuple[ControlProblem, GridPlan, Window]:
    prob = problem if isinstance(problem, ControlProblem) else load_problem(problem)
    prob = prob.with_horizon(T)
    plan = plan_grid(prob, level, "strict")
    window = Window(
        tuple((c - state_radius, c + state_radius) for c in prob.x0),
        (tuple(cost_box),) * prob.p,
    )
    return prob, plan, window


def kernel_check(
    prob: ControlProblem, plan: GridPlan, window: Window, m_bar: float | None = None
) -> KernelReport:
    """Compare the kernel fixpoint with the sentinel-initialised epigraph.

    Agreement is required on interior triples, at every iterate as well as
    at the fixpoint.
    """
    _require_strict(plan)
    m_bar = default_m_bar(prob, plan) if m_bar is None else m_bar
    H = build_constraint_set(prob, plan, m_bar, window)
    grid = make_grid(prob, plan, window)
    run = kernel_fixpoint(prob, H, plan)
    interior = interior_mask(prob, grid)
    iterates = value_iterates(prob, grid, m_bar)

    epis = [epigraph(v, grid).mask for v in iterates]
    # kernel iterates stop once A^{k+1} = A^k; pad both sequences with their fixpoints
    depth = max(len(epis), len(run.iterates))
    mismatches = []
    for k in range(depth):
        a = run.iterates[min(k, len(run.iterates) - 1)].mask
        e = epis[min(k, len(epis) - 1)]
        mismatches.append(int(((a ^ e) & interior).sum()))

    epi_monotone = all(
        check_external_stability(new.layers[j][x].points, old.layers[j][x])
        for old, new in zip(iterates, iterates[1:])
        for j in range(plan.J)
        for x in new.layers[j]
    )
    swept = windowed_solve(prob, grid, m_bar)
    fix_k, fix_e = run.fixpoint.mask, epis[-1]
    initial_interior = _front_is_interior(grid, interior, iterates[-1], prob.x0)
    return KernelReport(
        level=plan.level,
        T=plan.T,
        m_bar=m_bar,
        iterations=run.iterations,
        window_points=int(np.prod(grid.shape)),
        interior_points=int(interior.sum()),
        kernel_interior=int((fix_k & interior).sum()),
        epigraph_interior=int((fix_e & interior).sum()),
        symmetric_difference=int(((fix_k ^ fix_e) & interior).sum()),
        iterate_mismatches=mismatches,
        kernel_monotone=run.monotone,
        epigraph_monotone=epi_monotone,
        sweep_matches_iteration=swept == iterates[-1],
        terminal_union_misses=run.terminal_union_misses,
        clipped=H.clipped,
        initial_interior=initial_interior,
    )


__all__ = [
    "KernelPoint",
    "KernelSet",
    "KernelReport",
    "Window",
    "ViabilityError",
    "build_constraint_set",
    "gamma_transition",
    "gamma_boxes",
    "kernel_fixpoint",
    "interior_mask",
    "epigraph",
    "value_iterates",
    "windowed_solve",
    "kernel_check",
    "tiny_instance",
    "default_m_bar",
    "floor_coord",
]
