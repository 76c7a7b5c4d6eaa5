"""Lattice-discretised multiobjective dynamic programming.

The solve runs in two passes.  :func:`build_domains` propagates the initial
state forward to find every lattice state that can be visited on every time
layer.  :func:`backward_solve` then sweeps the layers backward, setting the
front of each grid point to the Pareto-optimal part of
``{l + v : v in V(j', x')}`` over all successors ``(j', x', l)``.

Two successor schemes are available:

``remark``
    one target layer ``j + (eps - 2h)/h``, a state ball of radius
    ``alpha(eps, h, K_f, M)`` and the step cost snapped to the nearest
    lattice point.  This is the reduced scheme used for the benchmark tables.
``strict``
    the full discrete dynamics: five target layers covering
    ``[t + eps - 2h, t + eps + 2h]``, the same state ball, and a ball of
    radius ``alpha(eps, h, K_L, M)`` around the step cost.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .lattice import ball_coords, snap_coord
from .pareto import ParetoFront, incremental_filter
from .problem import ControlProblem, fl_hull, fl_plus

log = logging.getLogger(__name__)

Coords = tuple[int, ...]
MODES = ("remark", "strict")
STRICT_LAYER_SPAN = 5
BRUTE_FORCE_PATH_LIMIT = 10**6


class PlanError(ValueError):
    """Grid parameters violate the step relations."""


class SolverError(RuntimeError):
    """The backward pass met an inconsistent domain or grid."""


@dataclass(frozen=True)
class GridPlan:
    """Steps and layer bookkeeping for one refinement level.

    Layer ``j`` sits at time ``t_j = -h + j h`` for ``j = 0 .. J-1``.
    Layers with ``t_j >= terminal_threshold`` are terminal.
    """

    level: int
    eps: float
    h: float
    T: float
    M: float
    J: int
    layer_advance: int
    terminal_threshold: float
    j_star: int
    mode: str
    K_f: float
    K_L: float
    hull_resolution: int = 0

    def time(self, j: int) -> float:
        return -self.h + j * self.h

    def is_terminal(self, j: int) -> bool:
        return self.time(j) >= self.terminal_threshold

    @property
    def separated(self) -> bool:
        """Whether ``eps - 2h > 2h`` holds (used by the viability argument)."""
        return self.eps - 2 * self.h > 2 * self.h

    @property
    def alpha_state(self) -> float:
        return alpha_margin(self.eps, self.h, self.K_f, self.M)

    @property
    def alpha_cost(self) -> float:
        return alpha_margin(self.eps, self.h, self.K_L, self.M)

    def target_layers(self, j: int) -> range:
        first = j + self.layer_advance
        if self.mode == "remark":
            return range(first, first + 1)
        return range(first, first + STRICT_LAYER_SPAN)

    def steps_remaining(self, j: int) -> int:
        """Upper bound on backward steps from layer ``j`` to the terminal region."""
        if self.is_terminal(j):
            return 0
        return 1 + self.steps_remaining(j + self.layer_advance)


def alpha_margin(eps: float, h: float, K: float, M: float) -> float:
    """Ball inflation ``2h + eps h K + eps^2 K M``."""
    return 2 * h + eps * h * K + eps * eps * K * M


def check_key_relation(eps: float, h: float, M_L: float, M_L_bar: float, alpha: float) -> bool:
    """``eps M_L + alpha <= (eps - 2h) M_L_bar``."""
    return eps * M_L + alpha <= (eps - 2 * h) * M_L_bar


def plan_grid(prob: ControlProblem, level: int, mode: str = "remark", *, hull: bool = True) -> GridPlan:
    """Grid for ``eps = 2^-level`` and ``h = 2^-(2 level)``.

    With ``hull`` the velocity/cost set is the convex hull of the per-control
    pairs, sampled finely enough that neighbouring samples move the state
    by at most one lattice step; otherwise only the control sample is used.
    """
    if mode not in MODES:
        raise PlanError(f"unknown mode {mode!r}; expected one of {MODES}")
    if level < 2:
        raise PlanError(f"level must be >= 2, got {level}")
    eps = 2.0**-level
    h = 2.0 ** (-2 * level)
    ratio = eps / h
    if not eps - 2 * h > 0 or ratio != int(ratio):
        raise PlanError(f"eps={eps} and h={h} leave no forward layer advance")
    steps = prob.T / h
    if steps != int(steps):
        raise PlanError(f"T={prob.T} is not a multiple of h={h}")
    M = max(1.0, prob.M_f)
    J = int(steps) + 3
    hull_resolution = 0
    if hull and len(prob.controls) > 1:
        hull_resolution = max(1, math.ceil(2 * prob.M_f * eps / h))
    threshold = prob.T - M * eps - h
    non_terminal = [j for j in range(J) if -h + j * h < threshold]
    plan = GridPlan(
        level=level,
        eps=eps,
        h=h,
        T=prob.T,
        M=M,
        J=J,
        layer_advance=int(ratio) - 2,
        terminal_threshold=threshold,
        j_star=non_terminal[-1] if non_terminal else -1,
        mode=mode,
        K_f=prob.K_f,
        K_L=prob.K_L,
        hull_resolution=hull_resolution,
    )
    if plan.j_star < 0:
        log.warning("level %d with T=%g has no non-terminal layer", level, prob.T)
    return plan


@dataclass(frozen=True)
class Move:
    """Successors of one grid point under one velocity/cost pair, as a product set."""

    layers: range
    states: tuple[Coords, ...]
    costs: np.ndarray  # (c, p) integer cost coordinates

    def __len__(self) -> int:
        return len(self.layers) * len(self.states) * len(self.costs)


def velocity_cost_pairs(prob: ControlProblem, plan: GridPlan, x: Sequence[float]):
    """The ``(f, l)`` pairs the plan uses at the real state ``x``."""
    if plan.hull_resolution:
        return fl_hull(prob, x, plan.hull_resolution)
    return fl_plus(prob, x)


def control_moves(prob: ControlProblem, plan: GridPlan, j: int, x: Coords) -> list[Move]:
    """Successor sets of the grid point ``(j, x)``, one per velocity/cost pair."""
    if plan.is_terminal(j):
        raise SolverError(f"layer {j} is terminal and has no successors")
    layers = plan.target_layers(j)
    if layers[-1] > plan.J - 1:
        raise SolverError(f"successor layer {layers[-1]} exceeds J-1={plan.J - 1}")
    h, eps = plan.h, plan.eps
    xr = tuple(k * h for k in x)
    moves = []
    for f, l in velocity_cost_pairs(prob, plan, xr):
        center = [xi + eps * fi for xi, fi in zip(xr, f)]
        states = tuple(ball_coords(center, plan.alpha_state, h))
        if plan.mode == "remark":
            costs = np.array([[snap_coord(eps * li, h) for li in l]], dtype=np.int64)
        else:
            costs = np.array(ball_coords([eps * li for li in l], plan.alpha_cost, h), dtype=np.int64)
        moves.append(Move(layers, states, costs.reshape(-1, len(l))))
    return moves


def successors(
    prob: ControlProblem, plan: GridPlan, j: int, x: Coords
) -> list[tuple[int, Coords, Coords]]:
    """Sorted, duplicate-free successor triples ``(j', x', l)`` of ``(j, x)``."""
    out = set()
    for move in control_moves(prob, plan, j, tuple(x)):
        cost_rows = [tuple(int(c) for c in row) for row in move.costs]
        for jp in move.layers:
            for xp in move.states:
                for l in cost_rows:
                    out.add((jp, xp, l))
    return sorted(out)


@dataclass
class Domains:
    """Per-layer sorted state sets ``Omega_j`` reachable from the initial state."""

    layers: list[tuple[Coords, ...]]
    successor_edges: int

    @property
    def grid_points(self) -> int:
        return sum(len(layer) for layer in self.layers)

    def __contains__(self, key: tuple[int, Coords]) -> bool:
        j, x = key
        return 0 <= j < len(self.layers) and x in set(self.layers[j])


def initial_coords(prob: ControlProblem, h: float) -> Coords:
    coords = tuple(snap_coord(c, h) for c in prob.x0)
    if any(k * h != c for k, c in zip(coords, prob.x0)):
        warnings.warn(f"x0={prob.x0} is off the lattice; snapped to {tuple(k * h for k in coords)}")
    return coords


def build_domains(prob: ControlProblem, plan: GridPlan) -> Domains:
    """Forward closure of the initial layers under :func:`successors`."""
    x0 = initial_coords(prob, plan.h)
    sets: list[set[Coords]] = [set() for _ in range(plan.J)]
    if plan.mode == "remark":
        sets[0].add(x0)
    else:
        for j in range(plan.J):
            if plan.time(j) < plan.eps - 3 * plan.h:
                sets[j].add(x0)
    edges = 0
    for j in range(plan.J):
        if plan.is_terminal(j) or not sets[j]:
            continue
        for x in sorted(sets[j]):
            for move in control_moves(prob, plan, j, x):
                edges += len(move)
                for jp in move.layers:
                    sets[jp].update(move.states)
    layers = [tuple(sorted(s)) for s in sets]
    log.debug("domains: %d grid points, %d edges", sum(map(len, layers)), edges)
    return Domains(layers, edges)


@dataclass
class ValueFunction:
    """Fronts on the grid points of a domain, in integer cost coordinates.

    ``lookup`` returns ``None`` for a point outside the domain: an undefined
    value is not the same thing as an empty front.
    """

    h: float
    layers: list[dict[Coords, ParetoFront]] = field(default_factory=list)

    def lookup(self, j: int, x: Sequence[int]) -> ParetoFront | None:
        if not 0 <= j < len(self.layers):
            return None
        return self.layers[j].get(tuple(x))

    def real_front(self, j: int, x: Sequence[int]) -> np.ndarray:
        front = self.lookup(j, x)
        if front is None:
            raise KeyError(f"value undefined at layer {j}, state {tuple(x)}")
        return front.points * self.h

    def items(self) -> Iterator[tuple[int, Coords, ParetoFront]]:
        for j, layer in enumerate(self.layers):
            for x in sorted(layer):
                yield j, x, layer[x]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ValueFunction):
            return NotImplemented
        return self.h == other.h and self.layers == other.layers


def zero_terminal(p: int) -> Callable[[int], ParetoFront]:
    zero = ParetoFront(np.zeros((1, p), dtype=np.int64), _trusted=True)
    return lambda j: zero


def _point_front(
    prob: ControlProblem, plan: GridPlan, value: ValueFunction, j: int, x: Coords
) -> ParetoFront:
    # one part per target layer, filtered in turn (Step 2.3' ordering)
    offsets: dict[int, dict[Coords, list[np.ndarray]]] = {}
    for move in control_moves(prob, plan, j, x):
        for jp in move.layers:
            by_state = offsets.setdefault(jp, {})
            for xp in move.states:
                by_state.setdefault(xp, []).append(move.costs)
    parts = []
    for jp in sorted(offsets):
        stored = value.layers[jp]
        blocks = []
        for xp, cost_list in offsets[jp].items():
            front = stored.get(xp)
            if front is None:
                raise SolverError(f"successor ({jp}, {xp}) of ({j}, {x}) has no value")
            costs = np.unique(np.concatenate(cost_list), axis=0)
            pts = front.points
            blocks.append((pts[None, :, :] + costs[:, None, :]).reshape(-1, pts.shape[1]))
        parts.append(np.concatenate(blocks))
    return incremental_filter(parts)


def backward_solve(
    prob: ControlProblem,
    plan: GridPlan,
    domains: Domains,
    *,
    threads: int = 1,
    terminal: Callable[[int], ParetoFront] | None = None,
) -> ValueFunction:
    """Backward pass over the layers ``j_star, ..., 0``.

    ``terminal(j)`` gives the front stored on terminal layers; the default is
    the single zero cost.  Within one layer the grid points are independent
    and are spread over ``threads`` workers; the result does not depend on the
    worker count.
    """
    if len(domains.layers) != plan.J:
        raise SolverError(f"domains have {len(domains.layers)} layers, plan has {plan.J}")
    terminal = terminal or zero_terminal(prob.p)
    value = ValueFunction(plan.h, [dict() for _ in range(plan.J)])
    for j in range(plan.J):
        if plan.is_terminal(j):
            front = terminal(j)
            value.layers[j] = {x: front for x in domains.layers[j]}
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for j in range(plan.j_star, -1, -1):
            points = domains.layers[j]
            if not points:
                continue
            if pool is None:
                fronts = [_point_front(prob, plan, value, j, x) for x in points]
            else:
                fronts = list(pool.map(lambda x: _point_front(prob, plan, value, j, x), points))
            value.layers[j] = dict(zip(points, fronts))
    finally:
        if pool is not None:
            pool.shutdown()
    return value


def _plain_filter(points: set[Coords]) -> list[Coords]:
    # deliberately naive: independent of the vectorised filters in pareto.py
    out = []
    for a in points:
        if not any(b != a and all(bi <= ai for bi, ai in zip(b, a)) for b in points):
            out.append(a)
    return sorted(out)


def brute_force_reference(
    prob: ControlProblem,
    plan: GridPlan,
    domains: Domains,
    *,
    limit: int = BRUTE_FORCE_PATH_LIMIT,
    terminal: Callable[[int], ParetoFront] | None = None,
) -> ValueFunction:
    """Front of every grid point by enumerating all successor paths.

    Each path from ``(j, x)`` into the terminal region contributes the sum of
    its step costs plus a terminal value; the outcome set is Pareto filtered
    only once, at the end.  Refuses when some grid point has more than
    ``limit`` paths.
    """
    terminal = terminal or zero_terminal(prob.p)
    succ: dict[tuple[int, Coords], list[tuple[int, Coords, Coords]]] = {}
    counts: dict[tuple[int, Coords], int] = {}
    for j in range(plan.J - 1, -1, -1):
        for x in domains.layers[j]:
            if plan.is_terminal(j):
                counts[j, x] = len(terminal(j))
                continue
            succ[j, x] = successors(prob, plan, j, x)
            total = 0
            for jp, xp, _ in succ[j, x]:
                if (jp, xp) not in counts:
                    raise SolverError(f"successor ({jp}, {xp}) of ({j}, {x}) is outside the domains")
                total += counts[jp, xp]
            if total > limit:
                raise SolverError(f"{total} paths from ({j}, {x}) exceed the limit {limit}")
            counts[j, x] = total

    def outcomes(j: int, x: Coords) -> Iterator[Coords]:
        stack = [(j, x, (0,) * prob.p)]
        while stack:
            jj, xx, acc = stack.pop()
            if plan.is_terminal(jj):
                for z in terminal(jj).as_tuples():
                    yield tuple(a + int(b) for a, b in zip(acc, z))
                continue
            for jp, xp, l in succ[jj, xx]:
                stack.append((jp, xp, tuple(a + b for a, b in zip(acc, l))))

    value = ValueFunction(plan.h, [dict() for _ in range(plan.J)])
    for j in range(plan.J):
        for x in domains.layers[j]:
            front = _plain_filter(set(outcomes(j, x)))
            value.layers[j][x] = ParetoFront(np.array(front, dtype=np.int64), _trusted=True)
    return value


def solve(
    prob: ControlProblem, level: int, mode: str = "remark", *, threads: int = 1, hull: bool = True
) -> tuple[GridPlan, Domains, ValueFunction]:
    """Plan, build domains and run the backward pass in one call."""
    plan = plan_grid(prob, level, mode, hull=hull)
    domains = build_domains(prob, plan)
    value = backward_solve(prob, plan, domains, threads=threads)
    return plan, domains, value


def initial_front(prob: ControlProblem, plan: GridPlan, value: ValueFunction) -> ParetoFront:
    """Front at ``(t = -h, x0)``, the approximation of the Pareto set."""
    front = value.lookup(0, initial_coords(prob, plan.h))
    if front is None:
        raise SolverError("no value at the initial grid point")
    return front


def cost_lower_bound(prob: ControlProblem, plan: GridPlan, j: int) -> float:
    """Componentwise lower bound on front points at layer ``j`` (real units)."""
    per_step = plan.eps * prob.M_L + plan.h / 2 + (plan.alpha_cost if plan.mode == "strict" else 0.0)
    return -plan.steps_remaining(j) * per_step


__all__ = [
    "GridPlan",
    "Domains",
    "ValueFunction",
    "PlanError",
    "SolverError",
    "alpha_margin",
    "check_key_relation",
    "plan_grid",
    "successors",
    "control_moves",
    "velocity_cost_pairs",
    "build_domains",
    "backward_solve",
    "brute_force_reference",
    "solve",
    "initial_front",
    "cost_lower_bound",
]
