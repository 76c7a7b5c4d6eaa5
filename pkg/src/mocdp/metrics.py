"""Sup-norm Hausdorff distance and convergence tables."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from .pareto import ParetoFront
from .problem import ControlProblem
from . import solver

_CHUNK = 2048


@dataclass(frozen=True)
class ConvergenceRow:
    level: int
    grid_points: int
    successor_edges: int
    front_cardinality: int
    hausdorff: float
    normalized_hausdorff: float

    def as_dict(self) -> dict:
        return asdict(self)


def _points(s: ParetoFront | np.ndarray | Sequence[Sequence[float]]) -> np.ndarray:
    arr = s.points if isinstance(s, ParetoFront) else np.asarray(s, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    return arr.astype(float, copy=False)


def _directed(a: np.ndarray, b: np.ndarray) -> float:
    worst = 0.0
    for start in range(0, len(a), _CHUNK):
        block = a[start : start + _CHUNK]
        nearest = np.full(len(block), np.inf)
        for bstart in range(0, len(b), _CHUNK):
            d = np.abs(block[:, None, :] - b[None, bstart : bstart + _CHUNK, :]).max(axis=2)
            np.minimum(nearest, d.min(axis=1), out=nearest)
        worst = max(worst, float(nearest.max()))
    return worst


def hausdorff(a, b) -> float:
    """Hausdorff distance between two finite point sets under the sup norm."""
    pa, pb = _points(a), _points(b)
    if pa.size == 0 or pb.size == 0:
        raise ValueError("Hausdorff distance needs two nonempty sets")
    if pa.shape[1] != pb.shape[1]:
        raise ValueError(f"dimension mismatch: {pa.shape[1]} vs {pb.shape[1]}")
    return max(_directed(pa, pb), _directed(pb, pa))


@dataclass(frozen=True)
class LevelResult:
    plan: solver.GridPlan
    domains: solver.Domains
    front: ParetoFront  # integer cost coordinates
    wall_time: float

    @property
    def real_front(self) -> np.ndarray:
        return self.front.points * self.plan.h


def run_level(
    prob: ControlProblem, level: int, mode: str = "remark", threads: int = 1, hull: bool = True
) -> LevelResult:
    start = time.perf_counter()
    plan, domains, value = solver.solve(prob, level, mode, threads=threads, hull=hull)
    front = solver.initial_front(prob, plan, value)
    return LevelResult(plan, domains, front, time.perf_counter() - start)


def convergence_table(
    prob: ControlProblem,
    levels: Sequence[int],
    oracle_front: ParetoFront,
    *,
    mode: str = "remark",
    threads: int = 1,
    hull: bool = True,
    on_level: Callable[[LevelResult], None] | None = None,
) -> list[ConvergenceRow]:
    """One row per level; normalised distances are ratios to the first level.

    ``on_level`` sees every level's full result, e.g. to save its front.
    """
    if list(levels) != sorted(levels) or len(set(levels)) != len(levels):
        raise ValueError(f"levels must be strictly ascending, got {list(levels)}")
    rows: list[ConvergenceRow] = []
    for level in levels:
        result = run_level(prob, level, mode, threads, hull)
        if on_level is not None:
            on_level(result)
        dist = hausdorff(result.real_front, oracle_front)
        base = rows[0].hausdorff if rows else dist
        rows.append(
            ConvergenceRow(
                level=level,
                grid_points=result.domains.grid_points,
                successor_edges=result.domains.successor_edges,
                front_cardinality=len(result.front),
                hausdorff=dist,
                normalized_hausdorff=1.0 if not rows else dist / base,
            )
        )
    return rows
