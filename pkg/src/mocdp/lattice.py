"""Integer lattices of step ``h`` for time, state and cost spaces.

Points are stored as integer coordinates; the real value of a coordinate
``k`` is ``k * h``.  With ``h`` a power of two the conversion is exact in
binary floating point.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True, order=True)
class LatticeVec:
    """A point of the lattice ``h Z^d``."""

    coords: tuple[int, ...]
    step: float

    def __post_init__(self) -> None:
        if not self.step > 0:
            raise ValueError(f"lattice step must be positive, got {self.step}")

    def __len__(self) -> int:
        return len(self.coords)


def _as_vector(x: float | Sequence[float]) -> tuple[float, ...]:
    if np.ndim(x) == 0:
        return (float(x),)
    return tuple(float(v) for v in x)


def snap_coord(x: float, h: float) -> int:
    """Nearest lattice coordinate of a scalar; exact half-step ties go up."""
    if not math.isfinite(x):
        raise ValueError(f"cannot snap non-finite value {x}")
    return math.floor(x / h + 0.5)


def snap(x: float | Sequence[float], h: float) -> LatticeVec:
    """Componentwise nearest lattice point of ``x``."""
    if not h > 0:
        raise ValueError(f"lattice step must be positive, got {h}")
    return LatticeVec(tuple(snap_coord(v, h) for v in _as_vector(x)), h)


def to_real(v: LatticeVec) -> tuple[float, ...]:
    return tuple(k * v.step for k in v.coords)


def coord_range(center: float, radius: float, h: float) -> range:
    """Lattice coordinates ``k`` with ``|k h - center| <= radius``."""
    lo = math.ceil((center - radius) / h)
    hi = math.floor((center + radius) / h)
    # center +- radius may round across a lattice point; settle by the definition
    if abs((lo - 1) * h - center) <= radius:
        lo -= 1
    if abs((hi + 1) * h - center) <= radius:
        hi += 1
    while lo <= hi and abs(lo * h - center) > radius:
        lo += 1
    while hi >= lo and abs(hi * h - center) > radius:
        hi -= 1
    return range(lo, hi + 1)


def ball_coords(center: Sequence[float], radius: float, h: float) -> list[tuple[int, ...]]:
    """Integer coordinates of the sup-norm ball around ``center``, sorted."""
    if radius < 0:
        raise ValueError(f"radius must be nonnegative, got {radius}")
    axes = [coord_range(c, radius, h) for c in center]
    return list(itertools.product(*axes))


def ball_lattice_points(
    center: float | Sequence[float], radius: float, h: float
) -> list[LatticeVec]:
    """Lattice points inside the closed sup-norm ball, lexicographically sorted."""
    return [LatticeVec(c, h) for c in ball_coords(_as_vector(center), radius, h)]
