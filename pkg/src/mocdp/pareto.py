"""Pareto filtering under the componentwise order (minimisation).

A point ``a`` dominates ``b`` when ``a <= b`` componentwise and ``a != b``.
Fronts are stored as ``(m, p)`` arrays sorted lexicographically with no
duplicate rows, so two equal fronts compare equal element by element.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

ArrayLike = np.ndarray | Sequence[Sequence[float]]

# rows per block in the pairwise scan; bounds the (block, n, p) temporary
_BLOCK = 256


class ParetoFront:
    """Immutable finite antichain of cost points in canonical order."""

    __slots__ = ("_points",)

    def __init__(self, points: np.ndarray, *, _trusted: bool = False) -> None:
        pts = np.asarray(points)
        if not _trusted:
            pts = pareto_filter(pts).points
        pts = pts.copy() if pts.flags.writeable else pts
        pts.flags.writeable = False
        self._points = pts

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def dim(self) -> int:
        return self._points.shape[1]

    def __len__(self) -> int:
        return self._points.shape[0]

    def __iter__(self):
        return iter(self.as_tuples())

    def as_tuples(self) -> list[tuple]:
        return [tuple(row) for row in self._points.tolist()]

    def shifted(self, offset: Sequence[float]) -> "ParetoFront":
        """Front translated by ``offset``; translation preserves the order."""
        return ParetoFront(self._points + np.asarray(offset), _trusted=True)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ParetoFront):
            return NotImplemented
        return self._points.shape == other._points.shape and bool(
            np.array_equal(self._points, other._points)
        )

    def __hash__(self) -> int:
        return hash((self._points.shape, self._points.tobytes()))

    def __repr__(self) -> str:
        return f"ParetoFront({self.as_tuples()!r})"


def _as_points(points: ArrayLike) -> np.ndarray:
    arr = np.asarray(points)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.size else arr.reshape(0, 0)
    if arr.ndim != 2:
        raise ValueError(f"expected an (n, p) point array, got shape {arr.shape}")
    return arr


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """True iff ``a <= b`` componentwise and ``a != b``."""
    if len(a) != len(b):
        raise ValueError(f"dimension mismatch: {len(a)} vs {len(b)}")
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def _sweep_mask(pts: np.ndarray) -> np.ndarray:
    # pts sorted lexicographically: a point survives iff its second
    # coordinate beats every earlier one
    second = pts[:, 1]
    prior_min = np.minimum.accumulate(second)
    keep = np.empty(len(pts), dtype=bool)
    keep[0] = True
    keep[1:] = second[1:] < prior_min[:-1]
    return keep


def _pairwise_mask(pts: np.ndarray) -> np.ndarray:
    n = len(pts)
    keep = np.empty(n, dtype=bool)
    for start in range(0, n, _BLOCK):
        block = pts[start : start + _BLOCK]
        weakly = (pts[None, :, :] <= block[:, None, :]).all(axis=2)
        # rows are unique, so the only weakly dominating equal row is the row itself
        keep[start : start + _BLOCK] = weakly.sum(axis=1) == 1
    return keep


def _sorted_unique(pts: np.ndarray) -> np.ndarray:
    order = np.lexsort(pts.T[::-1])
    srt = pts[order]
    if len(srt) > 1:
        fresh = np.empty(len(srt), dtype=bool)
        fresh[0] = True
        fresh[1:] = (srt[1:] != srt[:-1]).any(axis=1)
        srt = srt[fresh]
    return srt


def pareto_filter(points: ArrayLike, method: str = "auto") -> ParetoFront:
    """Non-dominated subset of a finite point set.

    Args:
        points: ``(n, p)`` array or sequence of p-vectors, ``n >= 1``.
        method: ``"pairwise"`` for the O(n^2) scan, ``"sweep"`` for the
            sort-based scan (``p == 2`` only), ``"auto"`` picks the sweep
            when it applies.

    Returns:
        The deduplicated non-dominated points in lexicographic order.
    """
    pts = _as_points(points)
    if pts.shape[0] == 0:
        raise ValueError("cannot filter an empty point set")
    if pts.shape[1] < 1:
        raise ValueError("points must have at least one coordinate")
    p = pts.shape[1]
    if method == "auto":
        method = "sweep" if p == 2 else "pairwise"
    if method == "sweep":
        if p != 2:
            raise ValueError("the sweep filter needs p == 2")
        srt = pts[np.lexsort((pts[:, 1], pts[:, 0]))]
        # duplicates tie with the running minimum and drop out here
        kept = srt[_sweep_mask(srt)]
    elif method == "pairwise":
        uniq = _sorted_unique(pts)
        kept = uniq[_pairwise_mask(uniq)]
    else:
        raise ValueError(f"unknown filter method {method!r}")
    return ParetoFront(kept, _trusted=True)


def incremental_filter(parts: Iterable[ArrayLike], method: str = "auto") -> ParetoFront:
    """Filter a union of parts one part at a time: ``E_{i+1} = E(S_{i+1} u E_i)``.

    Empty parts are skipped; at least one part must be nonempty.
    """
    current: np.ndarray | None = None
    for part in parts:
        arr = _as_points(part)
        if arr.shape[0] == 0:
            continue
        merged = arr if current is None else np.concatenate([current, arr])
        current = pareto_filter(merged, method).points
    if current is None:
        raise ValueError("incremental_filter needs at least one nonempty part")
    return ParetoFront(current, _trusted=True)


def check_external_stability(points: ArrayLike, front: ParetoFront | ArrayLike) -> bool:
    """True iff every point is weakly dominated by some front element."""
    pts = _as_points(points)
    ref = front.points if isinstance(front, ParetoFront) else _as_points(front)
    if pts.shape[0] == 0:
        return True
    if ref.shape[0] == 0:
        return False
    if pts.shape[1] != ref.shape[1]:
        raise ValueError(f"dimension mismatch: {pts.shape[1]} vs {ref.shape[1]}")
    for start in range(0, len(pts), _BLOCK):
        block = pts[start : start + _BLOCK]
        covered = (ref[None, :, :] <= block[:, None, :]).all(axis=2).any(axis=1)
        if not covered.all():
            return False
    return True
