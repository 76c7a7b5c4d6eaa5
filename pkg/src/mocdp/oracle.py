"""Reference fronts for the polynomial benchmark family.

For ``x' = u`` with ``u in {-1, 1}`` over ``[0, T]`` every control yields
``J1 = Q(x0 + d) - Q(x0)`` and ``J2 = d`` where ``d in [-T, T]`` is the net
displacement and ``Q`` an antiderivative of ``P``.  The Pareto set is
recovered by sampling ``d`` densely and filtering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pareto import ParetoFront, pareto_filter
from .problem import ControlProblem, Polynomial, poly_antiderivative

DEFAULT_SAMPLES = 200001
MIN_SAMPLES = 1000


@dataclass(frozen=True)
class CurveSample:
    deltas: np.ndarray
    points: np.ndarray  # (N, 2): (J1, J2)

    def __post_init__(self) -> None:
        if len(self.deltas) != len(self.points):
            raise ValueError("deltas and points differ in length")
        if np.any(np.diff(self.deltas) <= 0):
            raise ValueError("deltas must be strictly increasing")


def _polyval(poly: Polynomial, x: np.ndarray) -> np.ndarray:
    acc = np.zeros_like(x)
    for c in reversed(poly.coeffs):
        acc = acc * x + c
    return acc


def objective_curve(P: Polynomial, x0: float, T: float, N: int) -> CurveSample:
    """Objective-space curve ``d -> (Q(x0 + d) - Q(x0), d)`` on ``N`` equispaced ``d``."""
    if N < 2:
        raise ValueError(f"need at least 2 samples, got {N}")
    k = np.arange(N, dtype=np.int64)
    # integer numerator keeps d = 0 exact for odd N
    deltas = (2 * k - (N - 1)) * T / (N - 1)
    Q = poly_antiderivative(P)
    j1 = _polyval(Q, x0 + deltas) - _polyval(Q, np.array([x0], dtype=float))[0]
    return CurveSample(deltas, np.column_stack([j1, deltas]))


def analytic_front(P: Polynomial, x0: float, T: float, N: int = DEFAULT_SAMPLES) -> ParetoFront:
    """Pareto-optimal part of the sampled objective curve, in real units."""
    if N < MIN_SAMPLES:
        raise ValueError(f"analytic front needs at least {MIN_SAMPLES} samples, got {N}")
    return pareto_filter(objective_curve(P, x0, T, N).points)


def problem_front(prob: ControlProblem, N: int = DEFAULT_SAMPLES) -> ParetoFront:
    if prob.poly is None or prob.n != 1 or prob.p != 2:
        raise ValueError(f"no analytic front for problem {prob.name!r}")
    return analytic_front(prob.poly, prob.x0[0], prob.T, N)
