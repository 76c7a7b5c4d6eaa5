"""Control problem definitions, the polynomial benchmark family and config loading.

The benchmark family has scalar dynamics ``x' = u`` with ``u in {-1, 1}``
and the two running costs ``(P(x) u, u)`` for a polynomial ``P``.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

Vector = tuple[float, ...]
Evaluator = Callable[[Vector, Vector], Vector]

PROBLEM_KIND = "polynomial_biobjective"
SAFETY_FACTOR = 1.1


class ConfigError(ValueError):
    """A problem source could not be turned into a ControlProblem."""


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial with ascending-degree coefficients."""

    coeffs: tuple[float, ...]

    def __post_init__(self) -> None:
        coeffs = tuple(float(c) for c in self.coeffs)
        if not coeffs:
            raise ValueError("a polynomial needs at least one coefficient")
        while len(coeffs) > 1 and coeffs[-1] == 0.0:
            coeffs = coeffs[:-1]
        object.__setattr__(self, "coeffs", coeffs)

    def __call__(self, x: float) -> float:
        return poly_eval(self, x)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def derivative(self) -> "Polynomial":
        if len(self.coeffs) == 1:
            return Polynomial((0.0,))
        return Polynomial(tuple(k * c for k, c in enumerate(self.coeffs) if k > 0))

    def antiderivative(self) -> "Polynomial":
        return poly_antiderivative(self)


def poly_eval(poly: Polynomial, x: float) -> float:
    """Horner evaluation."""
    acc = 0.0
    for c in reversed(poly.coeffs):
        acc = acc * x + c
    return acc


def poly_antiderivative(poly: Polynomial) -> Polynomial:
    """The antiderivative ``Q`` with ``Q(0) = 0``."""
    return Polynomial((0.0,) + tuple(c / (k + 1) for k, c in enumerate(poly.coeffs)))


def poly_abs_max(poly: Polynomial, lo: float, hi: float) -> float:
    """Exact ``max |P|`` over ``[lo, hi]`` from endpoints and real critical points."""
    candidates = [lo, hi]
    d = poly.derivative()
    if d.degree >= 1:
        for r in np.roots(list(reversed(d.coeffs))):
            if abs(r.imag) < 1e-12 and lo <= r.real <= hi:
                candidates.append(float(r.real))
    return max(abs(poly_eval(poly, x)) for x in candidates)


@dataclass(frozen=True)
class ControlProblem:
    """Finite-horizon multiobjective control problem with a finite control sample.

    ``dynamics`` and ``running_cost`` map ``(x, u)`` tuples to tuples and must
    be pure.  ``K_f, K_L`` are Lipschitz constants and ``M_f, M_L`` bounds of
    the dynamics and running cost over ``domain_box``.
    """

    name: str
    n: int
    p: int
    T: float
    x0: Vector
    controls: tuple[Vector, ...]
    dynamics: Evaluator = field(compare=False, repr=False)
    running_cost: Evaluator = field(compare=False, repr=False)
    K_f: float = 0.0
    K_L: float = 0.0
    M_f: float = 0.0
    M_L: float = 0.0
    domain_box: tuple[tuple[float, float], ...] = ()
    poly: Polynomial | None = None

    def __post_init__(self) -> None:
        if not self.T > 0:
            raise ValueError(f"horizon must be positive, got {self.T}")
        if not self.controls:
            raise ValueError("the control sample is empty")
        if len(self.x0) != self.n:
            raise ValueError(f"x0 has dimension {len(self.x0)}, expected {self.n}")

    def with_horizon(self, T: float) -> "ControlProblem":
        return dataclasses.replace(self, T=float(T))

    def with_controls(self, controls: Sequence[float | Sequence[float]]) -> "ControlProblem":
        return dataclasses.replace(self, controls=tuple(_vec(u) for u in controls))

    def with_cost_components(self, p: int) -> "ControlProblem":
        """Keep only the first ``p`` running-cost components."""
        if not 1 <= p <= self.p:
            raise ValueError(f"cannot keep {p} of {self.p} cost components")
        base = self.running_cost

        def truncated(x: Vector, u: Vector) -> Vector:
            return tuple(base(x, u)[:p])

        return dataclasses.replace(self, p=p, running_cost=truncated, poly=None)


def _vec(v: float | Sequence[float]) -> Vector:
    if np.ndim(v) == 0:
        return (float(v),)
    return tuple(float(c) for c in v)


def fl_plus(prob: ControlProblem, x: Sequence[float]) -> list[tuple[Vector, Vector]]:
    """Velocity/cost pairs ``(f(x, u), L(x, u))``, one per sampled control."""
    xv = _vec(x)
    if not all(math.isfinite(c) for c in xv):
        raise ValueError(f"state must be finite, got {xv}")
    return [(tuple(prob.dynamics(xv, u)), tuple(prob.running_cost(xv, u))) for u in prob.controls]


HULL_SAMPLE_LIMIT = 100_000


def _compositions(total: int, parts: int) -> list[tuple[int, ...]]:
    if parts == 1:
        return [(total,)]
    return [(k,) + rest for k in range(total, -1, -1) for rest in _compositions(total - k, parts - 1)]


def hull_weights(n_controls: int, resolution: int) -> np.ndarray:
    """Barycentric weights ``k / resolution`` on the simplex over the controls."""
    if resolution < 1:
        raise ValueError(f"hull resolution must be >= 1, got {resolution}")
    count = math.comb(resolution + n_controls - 1, n_controls - 1)
    if count > HULL_SAMPLE_LIMIT:
        raise ValueError(f"{count} hull samples exceed the limit {HULL_SAMPLE_LIMIT}")
    return np.array(_compositions(resolution, n_controls), dtype=float) / resolution


def fl_hull(prob: ControlProblem, x: Sequence[float], resolution: int) -> list[tuple[Vector, Vector]]:
    """Sample of ``co{(f(x, u), L(x, u)) : u in controls}`` on a barycentric grid.

    Pairs are convex combinations of the per-control pairs with weights that
    are multiples of ``1 / resolution``; duplicates are dropped, order is
    deterministic.
    """
    vertices = fl_plus(prob, x)
    if len(vertices) == 1:
        return vertices
    F = np.array([f for f, _ in vertices], dtype=float)
    L = np.array([l for _, l in vertices], dtype=float)
    W = hull_weights(len(vertices), resolution)
    pairs = []
    seen = set()
    for f, l in zip((W @ F).tolist(), (W @ L).tolist()):
        key = (tuple(f), tuple(l))
        if key not in seen:
            seen.add(key)
            pairs.append(key)
    return pairs


def default_domain_box(x0: Vector, M_f: float, T: float) -> tuple[tuple[float, float], ...]:
    return tuple((c - M_f * T - 1.0, c + M_f * T + 1.0) for c in x0)


def polynomial_problem(
    name: str, P: Sequence[float], x0: float, T: float = 0.5, controls: Sequence[float] = (-1.0, 1.0)
) -> ControlProblem:
    poly = Polynomial(tuple(P))

    def dynamics(x: Vector, u: Vector) -> Vector:
        return (u[0],)

    def running_cost(x: Vector, u: Vector) -> Vector:
        return (poly_eval(poly, x[0]) * u[0], u[0])

    prob = ControlProblem(
        name=name,
        n=1,
        p=2,
        T=float(T),
        x0=(float(x0),),
        controls=tuple((float(u),) for u in controls),
        dynamics=dynamics,
        running_cost=running_cost,
        poly=poly,
    )
    M_f = max(abs(u[0]) for u in prob.controls)
    prob = dataclasses.replace(prob, domain_box=default_domain_box(prob.x0, M_f, prob.T))
    K_f, K_L, M_f, M_L = estimate_constants(prob)
    return dataclasses.replace(prob, K_f=K_f, K_L=K_L, M_f=M_f, M_L=M_L)


PRESETS: dict[str, dict[str, Any]] = {
    "moc1": {"P": [-1.0, 1.0], "x0": 1.0},
    "moc2": {"P": [1.0, -1.0], "x0": 1.5},
    "moc3": {"P": [0.2, 2.0 / 75.0, -3.75, -2.0], "x0": 0.0},
    "moc4": {"P": [-0.125, -1.5], "x0": 0.0},
}


def preset_document(name: str) -> dict[str, Any]:
    key = name.lower()
    if key not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    entry = PRESETS[key]
    return {
        "name": key,
        "kind": PROBLEM_KIND,
        "T": 0.5,
        "x0": entry["x0"],
        "controls": [-1.0, 1.0],
        "P": list(entry["P"]),
    }


def _finite_number(doc: Mapping[str, Any], key: str) -> float:
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key!r} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{key!r} must be finite, got {value!r}")
    return float(value)


def _number_list(doc: Mapping[str, Any], key: str) -> list[float]:
    value = doc[key]
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{key!r} must be a nonempty list of numbers")
    return [_finite_number({key: v}, key) for v in value]


def problem_from_document(doc: Mapping[str, Any]) -> ControlProblem:
    """Build a problem from a parsed config document."""
    if not isinstance(doc, Mapping):
        raise ConfigError("problem document must be a JSON object")
    required = ("name", "kind", "T", "x0", "controls", "P")
    missing = [k for k in required if k not in doc]
    if missing:
        raise ConfigError(f"problem document is missing {missing}")
    extra = sorted(set(doc) - set(required))
    if extra:
        raise ConfigError(f"unexpected keys in problem document: {extra}")
    if not isinstance(doc["name"], str) or not doc["name"]:
        raise ConfigError("'name' must be a nonempty string")
    if doc["kind"] != PROBLEM_KIND:
        raise ConfigError(f"unsupported kind {doc['kind']!r}; only {PROBLEM_KIND!r}")
    T = _finite_number(doc, "T")
    if T <= 0:
        raise ConfigError(f"'T' must be positive, got {T}")
    return polynomial_problem(
        doc["name"], _number_list(doc, "P"), _finite_number(doc, "x0"), T, _number_list(doc, "controls")
    )


def problem_document(prob: ControlProblem) -> dict[str, Any]:
    """Config document for a polynomial-family problem (inverse of loading)."""
    if prob.poly is None or prob.n != 1:
        raise ValueError(f"problem {prob.name!r} is not a polynomial benchmark problem")
    return {
        "name": prob.name,
        "kind": PROBLEM_KIND,
        "T": prob.T,
        "x0": prob.x0[0],
        "controls": [u[0] for u in prob.controls],
        "P": list(prob.poly.coeffs),
    }


def load_problem(source: str | Path | Mapping[str, Any]) -> ControlProblem:
    """Load a preset by name, a JSON config file, or an already parsed document."""
    if isinstance(source, Mapping):
        return problem_from_document(source)
    text = str(source)
    if text.lower() in PRESETS:
        return problem_from_document(preset_document(text))
    path = Path(text)
    if not path.is_file():
        raise ConfigError(f"{text!r} is neither a preset ({', '.join(sorted(PRESETS))}) nor a file")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return problem_from_document(doc)


def _box_samples(box: Sequence[tuple[float, float]], per_axis: int) -> list[Vector]:
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in box]
    return [tuple(float(c) for c in pt) for pt in itertools.product(*axes)]


def estimate_constants(prob: ControlProblem) -> tuple[float, float, float, float]:
    """Return ``(K_f, K_L, M_f, M_L)`` over ``prob.domain_box``.

    Exact for the polynomial family; otherwise a sampled estimate inflated by
    a 10% safety factor (overestimates only widen the lattice balls).
    """
    box = prob.domain_box
    if not box or any(hi < lo for lo, hi in box):
        raise ValueError(f"empty domain box {box!r}")
    u_max = max(max(abs(c) for c in u) for u in prob.controls)
    if prob.poly is not None:
        lo, hi = box[0]
        K_L = poly_abs_max(prob.poly.derivative(), lo, hi) * u_max
        M_L = max(poly_abs_max(prob.poly, lo, hi) * u_max, u_max)
        return 0.0, K_L, u_max, M_L

    per_axis = max(2, int(round(4096 ** (1.0 / prob.n))))
    samples = _box_samples(box, per_axis)
    spacing = [((hi - lo) / (per_axis - 1)) or 1.0 for lo, hi in box]
    M_f = M_L = K_f = K_L = 0.0
    for u in prob.controls:
        fs = np.array([prob.dynamics(x, u) for x in samples], dtype=float)
        ls = np.array([prob.running_cost(x, u) for x in samples], dtype=float)
        M_f = max(M_f, float(np.abs(fs).max()))
        M_L = max(M_L, float(np.abs(ls).max()))
        grid_f = fs.reshape((per_axis,) * prob.n + (-1,))
        grid_l = ls.reshape((per_axis,) * prob.n + (-1,))
        for axis in range(prob.n):
            K_f = max(K_f, float(np.abs(np.diff(grid_f, axis=axis)).max()) / spacing[axis])
            K_L = max(K_L, float(np.abs(np.diff(grid_l, axis=axis)).max()) / spacing[axis])
    return (K_f * SAFETY_FACTOR, K_L * SAFETY_FACTOR, M_f * SAFETY_FACTOR, M_L * SAFETY_FACTOR)
