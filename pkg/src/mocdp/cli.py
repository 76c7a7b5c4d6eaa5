"""Command-line interface: ``mocdp {solve,oracle,compare,table,kernel-check}``.

Exit status 0 on success, 2 on usage or configuration errors and 3 when a
computation fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import metrics, oracle, solver, viability
from .pareto import ParetoFront
from .problem import ConfigError, ControlProblem, load_problem

log = logging.getLogger("mocdp")

EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE = 0, 2, 3
DIGITS = 12


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class RunStats:
    problem: str
    level: int
    mode: str
    grid_points: int
    successor_edges: int
    front_cardinality: int
    wall_time: float
    hausdorff: float | None
    samples: int
    threads: int
    hull: bool


def format_value(v: float) -> str:
    return format(float(v), f".{DIGITS}g")


def front_csv(points: np.ndarray) -> str:
    """Header ``j1,...,jp`` then one lexicographically sorted point per row."""
    pts = np.asarray(points, dtype=float)
    if len(pts):
        pts = pts[np.lexsort(pts.T[::-1])]
    out = io.StringIO()
    out.write(",".join(f"j{k + 1}" for k in range(pts.shape[1])) + "\n")
    for row in pts:
        out.write(",".join(format_value(v) for v in row) + "\n")
    return out.getvalue()


def read_front_csv(path: str | Path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"front file {str(path)!r} does not exist")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0] or any(not c.startswith("j") for c in rows[0]):
        raise ConfigError(f"{path}: expected a header j1,j2,...")
    try:
        pts = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if pts.size == 0:
        raise ConfigError(f"{path}: no points")
    if pts.shape[1] != len(rows[0]):
        raise ConfigError(f"{path}: rows do not match the header width")
    return pts


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text, encoding="utf-8")


def _int_list(text: str, flag: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"{flag} expects comma-separated integers, got {text!r}") from exc


def _positive(value: int, flag: str) -> int:
    if value < 1:
        raise UsageError(f"{flag} must be positive, got {value}")
    return value


def _oracle_front(prob: ControlProblem, samples: int) -> ParetoFront:
    try:
        return oracle.problem_front(prob, samples)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_solve(args: argparse.Namespace) -> int:
    prob = load_problem(args.problem)
    mode = "strict" if args.strict else "remark"
    threads = _positive(args.threads, "--threads")
    result = metrics.run_level(prob, args.level, mode, threads, not args.no_hull)
    front = result.real_front
    dist = None
    if args.hausdorff:
        dist = metrics.hausdorff(front, _oracle_front(prob, args.samples))
    stats = RunStats(
        problem=prob.name,
        level=args.level,
        mode=mode,
        grid_points=result.domains.grid_points,
        successor_edges=result.domains.successor_edges,
        front_cardinality=len(result.front),
        wall_time=max(result.wall_time, 1e-9),
        hausdorff=dist,
        samples=args.samples,
        threads=threads,
        hull=not args.no_hull,
    )
    _write(args.out_front, front_csv(front))
    if args.out_stats:
        _write(args.out_stats, json.dumps(asdict(stats), indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    prob = load_problem(args.problem)
    front = _oracle_front(prob, args.samples)
    _write(args.out_front, front_csv(front.points))
    if args.out_curve:
        curve = oracle.objective_curve(prob.poly, prob.x0[0], prob.T, args.samples)
        _write(args.out_curve, front_csv(curve.points))
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    front = read_front_csv(args.front)
    if args.ref:
        ref = read_front_csv(args.ref)
    elif args.problem:
        ref = _oracle_front(load_problem(args.problem), args.samples).points
    else:
        raise UsageError("compare needs --ref or --problem")
    if front.shape[1] != ref.shape[1]:
        raise ConfigError(f"front has {front.shape[1]} objectives, reference has {ref.shape[1]}")
    report = {
        "hausdorff": metrics.hausdorff(front, ref),
        "cardinality_front": int(len(front)),
        "cardinality_ref": int(len(ref)),
    }
    sys.stdout.write(json.dumps(report, sort_keys=True) + "\n")
    return EXIT_OK


TABLE_COLUMNS = (
    "level",
    "grid_points",
    "successor_edges",
    "front_cardinality",
    "hausdorff",
    "normalized_hausdorff",
)


def table_csv(rows: Sequence[metrics.ConvergenceRow]) -> str:
    out = io.StringIO()
    out.write(",".join(TABLE_COLUMNS) + "\n")
    for row in rows:
        values = row.as_dict()
        cells = [
            format_value(values[c]) if isinstance(values[c], float) else str(values[c])
            for c in TABLE_COLUMNS
        ]
        out.write(",".join(cells) + "\n")
    return out.getvalue()


def cmd_table(args: argparse.Namespace) -> int:
    names = [n.strip() for n in args.problems.split(",") if n.strip()]
    levels = _int_list(args.levels, "--levels")
    if not names or not levels:
        raise UsageError("--problems and --levels must be nonempty")
    if levels != sorted(set(levels)):
        raise UsageError(f"--levels must be strictly ascending, got {levels}")
    if levels[0] < 2:
        raise ConfigError(f"level must be >= 2, got {levels[0]}")
    threads = _positive(args.threads, "--threads")
    mode = "strict" if args.strict else "remark"
    problems = [load_problem(n) for n in names]
    out_dir = Path(args.out_dir)
    for prob in problems:

        def save_front(result: metrics.LevelResult, name: str = prob.name) -> None:
            path = out_dir / f"front_{name}_i{result.plan.level}.csv"
            _write(str(path), front_csv(result.real_front))

        rows = metrics.convergence_table(
            prob,
            levels,
            _oracle_front(prob, args.samples),
            mode=mode,
            threads=threads,
            hull=not args.no_hull,
            on_level=save_front,
        )
        for row in rows:
            log.info("%s i=%d: %d points, hausdorff %.6g", prob.name, row.level, row.front_cardinality, row.hausdorff)
        _write(str(out_dir / f"table_{prob.name}.csv"), table_csv(rows))
    return EXIT_OK


def cmd_kernel_check(args: argparse.Namespace) -> int:
    try:
        lo, hi = (float(v) for v in args.cost_box.split(","))
    except ValueError as exc:
        raise UsageError(f"--cost-box expects lo,hi, got {args.cost_box!r}") from exc
    prob, plan, window = viability.tiny_instance(
        args.problem,
        T=args.horizon,
        level=args.level,
        state_radius=args.state_radius,
        cost_box=(lo, hi),
    )
    report = viability.kernel_check(prob, plan, window, args.m_bar)
    if report.clipped:
        log.warning("cost window is clipped; boundary triples are excluded from the comparison")
    sys.stdout.write(json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n")
    return EXIT_OK if report.passed else EXIT_COMPUTE


def _common(p: argparse.ArgumentParser, *, level: bool = True) -> None:
    if level:
        p.add_argument("--level", type=int, default=3, help="refinement level i (eps=2^-i, h=2^-2i)")
    p.add_argument("--strict", action="store_true", help="use the full discrete dynamics")
    p.add_argument("--threads", type=int, default=1, help="workers per time layer")
    p.add_argument("--no-hull", action="store_true", help="use only the control sample, not its hull")
    p.add_argument("--samples", type=int, default=oracle.DEFAULT_SAMPLES, help="oracle sample count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mocdp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="approximate the Pareto front at (-h, x0)")
    p.add_argument("--problem", required=True, help="preset name or JSON config path")
    _common(p)
    p.add_argument("--hausdorff", action="store_true", help="also measure distance to the oracle")
    p.add_argument("--out-front", help="front CSV path (default: stdout)")
    p.add_argument("--out-stats", help="run statistics JSON path")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("oracle", help="reference front of a polynomial benchmark")
    p.add_argument("--problem", required=True)
    p.add_argument("--samples", type=int, default=oracle.DEFAULT_SAMPLES)
    p.add_argument("--out-front", help="front CSV path (default: stdout)")
    p.add_argument("--out-curve", help="also write the whole sampled objective curve")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("compare", help="Hausdorff distance between a front and a reference")
    p.add_argument("--front", required=True)
    p.add_argument("--ref", help="reference front CSV")
    p.add_argument("--problem", help="use this problem's oracle front as reference")
    p.add_argument("--samples", type=int, default=oracle.DEFAULT_SAMPLES)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("table", help="convergence tables, one CSV per problem")
    p.add_argument("--problems", default="moc1,moc2,moc3,moc4")
    p.add_argument("--levels", default="3,4,5")
    _common(p, level=False)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("kernel-check", help="viability kernel vs epigraph on a tiny instance")
    p.add_argument("--problem", default=viability.TINY_PROBLEM)
    p.add_argument("--level", type=int, default=viability.TINY_LEVEL)
    p.add_argument("--horizon", type=float, default=viability.TINY_HORIZON)
    p.add_argument("--state-radius", type=float, default=viability.TINY_STATE_RADIUS)
    p.add_argument(
        "--cost-box", default=",".join(str(v) for v in viability.TINY_COST_BOX), help="lo,hi"
    )
    p.add_argument("--m-bar", type=float, default=None, help="cost bound Mbar_L (default: least valid)")
    p.set_defaults(func=cmd_kernel_check)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (UsageError, ConfigError, solver.PlanError, viability.ViabilityError) as exc:
        print(f"mocdp: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (solver.SolverError, ArithmeticError, MemoryError, RuntimeError) as exc:
        print(f"mocdp: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
