"""Command-line surface: solve | analyze | homotopy | example | sweep | metrics.

Every subcommand consumes the JSON problem schema (see :mod:`otstruct.io`)
and writes JSON (or CSV for sweeps) to --output or stdout.  Exit codes:
0 success, 2 invalid input, 3 infeasible problem.  Randomized generators are
fully determined by --seed; identical config and seed give byte-identical
output.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import io
from .core import (
    CorrelationCost,
    DiscreteMeasure,
    ExplicitCost,
    InfeasibleProblemError,
    OtstructError,
    PNormCost,
    Tolerances,
    TransportProblem,
    ValidationError,
    cost_matrix,
)
from .dualset import assignable_sets, halfspaces, phi_interval_hull
from .homotopy import PathSpec, track
from .metrics import plan_as_measure, plan_to_map, map_lp_distance, tau_c_eps, wp, wp_plans
from .solver import Coupling, solve, solve_exact
from .structure import g_gamma, uniqueness_report
from .io import dumps

DUALSET_AUTO_LIMIT = 200  # analyze skips the O(M^2)+O(M^3) dual-set block above this


@dataclass(frozen=True)
class RunConfig:
    """Parsed invocation: inputs, output, tolerance overrides, seed."""

    subcommand: str
    inputs: tuple
    output: str | None
    tol: Tolerances
    seed: int


def _tolerances(args) -> Tolerances:
    kw = {}
    if args.tol_tie is not None:
        kw["tie"] = args.tol_tie
    if getattr(args, "tol_event", None) is not None:
        kw["event"] = args.tol_event
    return Tolerances(**kw)


def _emit(text: str, output: str | None):
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(args) -> str:
    problem = io.problem_from_json(_load_json(args.problem))
    tol = _tolerances(args)
    if args.oracle:
        sol = solve_exact(problem).to_solution()
    else:
        sol = solve(problem, tol)
    return dumps(io.solution_to_json(sol))


def cmd_analyze(args) -> str:
    problem = io.problem_from_json(_load_json(args.problem))
    tol = _tolerances(args)
    sol = solve(problem, tol)
    report = uniqueness_report(problem, sol, tol)
    out = {
        "solution": io.solution_to_json(sol),
        "report": io.uniqueness_report_to_json(report),
    }
    if problem.source.size <= DUALSET_AUTO_LIMIT or args.full:
        system = halfspaces(problem, assignable_sets(report.g_gamma))
        out["halfspaces"] = io.halfspaces_to_json(system)
        out["intervals"] = io.intervals_to_json(phi_interval_hull(system, tol))
    return dumps(out)


def cmd_homotopy(args) -> str:
    path = io.path_from_json(_load_json(args.path))
    if args.samples:
        path = PathSpec(path.x0, path.x1, path.y0, path.y1,
                        path.alpha, path.beta, path.cost, args.samples)
    report = track(path, _tolerances(args))
    return dumps(io.track_report_to_json(report))


def _stride_subsample(entries, cap):
    if len(entries) <= cap:
        return list(entries)
    idx = np.linspace(0, len(entries) - 1, cap).round().astype(int)
    return [entries[k] for k in sorted(set(int(i) for i in idx))]


def _subsampled_plan(plan: Coupling, cap: int) -> Coupling:
    picked = _stride_subsample(plan.entries, cap)
    total = sum(m for _, _, m in picked)
    return Coupling([(i, j, m / total) for i, j, m in picked], plan.dims)


def cmd_sweep(args) -> str:
    path = io.path_from_json(_load_json(args.path))
    tol = _tolerances(args)
    p = args.p
    ts = np.linspace(0.0, 1.0, args.samples or path.samples)
    prob0 = path.problem_at(0.0)
    sol0 = solve(prob0, tol)
    plan0 = _subsampled_plan(sol0.plan, args.max_support)
    rho0, _, mu0, _ = path.endpoint_measures()
    lines = ["t,wp_source,wp_target,wp_plans,primal_unique"]
    for t in ts:
        prob_t = path.problem_at(float(t))
        sol_t = solve(prob_t, tol)
        g = g_gamma(prob_t, sol_t, tol)
        unique = g.is_acyclic()
        d_src = wp(rho0, prob_t.source, p, tol)
        d_tgt = wp(mu0, prob_t.target, p, tol)
        plan_t = _subsampled_plan(sol_t.plan, args.max_support)
        d_plan = wp_plans(plan0, prob0, plan_t, prob_t, p, tol)
        lines.append(f"{float(t)!r},{d_src!r},{d_tgt!r},{d_plan!r},{int(unique)}")
    return "\n".join(lines) + "\n"


def cmd_metrics(args) -> str:
    tol = _tolerances(args)
    p = args.p
    if args.kind == "measures":
        m0 = io.measure_from_json(_load_json(args.a))
        m1 = io.measure_from_json(_load_json(args.b))
        dist = wp(m0, m1, p, tol)
        witness = None
        if args.witness:
            witness = solve(TransportProblem(m0, m1, PNormCost(p)), tol).plan
        return dumps(io.distance_to_json(dist, p, "measures", witness))
    prob0 = io.problem_from_json(_load_json(args.a))
    prob1 = io.problem_from_json(_load_json(args.b))
    plan0 = solve(prob0, tol).plan
    plan1 = solve(prob1, tol).plan
    if args.kind == "plans":
        dist = wp_plans(plan0, prob0, plan1, prob1, p, tol)
        witness = None
        if args.witness:
            witness = solve(
                TransportProblem(plan_as_measure(plan0, prob0),
                                 plan_as_measure(plan1, prob1), PNormCost(p)),
                tol,
            ).plan
        return dumps(io.distance_to_json(dist, p, "plans", witness))
    if args.kind == "maps":
        t0 = plan_to_map(plan0)
        t1 = plan_to_map(plan1)
        # the L^p(source) norm compares images indexwise, so the two problems
        # must share the source index set and its weights
        if prob0.source.size != prob1.source.size or not np.allclose(
            prob0.source.weights, prob1.source.weights, atol=tol.mass
        ):
            raise ValidationError("map distance needs a common source weighting")
        dist = map_lp_distance(t0, t1, prob0.source, prob0.target, prob1.target, p)
        return dumps(io.distance_to_json(dist, p, "maps"))
    if args.kind == "tau":
        val = tau_c_eps(plan0, prob0, plan1, prob1, args.eps, tol)
        return dumps(io.distance_to_json(val, 2.0, "tau", eps=args.eps))
    raise ValidationError(f"unknown metric kind {args.kind!r}")


# ---------------------------------------------------------------------------
# example generators


def example_jump(eps: float, as_path: bool):
    y = [[0.0, 1.0], [0.0, -1.0]]
    beta = [0.5, 0.5]
    x_pos = [[-1.0, eps], [1.0, -eps]]
    if not as_path:
        return {
            "source": {"points": x_pos, "weights": [0.5, 0.5]},
            "target": {"points": y, "weights": beta},
            "cost": {"type": "p_norm", "p": 2.0},
        }
    x_neg = [[-1.0, -eps], [1.0, eps]]
    return {
        "source": {"points": x_pos, "weights": [0.5, 0.5]},
        "target": {"points": y, "weights": beta},
        "cost": {"type": "p_norm", "p": 2.0},
        "x1": x_neg,
        "y1": y,
        "samples": 64,
    }


def disc_points(grid: int) -> np.ndarray:
    """Centers of the grid cells over [-1, 1]^2 that fall inside the unit disc."""
    h = 2.0 / grid
    cs = -1.0 + h * (np.arange(grid) + 0.5)
    xx, yy = np.meshgrid(cs, cs)
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    return pts[np.einsum("ij,ij->i", pts, pts) <= 1.0]


def rotating_target(theta: float) -> np.ndarray:
    return np.array(
        [
            [math.sin(theta), math.cos(theta)],
            [math.sin(theta + math.pi), math.cos(theta + math.pi)],
        ]
    )


def example_disc(grid: int, theta: float):
    pts = disc_points(grid)
    m = len(pts)
    return {
        "source": {"points": [[float(a), float(b)] for a, b in pts],
                   "weights": [1.0 / m] * m},
        "target": {"points": [[float(a), float(b)] for a, b in rotating_target(theta)],
                   "weights": [0.5, 0.5]},
        "cost": {"type": "p_norm", "p": 2.0},
    }


def example_figure_cells():
    return {
        "source": {
            "points": [[1.0, 1.0], [-1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]],
            "weights": [0.25, 0.25, 0.25, 0.25],
        },
        "target": {
            "points": [[0.0, 1.0], [0.0, 0.0], [1.0, 0.0]],
            "weights": [1.0 / 3.0] * 3,
        },
        "cost": {"type": "correlation"},
    }


def two_cluster_instance(seed: int, separation: float = 10.0, cost: str = "p_norm"):
    """Two well-separated sub-problems glued into one instance.

    Per-cluster source and target masses match exactly, so no optimal plan
    crosses clusters; continuous weights make each cluster's own optimal
    support a spanning tree almost surely, giving a two-component optimal
    structure.
    """
    rng = np.random.default_rng(seed)
    sizes = rng.integers(1, 4, size=4)  # mA, nA, mB, nB
    mass_a = float(rng.uniform(0.3, 0.7))
    shift = np.array([separation, 0.0])

    def cluster(m, n, total, offset):
        xs = rng.uniform(-0.8, 0.8, size=(m, 2)) + offset
        ys = rng.uniform(-0.8, 0.8, size=(n, 2)) + offset
        wa = rng.uniform(0.5, 1.5, size=m)
        wb = rng.uniform(0.5, 1.5, size=n)
        return xs, ys, total * wa / wa.sum(), total * wb / wb.sum()

    xa, ya, wa, wsa = cluster(int(sizes[0]), int(sizes[1]), mass_a, np.zeros(2))
    xb, yb, wb, wsb = cluster(int(sizes[2]), int(sizes[3]), 1.0 - mass_a, shift)
    cost_obj = {"type": "p_norm", "p": 2.0} if cost == "p_norm" else {"type": "correlation"}
    return {
        "source": {
            "points": [[float(a), float(b)] for a, b in np.vstack([xa, xb])],
            "weights": [float(v) for v in np.concatenate([wa, wb])],
        },
        "target": {
            "points": [[float(a), float(b)] for a, b in np.vstack([ya, yb])],
            "weights": [float(v) for v in np.concatenate([wsa, wsb])],
        },
        "cost": cost_obj,
    }


# coordinates chosen to reproduce the glue figure's combinatorics: the start
# target has a doubled atom D, so the middle marginal splits both ways and
# the glue-composition is not unique
GLUE_COORDS = {
    "A": [-3.0, 1.4],
    "B": [-3.0, -1.4],
    "C": [-1.3, 0.9],
    "D": [-1.3, -1.1],
    "E": [3.0, 1.8],
    "F": [3.0, 0.0],
    "G": [3.0, -1.9],
}


def example_glue():
    c = GLUE_COORDS
    return {
        "source": {"points": [c["A"], c["B"]], "weights": [0.75, 0.25]},
        "target": {"points": [c["C"], c["D"], c["D"]], "weights": [0.5, 0.25, 0.25]},
        "cost": {"type": "p_norm", "p": 2.0},
        "x1": [c["A"], c["B"]],
        "y1": [c["E"], c["F"], c["G"]],
        "samples": 64,
    }


def cmd_example(args) -> str:
    name = args.name
    if name == "jump":
        return dumps(example_jump(args.eps, args.path_spec))
    if name == "disc":
        return dumps(example_disc(args.grid, args.theta))
    if name == "figure-cells":
        return dumps(example_figure_cells())
    if name == "two-cluster":
        return dumps(two_cluster_instance(args.seed, args.separation, args.cost))
    if name == "glue":
        return dumps(example_glue())
    raise ValidationError(f"unknown example {name!r}")


# ---------------------------------------------------------------------------
# argument plumbing


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="otstruct", description=__doc__)
    sub = ap.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("-o", "--output", default=None)
        p.add_argument("--tol-tie", type=float, default=None)
        p.add_argument("--tol-event", type=float, default=None)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("solve", help="solve a transport problem")
    p.add_argument("problem")
    p.add_argument("--oracle", action="store_true",
                   help="use the exact rational solver (size-capped)")
    common(p)

    p = sub.add_parser("analyze", help="uniqueness structure of the optimal set")
    p.add_argument("problem")
    p.add_argument("--full", action="store_true",
                   help="force the dual-set block on large instances")
    common(p)

    p = sub.add_parser("homotopy", help="track plans along a path spec")
    p.add_argument("path")
    p.add_argument("--samples", type=int, default=None)
    common(p)

    p = sub.add_parser("sweep", help="CSV of distances along a path")
    p.add_argument("path")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--max-support", type=int, default=1000)
    common(p)

    p = sub.add_parser("metrics", help="distances between measures, plans or maps")
    p.add_argument("--kind", choices=["measures", "plans", "maps", "tau"], required=True)
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--eps", type=float, default=1e-2)
    p.add_argument("--witness", action="store_true")
    common(p)

    p = sub.add_parser("example", help="emit a built-in example instance")
    p.add_argument("name", choices=["jump", "disc", "figure-cells", "two-cluster", "glue"])
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--grid", type=int, default=40)
    p.add_argument("--theta", type=float, default=0.2)
    p.add_argument("--separation", type=float, default=10.0)
    p.add_argument("--cost", choices=["p_norm", "correlation"], default="p_norm")
    p.add_argument("--path-spec", action="store_true",
                   help="emit a path spec instead of a problem where applicable")
    common(p)

    return ap


_DISPATCH = {
    "solve": cmd_solve,
    "analyze": cmd_analyze,
    "homotopy": cmd_homotopy,
    "sweep": cmd_sweep,
    "metrics": cmd_metrics,
    "example": cmd_example,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = _DISPATCH[args.subcommand](args)
    except InfeasibleProblemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OtstructError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _emit(text, args.output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
