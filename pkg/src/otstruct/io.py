"""JSON wire formats.

One problem schema feeds every CLI subcommand:

    {"source": {"points": [[..]..], "weights": [..]},
     "target": {...},
     "cost": {"type": "p_norm", "p": 2.0} | {"type": "correlation"}
             | {"type": "matrix", "values": [[..]..]}}

Path specs extend it with "x1", "y1" and "samples".  All indices are
0-based on the wire.  Serialization is deterministic: keys are sorted and
floats round-trip exactly through repr.
"""

from __future__ import annotations

import json

import numpy as np

from .core import (
    CorrelationCost,
    CostSpec,
    DiscreteMeasure,
    ExplicitCost,
    PNormCost,
    TransportProblem,
    ValidationError,
)
from .dualset import HalfSpaceSystem
from .homotopy import PathSpec, TrackReport
from .solver import Coupling, DualPair, Solution
from .structure import SupportGraph, UniquenessReport


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _floats(seq):
    return [float(v) for v in seq]


def _matrix(rows):
    return [_floats(r) for r in rows]


# -- measures and problems --------------------------------------------------


def measure_to_json(m: DiscreteMeasure) -> dict:
    return {"points": _matrix(m.points), "weights": _floats(m.weights)}


def measure_from_json(obj) -> DiscreteMeasure:
    try:
        return DiscreteMeasure(obj["points"], obj["weights"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed measure: {exc}") from exc


def cost_to_json(cost: CostSpec) -> dict:
    if isinstance(cost, PNormCost):
        return {"type": "p_norm", "p": float(cost.p)}
    if isinstance(cost, CorrelationCost):
        return {"type": "correlation"}
    return {"type": "matrix", "values": _matrix(cost.values)}


def cost_from_json(obj) -> CostSpec:
    try:
        kind = obj["type"]
        if kind == "p_norm":
            return PNormCost(float(obj["p"]))
        if kind == "correlation":
            return CorrelationCost()
        if kind == "matrix":
            return ExplicitCost(obj["values"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed cost spec: {exc}") from exc
    raise ValidationError(f"unknown cost type {obj.get('type')!r}")


def problem_to_json(p: TransportProblem) -> dict:
    return {
        "source": measure_to_json(p.source),
        "target": measure_to_json(p.target),
        "cost": cost_to_json(p.cost),
    }


def problem_from_json(obj) -> TransportProblem:
    try:
        src = measure_from_json(obj["source"])
        tgt = measure_from_json(obj["target"])
        cost = cost_from_json(obj["cost"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed problem: {exc}") from exc
    return TransportProblem(src, tgt, cost)


# -- solutions ---------------------------------------------------------------


def solution_to_json(s: Solution) -> dict:
    return {
        "value": float(s.value),
        "plan": [[i, j, float(m)] for i, j, m in s.plan.entries],
        "phi": _floats(s.dual.phi),
        "psi": _floats(s.dual.psi),
        "iterations": int(s.iterations),
    }


def solution_from_json(obj, dims) -> Solution:
    plan = Coupling([(i, j, m) for i, j, m in obj["plan"]], dims)
    return Solution(
        plan, DualPair(obj["phi"], obj["psi"]), float(obj["value"]), int(obj["iterations"])
    )


# -- graphs and reports -------------------------------------------------------


def graph_to_json(g: SupportGraph, kind: str) -> dict:
    if kind not in ("support", "tight", "g_gamma"):
        raise ValidationError(f"unknown graph kind {kind!r}")
    return {"m": g.m, "n": g.n, "edges": sorted([i, j] for i, j in g.edges), "kind": kind}


def graph_from_json(obj) -> SupportGraph:
    return SupportGraph(obj["m"], obj["n"], [(i, j) for i, j in obj["edges"]])


def uniqueness_report_to_json(r: UniquenessReport) -> dict:
    out = {
        "primal_unique": r.primal_unique,
        "dual_unique": r.dual_unique,
        "g_gamma": graph_to_json(r.g_gamma, "g_gamma"),
    }
    if not r.primal_unique:
        out["witness_cycle"] = [[i, j] for i, j in r.cycles_found[0].pairs]
    if not r.dual_unique:
        out["components"] = [
            {"sources": list(src), "targets": list(tgt)} for src, tgt in r.components
        ]
    return out


def halfspaces_to_json(h: HalfSpaceSystem) -> dict:
    return {
        "convention": "cost",
        "constraints": [[i, j, float(b)] for i, j, b in h.constraints],
    }


def intervals_to_json(intervals: dict) -> dict:
    return {f"{i}-{j}": [float(lo), float(hi)] for (i, j), (lo, hi) in sorted(intervals.items())}


# -- paths and track reports ---------------------------------------------------


def path_to_json(p: PathSpec) -> dict:
    return {
        "source": {"points": _matrix(p.x0), "weights": _floats(p.alpha)},
        "target": {"points": _matrix(p.y0), "weights": _floats(p.beta)},
        "cost": cost_to_json(p.cost),
        "x1": _matrix(p.x1),
        "y1": _matrix(p.y1),
        "samples": int(p.samples),
    }


def path_from_json(obj) -> PathSpec:
    try:
        return PathSpec(
            x0=obj["source"]["points"],
            x1=obj["x1"],
            y0=obj["target"]["points"],
            y1=obj["y1"],
            alpha=obj["source"]["weights"],
            beta=obj["target"]["weights"],
            cost=cost_from_json(obj["cost"]),
            samples=obj.get("samples", 64),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed path spec: {exc}") from exc


def track_report_to_json(r: TrackReport) -> dict:
    return {
        "events": [[lo, hi, kind] for lo, hi, kind in r.events],
        "persistent": r.persistent,
        "pattern": [[i, j, float(m)] for i, j, m in r.pattern.entries],
    }


def distance_to_json(distance: float, p: float, kind: str, witness=None, eps=None) -> dict:
    out = {"distance": float(distance), "p": float(p), "kind": kind}
    if eps is not None:
        out["eps"] = float(eps)
    if witness is not None:
        out["witness"] = [[i, j, float(m)] for i, j, m in witness.entries]
    return out
