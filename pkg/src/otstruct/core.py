"""Domain types, validation, cost evaluation, and tolerance policy.

All types here are immutable after construction and safe to share between
threads; every operation in this package is a pure function of its inputs.
Indices are 0-based throughout the code and on the wire.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np


class OtstructError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(OtstructError):
    """Input data violates a documented precondition."""


class InfeasibleProblemError(OtstructError):
    """The two marginals cannot be coupled (mass mismatch beyond tolerance)."""


class SizeCapError(OtstructError):
    """Instance exceeds a configured size cap."""


class InternalConsistencyError(OtstructError):
    """The library reached a state its own invariants forbid."""


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerance policy shared by every module.

    mass:  absolute slack for mass balance (marginal sums, glue middles).
    tie:   relative threshold deciding when two costs are tied; this is the
           central knob, since tightness detection is scale-free by design.
    event: target bracket width for homotopy event bisection.
    lp:    absolute-per-scale slack for dual feasibility checks.
    """

    mass: float = 1e-12
    tie: float = 1e-9
    event: float = 1e-10
    lp: float = 1e-10

    def __post_init__(self):
        for name in ("mass", "tie", "event", "lp"):
            v = getattr(self, name)
            if not (v > 0 and np.isfinite(v)):
                raise ValidationError(f"tolerance {name!r} must be strictly positive, got {v}")

    def tied(self, a: float, b: float) -> bool:
        """Two costs a, b are tied when |a-b| <= tie * (1 + max(|a|,|b|))."""
        return abs(a - b) <= self.tie * (1.0 + max(abs(a), abs(b)))

    def cost_scale(self, cost: np.ndarray) -> float:
        """Scale used by relative comparisons: 1 + max |C_ij|."""
        if cost.size == 0:
            return 1.0
        return 1.0 + float(np.max(np.abs(cost)))


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted point cloud in R^d with strictly positive weights summing to 1.

    Points need not be distinct: coinciding support points are permitted and
    never merged silently, because coupling-level non-uniqueness can coexist
    with measure-level uniqueness when atoms coincide.  Use :func:`coalesce`
    to merge duplicates explicitly.
    """

    points: np.ndarray
    weights: np.ndarray

    def __init__(self, points, weights, tol: Tolerances = DEFAULT_TOL):
        points = np.asarray(points, dtype=np.float64)
        weights = np.asarray(weights, dtype=np.float64)
        if points.ndim == 1:
            points = points[:, None]
        if points.ndim != 2 or points.shape[1] < 1:
            raise ValidationError("points must be an (M, d) array with d >= 1")
        if weights.ndim != 1 or weights.shape[0] != points.shape[0]:
            raise ValidationError("weights must be a length-M vector matching points")
        if points.shape[0] == 0:
            raise ValidationError("measure needs at least one atom")
        if not np.isfinite(points).all() or not np.isfinite(weights).all():
            raise ValidationError("points and weights must be finite")
        if np.any(weights <= 0):
            raise ValidationError("all weights must be strictly positive")
        defect = abs(float(weights.sum()) - 1.0)
        if defect > tol.mass:
            raise ValidationError(f"weights must sum to 1 (defect {defect:.3e} > {tol.mass:.3e})")
        points.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def diagnostics(self, tol: Tolerances = DEFAULT_TOL) -> dict:
        return validate(self.points, self.weights, tol)


def validate(points, weights, tol: Tolerances = DEFAULT_TOL) -> dict:
    """Diagnostic report on raw measure data.  Never raises.

    Reports the mass defect, indices of nonpositive weights, and pairs of
    exactly coinciding points (informational, not an error).
    """
    points = np.asarray(points, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    report: dict = {
        "mass_defect": abs(float(weights.sum()) - 1.0),
        "nonpositive_weights": [int(i) for i in np.nonzero(weights <= 0)[0]],
        "coinciding_points": [],
        "ok": True,
    }
    seen: dict = {}
    for i in range(points.shape[0]):
        key = points[i].tobytes()
        if key in seen:
            report["coinciding_points"].append((seen[key], i))
        else:
            seen[key] = i
    report["ok"] = report["mass_defect"] <= tol.mass and not report["nonpositive_weights"]
    return report


def coalesce(measure: DiscreteMeasure) -> DiscreteMeasure:
    """Merge exactly coinciding points by summing their weights."""
    index: dict = {}
    points: list = []
    weights: list = []
    for i in range(measure.size):
        key = measure.points[i].tobytes()
        if key in index:
            weights[index[key]] += measure.weights[i]
        else:
            index[key] = len(points)
            points.append(measure.points[i])
            weights.append(float(measure.weights[i]))
    return DiscreteMeasure(np.array(points), np.array(weights))


@dataclass(frozen=True)
class PNormCost:
    """c(x, y) = ||x - y||^p with p > 1 (strict convexity is load-bearing)."""

    p: float

    def __post_init__(self):
        if not (np.isfinite(self.p) and self.p > 1):
            raise ValidationError(f"PNormCost requires p > 1, got {self.p}")


@dataclass(frozen=True)
class CorrelationCost:
    """c(x, y) = -<x|y>: minimizing it maximizes correlation.

    Stored as the signed cost so one minimizing solver convention serves
    every cost kind.
    """


@dataclass(frozen=True)
class ExplicitCost:
    """A fully spelled out M x N cost matrix."""

    values: np.ndarray

    def __init__(self, values):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise ValidationError("explicit cost must be a 2-d matrix")
        if not np.isfinite(values).all():
            raise ValidationError("explicit cost entries must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


CostSpec = Union[PNormCost, CorrelationCost, ExplicitCost]


@dataclass(frozen=True)
class TransportProblem:
    """A pair of discrete measures together with a cost specification."""

    source: DiscreteMeasure
    target: DiscreteMeasure
    cost: CostSpec

    def __post_init__(self):
        if isinstance(self.cost, (PNormCost, CorrelationCost)):
            if self.source.dim != self.target.dim:
                raise ValidationError(
                    f"dimension mismatch: source d={self.source.dim}, target d={self.target.dim}"
                )
        elif isinstance(self.cost, ExplicitCost):
            if self.cost.values.shape != (self.source.size, self.target.size):
                raise ValidationError(
                    f"explicit cost shape {self.cost.values.shape} does not match "
                    f"({self.source.size}, {self.target.size})"
                )
        else:
            raise ValidationError(f"unknown cost spec {self.cost!r}")

    @property
    def shape(self) -> tuple:
        return (self.source.size, self.target.size)


def swap(problem: TransportProblem) -> TransportProblem:
    """Exchange source and target (explicit matrices are transposed)."""
    cost = problem.cost
    if isinstance(cost, ExplicitCost):
        cost = ExplicitCost(cost.values.T)
    return TransportProblem(problem.target, problem.source, cost)


def _pairwise_sq_dists(X: np.ndarray, Y: np.ndarray, block: int = 512) -> np.ndarray:
    """Squared euclidean distances, row-blocked to bound peak memory."""
    M = X.shape[0]
    out = np.empty((M, Y.shape[0]), dtype=np.float64)
    for lo in range(0, M, block):
        hi = min(lo + block, M)
        diff = X[lo:hi, None, :] - Y[None, :, :]
        np.einsum("ijk,ijk->ij", diff, diff, out=out[lo:hi])
    return out


def cost_matrix(problem: TransportProblem) -> np.ndarray:
    """Evaluate the cost at every source/target pair.

    Entry (i, j) is the cost between source point i and target point j; the
    result is finite everywhere.
    """
    X, Y = problem.source.points, problem.target.points
    cost = problem.cost
    if isinstance(cost, PNormCost):
        d2 = _pairwise_sq_dists(X, Y)
        if cost.p == 2:
            return d2
        # clip guards the sqrt against -0.0 rounding
        return np.clip(d2, 0.0, None) ** (cost.p / 2.0)
    if isinstance(cost, CorrelationCost):
        return -(X @ Y.T)
    return cost.values.copy()


def cost_matrix_exact(problem: TransportProblem) -> list:
    """Cost matrix in exact rational arithmetic (list of lists of Fraction).

    PNorm costs with even integer p and correlation costs are evaluated
    exactly from the (binary-rational) coordinates.  Any other cost kind is
    represented by the exact rational value of its float cost entries, i.e.
    the float-rounded problem is solved exactly.
    """
    cost = problem.cost
    M, N = problem.shape
    if isinstance(cost, CorrelationCost):
        X = [[Fraction(v) for v in row] for row in problem.source.points]
        Y = [[Fraction(v) for v in row] for row in problem.target.points]
        return [[-sum(a * b for a, b in zip(X[i], Y[j])) for j in range(N)] for i in range(M)]
    if isinstance(cost, PNormCost) and float(cost.p).is_integer() and int(cost.p) % 2 == 0:
        half = int(cost.p) // 2
        X = [[Fraction(v) for v in row] for row in problem.source.points]
        Y = [[Fraction(v) for v in row] for row in problem.target.points]
        return [
            [sum((a - b) ** 2 for a, b in zip(X[i], Y[j])) ** half for j in range(N)]
            for i in range(M)
        ]
    C = cost_matrix(problem)
    return [[Fraction(float(C[i, j])) for j in range(N)] for i in range(M)]


def problem_from_arrays(
    source_points, source_weights, target_points, target_weights, cost: CostSpec
) -> TransportProblem:
    return TransportProblem(
        DiscreteMeasure(source_points, source_weights),
        DiscreteMeasure(target_points, target_weights),
        cost,
    )
