"""Wasserstein distances between measures, between plans, and between maps.

Plans are compared as measures on the product space R^d x R^d: the support
of a coupling embeds as the points x_i (+) y_j with the coupling masses as
weights, and distance computations route every pair back through the same
transport solver.  Everything here is finitely supported; no smoothing.
"""

from __future__ import annotations

import math

import numpy as np

from .core import (
    DEFAULT_TOL,
    DiscreteMeasure,
    ExplicitCost,
    PNormCost,
    SizeCapError,
    Tolerances,
    TransportProblem,
    ValidationError,
    _pairwise_sq_dists,
)
from .solver import Coupling, Solution, solve

PRODUCT_ENTRY_CAP = 4_000_000


def wp(mu0: DiscreteMeasure, mu1: DiscreteMeasure, p: float,
       tol: Tolerances = DEFAULT_TOL) -> float:
    """p-Wasserstein distance: p-th root of the optimal ||x-y||^p cost.

    p = 1 is allowed here even though strictly convex costs elsewhere require
    p > 1; the distance matrix is passed explicitly in that case.
    """
    if mu0.dim != mu1.dim:
        raise ValidationError("measures live in different dimensions")
    if p < 1:
        raise ValidationError("wp needs p >= 1")
    if p > 1:
        problem = TransportProblem(mu0, mu1, PNormCost(p))
    else:
        d = np.sqrt(np.clip(_pairwise_sq_dists(mu0.points, mu1.points), 0.0, None))
        problem = TransportProblem(mu0, mu1, ExplicitCost(d))
    value = solve(problem, tol).value
    return max(value, 0.0) ** (1.0 / p)


def plan_as_measure(plan: Coupling, problem: TransportProblem) -> DiscreteMeasure:
    """The coupling viewed as a measure on the product space R^{2d}."""
    X, Y = problem.source.points, problem.target.points
    pts = [np.concatenate([X[i], Y[j]]) for i, j, _ in plan.entries]
    w = np.array([m for _, _, m in plan.entries])
    return DiscreteMeasure(np.array(pts), w / w.sum())


def wp_plans(plan0: Coupling, problem0: TransportProblem,
             plan1: Coupling, problem1: TransportProblem, p: float,
             tol: Tolerances = DEFAULT_TOL, cap: int = PRODUCT_ENTRY_CAP) -> float:
    """W_p between two plans, each seen as a measure on R^d x R^d."""
    if problem0.source.dim != problem1.source.dim or problem0.target.dim != problem1.target.dim:
        raise ValidationError("plans embed into different product dimensions")
    n0, n1 = len(plan0.entries), len(plan1.entries)
    if n0 * n1 > cap:
        raise SizeCapError(f"product support {n0}x{n1} exceeds the cap {cap}")
    return wp(plan_as_measure(plan0, problem0), plan_as_measure(plan1, problem1), p, tol)


def plan_to_map(plan: Coupling, mode: str = "strict") -> np.ndarray:
    """Assignment i -> j induced by a plan whose rows do not split.

    ``mode="strict"`` rejects any mass-splitting row; ``mode="round"``
    assigns each row to its heaviest target instead (useful when a single
    boundary atom splits for mass balance).
    """
    M, _ = plan.dims
    best = {}
    counts = np.zeros(M, dtype=int)
    for i, j, m in plan.entries:
        counts[i] += 1
        if i not in best or m > best[i][1]:
            best[i] = (j, m)
    if mode == "strict" and int(counts.max(initial=0)) > 1:
        rows = [int(i) for i in np.nonzero(counts > 1)[0]]
        raise ValidationError(f"plan splits mass on rows {rows}; not induced by a map")
    if len(best) != M:
        raise ValidationError("plan leaves some source rows empty")
    return np.array([best[i][0] for i in range(M)], dtype=int)


def map_lp_distance(t0, t1, source: DiscreteMeasure,
                    target0: DiscreteMeasure, target1: DiscreteMeasure, p: float) -> float:
    """(sum_i alpha_i ||y0_{t0(i)} - y1_{t1(i)}||^p)^(1/p) for two total maps."""
    t0 = np.asarray(t0, dtype=int)
    t1 = np.asarray(t1, dtype=int)
    if t0.shape != (source.size,) or t1.shape != (source.size,):
        raise ValidationError("assignments must be total maps on the source indices")
    d = target0.points[t0] - target1.points[t1]
    dist = np.sqrt(np.einsum("ij,ij->i", d, d))
    return float((source.weights @ dist**p) ** (1.0 / p))


def tau_c_eps(plan0: Coupling, problem0: TransportProblem,
              plan1: Coupling, problem1: TransportProblem, eps: float,
              tol: Tolerances = DEFAULT_TOL, cap: int = PRODUCT_ENTRY_CAP) -> float:
    """Optimal transport cost between plans for the anisotropic quadratic
    cost ||x0 - x1||^2 + eps * ||y0 - y1||^2.

    At eps = 1 this is the squared product-space 2-Wasserstein distance;
    as eps -> 0 only the source motion is charged, so plans sharing a source
    glue through the identity for free.
    """
    if eps < 0:
        raise ValidationError("eps must be nonnegative")
    n0, n1 = len(plan0.entries), len(plan1.entries)
    if n0 * n1 > cap:
        raise SizeCapError(f"product support {n0}x{n1} exceeds the cap {cap}")
    m0 = plan_as_measure(plan0, problem0)
    m1 = plan_as_measure(plan1, problem1)
    d = problem0.source.dim
    cx = _pairwise_sq_dists(m0.points[:, :d], m1.points[:, :d])
    cy = _pairwise_sq_dists(m0.points[:, d:], m1.points[:, d:])
    problem = TransportProblem(m0, m1, ExplicitCost(cx + eps * cy))
    return float(solve(problem, tol).value)


def weighted_l2_norm(phi, weights) -> float:
    """(sum_i w_i phi_i^2)^(1/2): the source-weighted euclidean norm on
    potential vectors."""
    phi = np.asarray(phi, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    return float(math.sqrt(w @ (phi * phi)))
