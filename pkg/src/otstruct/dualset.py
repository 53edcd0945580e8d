"""The polyhedron of optimal source potentials, explicitly.

A source potential phi is optimal iff its c-transform pairing attains the
optimal value, iff phi satisfies one difference constraint per ordered pair
of source indices:

    phi_i - phi_k >= max over assignable targets j of S_i of (C_ij - C_kj).

Every constraint direction e_i - e_k is orthogonal to the all-ones vector,
reflecting invariance of potentials under a common additive constant.  The
module works in this cost convention (phi_i + psi_j <= C_ij throughout); a
``to_legendre`` view converts to the convex-conjugate normalization used by
quadratic-cost formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .core import (
    DEFAULT_TOL,
    CorrelationCost,
    InternalConsistencyError,
    PNormCost,
    Tolerances,
    TransportProblem,
    ValidationError,
    cost_matrix,
)
from .solver import Coupling, DualPair
from .structure import SupportGraph, tight_graph


@dataclass(frozen=True)
class AssignableSets:
    """For each source index i, the target indices it feeds in some optimal plan."""

    s: tuple  # tuple of frozensets

    def __init__(self, s):
        sets = tuple(frozenset(int(j) for j in js) for js in s)
        for i, js in enumerate(sets):
            if not js:
                raise InternalConsistencyError(
                    f"assignable set of source {i} is empty; every source index "
                    "carries mass in every optimal plan"
                )
        object.__setattr__(self, "s", sets)


@dataclass(frozen=True)
class HalfSpaceSystem:
    """Difference constraints phi_i - phi_j >= h on source potentials.

    One constraint per ordered pair (i, j), i != j, finite bound; stored in
    the cost convention.
    """

    m: int
    constraints: tuple  # ((i, j, bound), ...) sorted

    def bound(self, i, j) -> float:
        return self._index[(i, j)]

    @property
    def _index(self):
        idx = getattr(self, "_cache", None)
        if idx is None:
            idx = {(i, j): h for i, j, h in self.constraints}
            object.__setattr__(self, "_cache", idx)
        return idx

    def max_violation(self, phi) -> float:
        """Largest amount by which phi fails a constraint (<= 0 inside)."""
        phi = np.asarray(phi, dtype=np.float64)
        worst = -math.inf
        for i, j, h in self.constraints:
            worst = max(worst, h - (phi[i] - phi[j]))
        return worst if self.constraints else 0.0

    def is_member(self, phi, tol: Tolerances, scale: float) -> bool:
        return self.max_violation(phi) <= tol.tie * scale


def assignable_sets(g: SupportGraph) -> AssignableSets:
    """Row view of the union-of-optimal-supports graph."""
    s = [set() for _ in range(g.m)]
    for i, j in g.edges:
        s[i].add(j)
    return AssignableSets(s)


def halfspaces(problem: TransportProblem, sets: AssignableSets) -> HalfSpaceSystem:
    """Bounds h(i, j) = max over j' in S_i of (C_ij' - C_jj')."""
    C = cost_matrix(problem)
    M = problem.source.size
    if len(sets.s) != M:
        raise ValidationError("assignable sets do not match the source size")
    constraints = []
    for i in range(M):
        cols = sorted(sets.s[i])
        diffs = C[i, cols]
        for j in range(M):
            if j == i:
                continue
            constraints.append((i, j, float(np.max(diffs - C[j, cols]))))
    return HalfSpaceSystem(M, tuple(sorted(constraints)))


def ctransform(problem: TransportProblem, phi) -> np.ndarray:
    """psi_j = min_i (C_ij - phi_i): the tightest feasible partner potential."""
    C = cost_matrix(problem)
    phi = np.asarray(phi, dtype=np.float64)
    return np.min(C - phi[:, None], axis=0)


def ctransform_reverse(problem: TransportProblem, psi) -> np.ndarray:
    """phi_i = min_j (C_ij - psi_j)."""
    C = cost_matrix(problem)
    psi = np.asarray(psi, dtype=np.float64)
    return np.min(C - psi[None, :], axis=1)


def dual_objective(problem: TransportProblem, phi) -> float:
    """Value of the pair (phi, phi^c) in the dual objective."""
    psi = ctransform(problem, phi)
    return float(
        np.asarray(phi) @ problem.source.weights + psi @ problem.target.weights
    )


def is_optimal_potential(problem: TransportProblem, phi, value: float,
                         tol: Tolerances = DEFAULT_TOL) -> bool:
    """phi is an optimal source potential iff its c-transform pair attains
    ``value`` (the known optimal cost) within the tie tolerance."""
    scale = tol.cost_scale(cost_matrix(problem))
    return abs(dual_objective(problem, phi) - value) <= tol.tie * scale


def phi_interval_hull(system: HalfSpaceSystem, tol: Tolerances = DEFAULT_TOL) -> dict:
    """Exact range of phi_i - phi_j over the optimal set, per unordered pair.

    The raw pairwise bounds [h(i,j), -h(j,i)] are not tight when constraints
    chain through intermediate indices, so the difference-constraint system
    is closed under shortest paths (min-plus) first.  A negative closure
    diagonal would mean the system is infeasible, which cannot happen for
    bounds built from an actual optimal structure.  Keys are (i, j) with
    i < j; an interval of zero width pins the difference.
    """
    M = system.m
    if M == 1:
        return {}
    W = np.full((M, M), math.inf)
    np.fill_diagonal(W, 0.0)
    for i, j, h in system.constraints:
        W[i, j] = -h  # phi_j - phi_i <= -h(i, j)
    for k in range(M):
        np.minimum(W, W[:, k : k + 1] + W[k : k + 1, :], out=W)
    if float(np.min(np.diagonal(W))) < -tol.tie:
        raise InternalConsistencyError("halfspace system is infeasible (negative cycle)")
    out = {}
    for i in range(M):
        for j in range(i + 1, M):
            lo, hi = float(-W[i, j]), float(W[j, i])  # range of phi_i - phi_j
            if lo > hi + tol.tie:
                raise InternalConsistencyError(f"empty interval for pair ({i},{j})")
            out[(i, j)] = (lo, max(lo, hi))
    return out


def sample_phi_vertices(system: HalfSpaceSystem, count: int, seed: int, anchor: int = 0):
    """Vertices of the optimal set sliced by {phi_anchor = 0}.

    Each sample maximizes a random linear objective over the difference
    constraints; the polytope is bounded because every ordered pair carries a
    finite bound, so the LP always returns a vertex.
    """
    M = system.m
    if M == 1:
        return [np.zeros(1)] * min(count, 1)
    rows = []
    rhs = []
    for i, j, h in system.constraints:
        row = np.zeros(M)
        row[j], row[i] = 1.0, -1.0  # phi_j - phi_i <= -h
        rows.append(row)
        rhs.append(-h)
    A_ub = np.array(rows)
    b_ub = np.array(rhs)
    A_eq = np.zeros((1, M))
    A_eq[0, anchor] = 1.0
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        c = rng.normal(size=M)
        res = linprog(
            -c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[0.0],
            bounds=[(None, None)] * M, method="highs",
        )
        if not res.success:
            raise InternalConsistencyError(f"vertex sampling LP failed: {res.message}")
        out.append(res.x)
    return out


def centered_dual(problem: TransportProblem, system: HalfSpaceSystem,
                  samples: int = 8, seed: int = 0) -> DualPair:
    """An optimal dual pair in the relative interior of the optimal dual set.

    The solver's dual is always an extreme point (its basis edges are all
    tight), so its tight graph is connected by construction and hides the
    component structure of the optimal set.  Averaging sampled vertices of
    the potential polytope and c-transforming exposes it: an edge is tight
    for the centered dual iff it is tight across the whole optimal set.
    """
    verts = sample_phi_vertices(system, samples, seed)
    phi = np.mean(verts, axis=0)
    return DualPair(phi, ctransform(problem, phi))


def is_extreme_dual(problem: TransportProblem, dual: DualPair,
                    tol: Tolerances = DEFAULT_TOL) -> bool:
    """A dual pair with phi_0 = 0 is a vertex of the sliced dual polyhedron
    iff its tight graph is connected."""
    if abs(float(dual.phi[0])) > tol.lp * tol.cost_scale(cost_matrix(problem)):
        raise ValidationError("extremality is defined on the slice phi_0 = 0")
    return tight_graph(problem, dual, tol).is_connected()


def to_legendre(problem: TransportProblem, phi) -> np.ndarray:
    """Convert a cost-convention potential to the convex-conjugate view.

    For the correlation cost the conversion is a sign flip; for the squared
    euclidean cost it is (||x_i||^2 - phi_i) / 2, the potential whose
    conjugate's gradient pushes source onto target.  Differences of
    potentials, and hence diameters of the optimal set, pick up a factor 1
    or 1/2 respectively.
    """
    phi = np.asarray(phi, dtype=np.float64)
    if isinstance(problem.cost, CorrelationCost):
        return -phi
    if isinstance(problem.cost, PNormCost) and problem.cost.p == 2:
        sq = np.einsum("ij,ij->i", problem.source.points, problem.source.points)
        return (sq - phi) / 2.0
    raise ValidationError("legendre view needs correlation or squared euclidean cost")


def diameter_bound_two_components(problem: TransportProblem, g: SupportGraph) -> float:
    """Upper bound on the sup-norm diameter (mod constants) of the optimal
    potentials in the legendre view, when the union graph has exactly two
    components.

    Equals half the minimum of <x1 - x0 | y1 - y0> over support pairs
    (x0, y0) in one component and (x1, y1) in the other; nonnegative by
    cyclical monotonicity.
    """
    if not isinstance(problem.cost, (CorrelationCost,)) and not (
        isinstance(problem.cost, PNormCost) and problem.cost.p == 2
    ):
        raise ValidationError("diameter bound needs correlation or squared euclidean cost")
    comps = g.components()
    if len(comps) != 2:
        raise ValidationError(f"expected exactly two components, found {len(comps)}")
    comp_of_src = {}
    for k, (src, _) in enumerate(comps):
        for i in src:
            comp_of_src[i] = k
    sides = ([], [])
    for i, j in g.edges:
        sides[comp_of_src[i]].append((i, j))
    X, Y = problem.source.points, problem.target.points
    best = math.inf
    for i0, j0 in sides[0]:
        for i1, j1 in sides[1]:
            best = min(best, float((X[i1] - X[i0]) @ (Y[j1] - Y[j0])))
    return 0.5 * best


def quotient_sup_distance(phi0, phi1) -> float:
    """inf over constants of ||phi0 - phi1 - constant||_inf."""
    d = np.asarray(phi0, dtype=np.float64) - np.asarray(phi1, dtype=np.float64)
    return float((d.max() - d.min()) / 2.0)
