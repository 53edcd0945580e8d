"""Plans along affine interpolations of support points.

When support points move continuously, weights stay fixed, no two points of
the same side cross at interior times, and the optimizer stays unique, then
one fixed coupling matrix is optimal along the whole path: structure
persists until a tie forms.  This module samples such paths, brackets the
parameters where persistence breaks, builds glue-compositions through a
common marginal, and checks the two-sided stability bounds with constants
min/max(1, 2^(p/2-1)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DEFAULT_TOL,
    CostSpec,
    DiscreteMeasure,
    PNormCost,
    Tolerances,
    TransportProblem,
    ValidationError,
)
from .metrics import wp, wp_plans
from .solver import Coupling, Solution, reduced_costs, solve
from .structure import g_gamma


@dataclass(frozen=True)
class PathSpec:
    """Affine motion of support points with weights fixed at both ends."""

    x0: np.ndarray
    x1: np.ndarray
    y0: np.ndarray
    y1: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    cost: CostSpec
    samples: int = 64

    def __init__(self, x0, x1, y0, y1, alpha, beta, cost, samples=64):
        x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
        x1 = np.atleast_2d(np.asarray(x1, dtype=np.float64))
        y0 = np.atleast_2d(np.asarray(y0, dtype=np.float64))
        y1 = np.atleast_2d(np.asarray(y1, dtype=np.float64))
        alpha = np.asarray(alpha, dtype=np.float64)
        beta = np.asarray(beta, dtype=np.float64)
        if x0.shape != x1.shape or y0.shape != y1.shape:
            raise ValidationError("endpoint point lists must have matching shapes")
        if x0.shape[1] != y0.shape[1]:
            raise ValidationError("source and target dimensions differ")
        if alpha.shape[0] != x0.shape[0] or beta.shape[0] != y0.shape[0]:
            raise ValidationError("weights must match the point counts")
        if samples < 2:
            raise ValidationError("need at least two samples")
        for name, arr in (("x0", x0), ("x1", x1), ("y0", y0), ("y1", y1)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        alpha.setflags(write=False)
        beta.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "samples", int(samples))

    def points_at(self, t: float):
        return (1 - t) * self.x0 + t * self.x1, (1 - t) * self.y0 + t * self.y1

    def problem_at(self, t: float) -> TransportProblem:
        X, Y = self.points_at(t)
        return TransportProblem(
            DiscreteMeasure(X, self.alpha), DiscreteMeasure(Y, self.beta), self.cost
        )

    def endpoint_measures(self):
        return (
            DiscreteMeasure(self.x0, self.alpha),
            DiscreteMeasure(self.x1, self.alpha),
            DiscreteMeasure(self.y0, self.beta),
            DiscreteMeasure(self.y1, self.beta),
        )


@dataclass(frozen=True)
class CrossingEvent:
    side: str  # "source" or "target"
    i: int
    j: int
    t: float
    min_distance: float


@dataclass(frozen=True)
class TrackReport:
    events: tuple  # (t_low, t_high, kind)
    persistent: bool
    pattern: Coupling
    sample_ts: tuple
    margins: tuple  # uniqueness margin per sample (inf when every edge is optimal)

    def __post_init__(self):
        if self.persistent and any(k != "crossing" and 0.0 < lo and hi < 1.0
                                   for lo, hi, k in self.events):
            raise ValidationError("a persistent report cannot carry interior events")


def noncrossing_check(path: PathSpec, tol: Tolerances = DEFAULT_TOL):
    """Pairs of same-side points that meet at an interior time.

    For affine paths the squared pairwise distance is a quadratic in t, so
    the interior minimum is closed-form.  Endpoints are exempt: splitting
    mass on departure or arrival is allowed.
    """
    events = []
    coord_scale = 1.0 + max(
        float(np.max(np.abs(a))) if a.size else 0.0
        for a in (path.x0, path.x1, path.y0, path.y1)
    )
    threshold = tol.tie * coord_scale
    for side, p0, p1 in (("source", path.x0, path.x1), ("target", path.y0, path.y1)):
        n = p0.shape[0]
        for i in range(n):
            for j in range(i + 1, n):
                u = p0[i] - p0[j]
                v = p1[i] - p1[j]
                dv = v - u
                denom = float(dv @ dv)
                if denom == 0.0:
                    t_star = 0.5  # constant separation along the path
                else:
                    t_star = -float(u @ dv) / denom
                if not (0.0 < t_star < 1.0):
                    continue
                w = u + t_star * dv
                dist = math.sqrt(float(w @ w))
                if dist <= threshold:
                    events.append(CrossingEvent(side, i, j, t_star, dist))
    return events


def _state(path: PathSpec, t: float, tol: Tolerances):
    problem = path.problem_at(t)
    sol = solve(problem, tol)
    g = g_gamma(problem, sol, tol)
    unique = g.is_acyclic()
    rc = reduced_costs(problem, sol.dual)
    outside = [rc[i, j] for i in range(rc.shape[0]) for j in range(rc.shape[1])
               if (i, j) not in g.edges]
    margin = float(min(outside)) if outside else math.inf
    return sol, unique, margin


def _patterns_equal(s0: Solution, s1: Solution, tol: Tolerances) -> bool:
    e0, e1 = s0.plan.entries, s1.plan.entries
    if len(e0) != len(e1):
        return False
    for (i0, j0, m0), (i1, j1, m1) in zip(e0, e1):
        if i0 != i1 or j0 != j1 or abs(m0 - m1) > tol.mass:
            return False
    return True


def _coalesced_unique(path: PathSpec, t: float, tol: Tolerances) -> bool:
    """Uniqueness of the measure-level problem at t.

    Support points may coincide at the endpoints (mass splitting on
    departure or arrival), which makes the index-level LP degenerate even
    when the problem on merged atoms has a single optimal plan; the verdict
    that matters there is the merged one.
    """
    from .core import DiscreteMeasure, TransportProblem, coalesce

    prob = path.problem_at(t)
    merged = TransportProblem(coalesce(prob.source), coalesce(prob.target), prob.cost)
    sol = solve(merged, tol)
    return g_gamma(merged, sol, tol).is_acyclic()


def _pattern_optimal_at(path: PathSpec, t: float, pattern: Coupling, tol: Tolerances) -> bool:
    """Does the glued pattern attain the optimal value at parameter t?"""
    from .core import cost_matrix

    problem = path.problem_at(t)
    C = cost_matrix(problem)
    glued = float(sum(C[i, j] * m for i, j, m in pattern.entries))
    opt = solve(problem, tol).value
    return abs(glued - opt) <= tol.tie * tol.cost_scale(C)


def _bisect_change(path, lo, hi, predicate, value_at_lo, tol):
    """Shrink [lo, hi] around the flip of ``predicate`` to width tol.event.

    ``predicate`` maps a solved state to a bool and is assumed to flip once
    inside the bracket, taking ``value_at_lo`` at the low end.
    """
    while hi - lo > tol.event:
        mid = 0.5 * (lo + hi)
        state = _state(path, mid, tol)
        if predicate(state) == value_at_lo:
            lo = mid
        else:
            hi = mid
    return lo, hi


def track(path: PathSpec, tol: Tolerances = DEFAULT_TOL) -> TrackReport:
    """Solve along the sample grid and bracket structure changes.

    Interior samples are compared by plan pattern (support with masses) and
    uniqueness verdict; any change between neighbours is bisected down to a
    bracket of width tol.event.  At the two endpoints coinciding support
    points are allowed, so the endpoint checks are: the merged-atom problem
    is unique, and the interior pattern glued to the endpoint attains the
    endpoint's optimal value.  Events narrower than the grid spacing can
    hide between samples, but a missed vertex change would leave a pattern
    mismatch, which is also checked.
    """
    ts = [float(t) for t in np.linspace(0.0, 1.0, path.samples)]
    states = [_state(path, t, tol) for t in ts]
    n = len(ts)
    interior = list(range(1, n - 1)) if n >= 4 else list(range(n))
    events = []
    # interior scan: pattern flips localize vertex changes exactly, the
    # uniqueness flag is the fallback when the same vertex stays optimal
    for a, b in zip(interior[:-1], interior[1:]):
        sol_a, uniq_a, _ = states[a]
        sol_b, uniq_b, _ = states[b]
        same = _patterns_equal(sol_a, sol_b, tol)
        if uniq_a and uniq_b and same:
            continue
        if not uniq_a:
            events.append((ts[a], ts[a], "uniqueness_lost"))
            continue
        if same:
            pred = lambda st: st[1]  # bisect the uniqueness verdict
        else:
            pred = lambda st, ref=sol_a: _patterns_equal(ref, st[0], tol)
        lo, hi = _bisect_change(path, ts[a], ts[b], pred, True, tol)
        events.append((lo, hi, "uniqueness_lost"))
    if interior and not states[interior[-1]][1]:
        k = interior[-1]
        events.append((ts[k], ts[k], "uniqueness_lost"))
    pattern = states[interior[0]][0].plan
    # endpoint checks (skipped when the grid is too small to have interior)
    if n >= 4:
        for k, nbr in ((0, interior[0]), (n - 1, interior[-1])):
            sol_k, uniq_k, _ = states[k]
            sol_nbr = states[nbr][0]
            if uniq_k and _patterns_equal(sol_k, sol_nbr, tol):
                continue
            healthy = _coalesced_unique(path, ts[k], tol) and _pattern_optimal_at(
                path, ts[k], sol_nbr.plan, tol
            )
            if not healthy:
                pred = lambda st, ref=sol_nbr: _patterns_equal(ref, st[0], tol)
                if k == 0:
                    lo, hi = _bisect_change(path, ts[0], ts[nbr], pred, False, tol)
                else:
                    lo, hi = _bisect_change(path, ts[nbr], ts[k], pred, True, tol)
                events.append((lo, hi, "uniqueness_lost"))
    for c in noncrossing_check(path, tol):
        events.append((c.t, c.t, "crossing"))
    events.sort()
    persistent = not events and all(states[k][1] for k in interior)
    return TrackReport(
        events=tuple(events),
        persistent=persistent,
        pattern=pattern,
        sample_ts=tuple(ts),
        margins=tuple(m for _, _, m in states),
    )


def glue_composition(gamma0: Coupling, pi: Coupling, tol: Tolerances = DEFAULT_TOL) -> Coupling:
    """Chain two couplings through their common middle marginal.

    Returns the disintegration glueing mass(i, k) = sum_j g0(i, j) pi(j, k)
    / mid(j), whose marginals are exactly gamma0's rows and pi's columns.
    Other glueings can exist; see :func:`glue_has_alternatives`.
    """
    if gamma0.dims[1] != pi.dims[0]:
        raise ValidationError("middle dimensions do not match")
    mid0 = gamma0.col_sums()
    mid1 = pi.row_sums()
    gap = float(np.max(np.abs(mid0 - mid1)))
    if gap > tol.mass:
        raise ValidationError(f"middle marginals disagree by {gap:.3e}")
    out = {}
    pi_rows: dict = {}
    for j, k, m in pi.entries:
        pi_rows.setdefault(j, []).append((k, m))
    for i, j, m in gamma0.entries:
        for k, w in pi_rows.get(j, ()):
            out[(i, k)] = out.get((i, k), 0.0) + m * w / mid0[j]
    entries = [(i, k, m) for (i, k), m in out.items() if m > tol.mass]
    return Coupling(entries, (gamma0.dims[0], pi.dims[1]))


def glue_has_alternatives(gamma0: Coupling, pi: Coupling) -> bool:
    """True when some middle index splits mass on both sides, so glueings
    other than the disintegration one exist."""
    left = np.zeros(gamma0.dims[1], dtype=int)
    right = np.zeros(pi.dims[0], dtype=int)
    for _, j, _ in gamma0.entries:
        left[j] += 1
    for j, _, _ in pi.entries:
        right[j] += 1
    return bool(np.any((left > 1) & (right > 1)))


def structural_glue(path: PathSpec, s: float, t: float, plan_at_s: Coupling) -> Coupling:
    """Transport a plan's pattern from parameter s to parameter t.

    Weights are fixed along the path, so the same (i, j, mass) entries placed
    at the moved points form the candidate plan at t; it is feasible always
    and optimal exactly when the structure persists between s and t.
    """
    M, N = path.alpha.shape[0], path.beta.shape[0]
    if plan_at_s.dims != (M, N):
        raise ValidationError("plan dimensions do not match the path")
    return Coupling(plan_at_s.entries, plan_at_s.dims)


def geodesic_path(rho0: DiscreteMeasure, rho1: DiscreteMeasure,
                  mu0: DiscreteMeasure, mu1: DiscreteMeasure, p: float,
                  samples: int = 64, tol: Tolerances = DEFAULT_TOL) -> PathSpec:
    """Displacement interpolation of both marginals, as one affine path.

    Optimal couplings for the p-cost are solved on each side; every support
    pair of those couplings becomes one moving particle, so mass may split
    at the endpoints while interior crossings are ruled out by strict
    convexity of the cost.
    """
    if p <= 1:
        raise ValidationError("geodesic interpolation needs p > 1")
    plan_r = solve(TransportProblem(rho0, rho1, PNormCost(p)), tol).plan
    plan_m = solve(TransportProblem(mu0, mu1, PNormCost(p)), tol).plan
    x0 = np.array([rho0.points[i] for i, _, _ in plan_r.entries])
    x1 = np.array([rho1.points[j] for _, j, _ in plan_r.entries])
    alpha = np.array([m for _, _, m in plan_r.entries])
    y0 = np.array([mu0.points[i] for i, _, _ in plan_m.entries])
    y1 = np.array([mu1.points[j] for _, j, _ in plan_m.entries])
    beta = np.array([m for _, _, m in plan_m.entries])
    return PathSpec(x0, x1, y0, y1, alpha / alpha.sum(), beta / beta.sum(),
                    PNormCost(p), samples)


def stability_constants(p: float):
    """(c_p, C_p) = (min, max) of (1, 2^(p/2-1))."""
    base = 2.0 ** (p / 2.0 - 1.0)
    return min(1.0, base), max(1.0, base)


def stability_check(path: PathSpec, p: float, report: TrackReport,
                    tol: Tolerances = DEFAULT_TOL) -> dict:
    """Two-sided comparison of endpoint plan distance against marginal motion.

    Computes lhs = W_p^p(plan at 0, plan at 1) and S = W_p^p(rho0, rho1) +
    W_p^p(mu0, mu1), then checks c_p * S <= lhs <= C_p * S.  The upper bound
    is only guaranteed when the path kept a unique optimizer throughout,
    which the caller certifies by supplying the track report.
    """
    rho0, rho1, mu0, mu1 = path.endpoint_measures()
    prob0 = path.problem_at(0.0)
    prob1 = path.problem_at(1.0)
    plan0 = solve(prob0, tol).plan
    plan1 = solve(prob1, tol).plan
    lhs = wp_plans(plan0, prob0, plan1, prob1, p, tol) ** p
    s = wp(rho0, rho1, p, tol) ** p + wp(mu0, mu1, p, tol) ** p
    c_p, big_c_p = stability_constants(p)
    slack = tol.tie * (1.0 + abs(s))
    return {
        "lhs": lhs,
        "rhs_lower": c_p * s,
        "rhs_upper": big_c_p * s,
        "marginal_sum": s,
        "certified": report.persistent,
        "lower_holds": lhs >= c_p * s - slack,
        "upper_holds": lhs <= big_c_p * s + slack,
    }
