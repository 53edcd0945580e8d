"""Exact solution of the discrete transport LP and optimal-face exploration.

The primal is solved by a network simplex on the bipartite transportation
graph: basis = spanning tree on the M+N nodes, northwest-corner starting
basis, Bland's anti-cycling pivot rule.  Degenerate pivots are expected and
must not cycle; degeneracy of the basis is exactly what the structure module
goes on to analyse.  Duals are normalized so phi[0] = 0.

A twin implementation over ``fractions.Fraction`` provides a tolerance-free
oracle for tie detection, plus a brute-force enumerator of all optimal
vertices via spanning forests of the complete bipartite graph.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import (
    DEFAULT_TOL,
    InfeasibleProblemError,
    InternalConsistencyError,
    SizeCapError,
    Tolerances,
    TransportProblem,
    ValidationError,
    cost_matrix,
    cost_matrix_exact,
)

ORACLE_CAP_ENV = "OTSTRUCT_ORACLE_CAP"
DEFAULT_ORACLE_CAP = 400
MAX_PIVOTS = 2_000_000


@dataclass(frozen=True)
class Coupling:
    """Sparse nonnegative mass matrix with prescribed marginals.

    ``entries`` holds (i, j, mass) triples with strictly positive mass;
    ``dims`` is (M, N).  Marginal agreement is checked against a concrete
    weight pair by :func:`marginal_defect`.
    """

    entries: tuple
    dims: tuple

    def __init__(self, entries, dims):
        M, N = int(dims[0]), int(dims[1])
        norm = []
        for i, j, m in entries:
            i, j, m = int(i), int(j), float(m)
            if not (0 <= i < M and 0 <= j < N):
                raise ValidationError(f"entry ({i},{j}) out of range for dims ({M},{N})")
            if not (m > 0 and math.isfinite(m)):
                raise ValidationError(f"stored masses must be strictly positive, got {m}")
            norm.append((i, j, m))
        norm.sort()
        object.__setattr__(self, "entries", tuple(norm))
        object.__setattr__(self, "dims", (M, N))

    def dense(self) -> np.ndarray:
        G = np.zeros(self.dims)
        for i, j, m in self.entries:
            G[i, j] = m
        return G

    def row_sums(self) -> np.ndarray:
        r = np.zeros(self.dims[0])
        for i, _, m in self.entries:
            r[i] += m
        return r

    def col_sums(self) -> np.ndarray:
        c = np.zeros(self.dims[1])
        for _, j, m in self.entries:
            c[j] += m
        return c

    def support(self) -> frozenset:
        return frozenset((i, j) for i, j, _ in self.entries)

    def total_mass(self) -> float:
        return float(sum(m for _, _, m in self.entries))


def marginal_defect(plan: Coupling, alpha, beta) -> float:
    """Largest deviation of the plan's marginals from (alpha, beta)."""
    r = plan.row_sums() - np.asarray(alpha, dtype=np.float64)
    c = plan.col_sums() - np.asarray(beta, dtype=np.float64)
    return max(float(np.max(np.abs(r))), float(np.max(np.abs(c))))


@dataclass(frozen=True)
class DualPair:
    """Potentials (phi, psi) feasible for phi_i + psi_j <= C_ij."""

    phi: np.ndarray
    psi: np.ndarray

    def __init__(self, phi, psi):
        phi = np.asarray(phi, dtype=np.float64)
        psi = np.asarray(psi, dtype=np.float64)
        phi.setflags(write=False)
        psi.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "psi", psi)

    def objective(self, alpha, beta) -> float:
        return float(self.phi @ np.asarray(alpha) + self.psi @ np.asarray(beta))


@dataclass(frozen=True)
class Solution:
    plan: Coupling
    dual: DualPair
    value: float
    iterations: int


@dataclass(frozen=True)
class ExactSolution:
    """Vertex solution in exact rational arithmetic; no tolerances involved."""

    entries: tuple  # (i, j, Fraction mass), mass > 0
    phi: tuple
    psi: tuple
    value: Fraction
    iterations: int

    def to_solution(self) -> Solution:
        plan = Coupling([(i, j, float(m)) for i, j, m in self.entries], self._dims)
        return Solution(
            plan,
            DualPair([float(v) for v in self.phi], [float(v) for v in self.psi]),
            float(self.value),
            self.iterations,
        )

    @property
    def _dims(self):
        return (len(self.phi), len(self.psi))

    def support(self) -> frozenset:
        return frozenset((i, j) for i, j, _ in self.entries)


# ---------------------------------------------------------------------------
# basis plumbing shared by the float and exact simplex paths


def _northwest_corner(a, b, zero):
    """Northwest-corner starting basis: exactly M+N-1 entries forming a tree.

    On simultaneous exhaustion of a row and a column a zero-mass basic entry
    is inserted (advance the row first), which is where basis degeneracy
    enters.
    """
    M, N = len(a), len(b)
    ra, rb = list(a), list(b)
    basis = []
    i = j = 0
    while True:
        m = ra[i] if ra[i] < rb[j] else rb[j]
        if m < zero:
            m = zero
        basis.append([i, j, m])
        ra[i] -= m
        rb[j] -= m
        if i == M - 1 and j == N - 1:
            break
        if i < M - 1 and (ra[i] <= rb[j] or j == N - 1):
            i += 1
        else:
            j += 1
    return basis


def _tree_path(adj, start, goal, n_nodes):
    """Node path from start to goal inside the spanning tree."""
    parent = [-2] * n_nodes
    parent[start] = -1
    stack = [start]
    while stack:
        u = stack.pop()
        if u == goal:
            break
        for v in adj[u]:
            if parent[v] == -2:
                parent[v] = u
                stack.append(v)
    if parent[goal] == -2:
        raise InternalConsistencyError("basis graph is not spanning")
    path = [goal]
    while path[-1] != start:
        path.append(parent[path[-1]])
    path.reverse()
    return path


def _duals_from_tree(C_row, M, N, adj, zero):
    """Potentials with phi[0] = 0 satisfying phi_i + psi_j = C_ij on the tree."""
    phi = [None] * M
    psi = [None] * N
    phi[0] = zero
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v < M:
                if phi[v] is None:
                    phi[v] = C_row(v, u - M) - psi[u - M]
                    stack.append(v)
            else:
                if psi[v - M] is None:
                    psi[v - M] = C_row(u, v - M) - phi[u]
                    stack.append(v)
    if any(v is None for v in phi) or any(v is None for v in psi):
        raise InternalConsistencyError("basis tree does not span all nodes")
    return phi, psi


class _TreeBasis:
    """Spanning-tree basis with pivot bookkeeping, arithmetic-agnostic."""

    def __init__(self, M, N, basis_entries):
        self.M, self.N = M, N
        self.n_nodes = M + N
        self.mass = {}
        self.adj = [set() for _ in range(self.n_nodes)]
        for i, j, m in basis_entries:
            self.add_edge(i, j, m)
        if len(self.mass) != M + N - 1:
            raise InternalConsistencyError(
                f"basis has {len(self.mass)} edges, expected {M + N - 1}"
            )

    def add_edge(self, i, j, m):
        self.mass[(i, j)] = m
        self.adj[i].add(self.M + j)
        self.adj[self.M + j].add(i)

    def remove_edge(self, i, j):
        del self.mass[(i, j)]
        self.adj[i].discard(self.M + j)
        self.adj[self.M + j].discard(i)

    def pivot(self, enter):
        """Bring ``enter`` into the basis; returns (leaving edge, theta).

        The unique tree path from enter's source node to its target node,
        closed by the entering edge, alternates signs: path edges at even
        positions lose the pivot mass.  The leaving edge is the minimum-mass
        losing edge, ties broken by lowest (i, j) for anti-cycling.
        """
        ei, ej = enter
        path = _tree_path(self.adj, ei, self.M + ej, self.n_nodes)
        minus = []
        plus = []
        for k in range(len(path) - 1):
            u, v = path[k], path[k + 1]
            e = (u, v - self.M) if u < self.M else (v, u - self.M)
            (minus if k % 2 == 0 else plus).append(e)
        theta, leave = None, None
        for e in minus:
            m = self.mass[e]
            if theta is None or m < theta or (m == theta and e < leave):
                theta, leave = m, e
        for e in minus:
            self.mass[e] = self.mass[e] - theta
        for e in plus:
            self.mass[e] = self.mass[e] + theta
        self.remove_edge(*leave)
        self.add_edge(ei, ej, theta)
        return leave, theta

    def exact_masses(self, alpha, beta):
        """Re-derive basic masses exactly from the marginals by leaf peeling.

        The spanning tree determines its coupling uniquely; recomputing from
        (alpha, beta) in rational arithmetic removes the drift accumulated by
        float pivot updates.
        """
        M, N = self.M, self.N
        need = [Fraction(float(v)) for v in alpha] + [Fraction(float(v)) for v in beta]
        deg = [len(self.adj[u]) for u in range(self.n_nodes)]
        adj = [set(s) for s in self.adj]
        out = {}
        leaves = [u for u in range(self.n_nodes) if deg[u] == 1]
        while leaves:
            u = leaves.pop()
            if not adj[u]:
                continue
            v = next(iter(adj[u]))
            e = (u, v - M) if u < M else (v, u - M)
            out[e] = need[u]
            need[v] -= need[u]
            need[u] = Fraction(0)
            adj[u].discard(v)
            adj[v].discard(u)
            deg[v] -= 1
            if deg[v] == 1:
                leaves.append(v)
        return out


# ---------------------------------------------------------------------------
# float path

_REFRESH_INTERVAL = 256


class _FloatSimplex:
    """Network simplex over float data with incremental dual maintenance.

    Reduced costs and potentials are updated per pivot on the subtree cut off
    by the leaving edge and fully recomputed every few hundred pivots (and at
    termination) to shed rounding drift; optimality is always certified
    against freshly recomputed reduced costs.
    """

    def __init__(self, C, a, b, allowed=None, start=None, rule="dantzig"):
        self.C = np.ascontiguousarray(C, dtype=np.float64)
        self.M, self.N = C.shape
        self.a, self.b = a, b
        self.allowed = allowed
        self.rule = rule
        scale = 1.0 + (float(np.max(np.abs(C))) if C.size else 0.0)
        self.pivot_eps = 1e-13 * scale
        entries = start if start is not None else _northwest_corner(list(a), list(b), 0.0)
        self.basis = _TreeBasis(self.M, self.N, entries)
        self.iterations = 0
        self._refresh()

    def _refresh(self):
        phi, psi = _duals_from_tree(
            lambda i, j: self.C[i, j], self.M, self.N, self.basis.adj, 0.0
        )
        self.phi = np.array(phi)
        self.psi = np.array(psi)
        self.rc = self.C - self.phi[:, None] - self.psi[None, :]
        if self.allowed is not None:
            self.rc[~self.allowed] = np.inf

    def _entering(self, use_bland):
        if use_bland:
            flat = (self.rc < -self.pivot_eps).ravel()
            k = int(np.argmax(flat))
            if not flat[k]:
                return None
        else:
            k = int(np.argmin(self.rc))
            if self.rc.flat[k] >= -self.pivot_eps:
                return None
        return k // self.N, k % self.N

    def _cut_component(self, ei, ejn):
        """Nodes of the subtree hanging off the fresh entering edge.

        After the pivot the entering edge (ei, ejn) is a bridge; the side not
        containing the root is the set whose potentials shift.  Both sides
        are grown alternately so the cost scales with the side that must be
        relabelled, not with the whole tree.
        """
        adj = self.basis.adj
        sides = [({ei}, [ei]), ({ejn}, [ejn])]
        while True:
            for idx in (0, 1):
                seen, stack = sides[idx]
                if not stack:
                    if 0 in seen:
                        other_seen, other_stack = sides[1 - idx]
                        self._grow(other_seen, other_stack, ei, ejn)
                        return other_seen
                    return seen
                self._step(seen, stack, ei, ejn)

    def _step(self, seen, stack, ei, ejn):
        u = stack.pop()
        for v in self.basis.adj[u]:
            if (u == ei and v == ejn) or (u == ejn and v == ei):
                continue  # never cross the bridge edge
            if v not in seen:
                seen.add(v)
                stack.append(v)

    def _grow(self, seen, stack, ei, ejn):
        while stack:
            self._step(seen, stack, ei, ejn)

    def run(self, tol):
        stall = 0
        while True:
            use_bland = self.rule == "bland" or stall > 2 * (self.M + self.N)
            enter = self._entering(use_bland)
            if enter is None:
                self._refresh()
                enter = self._entering(use_bland)
                if enter is None:
                    break
            ei, ej = enter
            delta = float(self.rc[ei, ej])
            _, theta = self.basis.pivot(enter)
            stall = 0 if theta > 0 else stall + 1
            comp = self._cut_component(ei, self.M + ej)
            src = np.fromiter((u for u in comp if u < self.M), dtype=np.intp)
            tgt = np.fromiter((u - self.M for u in comp if u >= self.M), dtype=np.intp)
            if ei in comp:
                self.phi[src] += delta
                self.psi[tgt] -= delta
                self.rc[src, :] -= delta
                self.rc[:, tgt] += delta
            else:
                self.phi[src] -= delta
                self.psi[tgt] += delta
                self.rc[src, :] += delta
                self.rc[:, tgt] -= delta
            if self.allowed is not None:
                self.rc[~self.allowed] = np.inf
            self.iterations += 1
            if self.iterations % _REFRESH_INTERVAL == 0:
                self._refresh()
            if self.iterations > MAX_PIVOTS:
                raise InternalConsistencyError(
                    "pivot limit exceeded; simplex failed to terminate"
                )
        exact = self.basis.exact_masses(self.a, self.b)
        masses = {}
        for (i, j), m in exact.items():
            fm = float(m)
            if fm > tol.mass:
                masses[(i, j)] = fm
            elif fm < -tol.mass:
                raise InternalConsistencyError(f"basis mass {fm} negative beyond tolerance")
        return masses


def _solve_float(C, a, b, tol, rule):
    M, N = C.shape
    engine = _FloatSimplex(C, a, b, rule=rule)
    masses = engine.run(tol)
    entries = sorted((i, j, m) for (i, j), m in masses.items())
    plan = Coupling(entries, (M, N))
    value = float(sum(C[i, j] * m for i, j, m in entries))
    return plan, DualPair(engine.phi, engine.psi), value, engine.iterations


def solve(problem: TransportProblem, tol: Tolerances = DEFAULT_TOL, rule: str = "dantzig") -> Solution:
    """Optimal coupling, vertex of the transportation polytope, plus duals.

    The returned plan's support graph is a forest; the dual pair is feasible
    and complementary (phi_i + psi_j = C_ij on every stored entry); the value
    is the optimal cost.  ``rule`` selects the entering-edge rule: "dantzig"
    (default: most negative reduced cost, switching to Bland's rule whenever
    a run of degenerate pivots stalls, so cycling remains impossible) or
    "bland" (pure Bland's rule; anti-cycling but far slower on big
    instances).  Both rules are deterministic and reach the same value.
    """
    C = cost_matrix(problem)
    if not np.isfinite(C).all():
        raise ValidationError("cost matrix contains non-finite entries")
    a = problem.source.weights
    b = problem.target.weights
    if abs(float(a.sum()) - float(b.sum())) > tol.mass:
        raise InfeasibleProblemError(
            f"marginal masses differ by {abs(float(a.sum()) - float(b.sum())):.3e}"
        )
    if rule not in ("bland", "dantzig"):
        raise ValidationError(f"unknown pivot rule {rule!r}")
    plan, dual, value, iterations = _solve_float(C, a, b, tol, rule)
    return Solution(plan, dual, value, iterations)


def reduced_costs(problem: TransportProblem, dual: DualPair) -> np.ndarray:
    """Matrix C_ij - phi_i - psi_j; nonnegative up to tol.lp for feasible duals."""
    C = cost_matrix(problem)
    return C - dual.phi[:, None] - dual.psi[None, :]


# ---------------------------------------------------------------------------
# exact rational path


def oracle_cap() -> int:
    raw = os.environ.get(ORACLE_CAP_ENV)
    if raw is None:
        return DEFAULT_ORACLE_CAP
    try:
        return int(raw)
    except ValueError:
        raise ValidationError(f"{ORACLE_CAP_ENV} must be an integer, got {raw!r}")


def _solve_rational(C, a, b):
    """Network simplex in Fraction arithmetic with strict Bland pivoting."""
    M, N = len(C), len(C[0])
    basis = _TreeBasis(M, N, _northwest_corner(a, b, Fraction(0)))
    iterations = 0
    zero = Fraction(0)
    while True:
        phi, psi = _duals_from_tree(lambda i, j: C[i][j], M, N, basis.adj, zero)
        enter = None
        for i in range(M):
            Ci, fi = C[i], phi[i]
            for j in range(N):
                if Ci[j] - fi - psi[j] < zero:
                    enter = (i, j)
                    break
            if enter:
                break
        if enter is None:
            break
        basis.pivot(enter)
        iterations += 1
        if iterations > MAX_PIVOTS:
            raise InternalConsistencyError("exact simplex failed to terminate")
    entries = tuple(
        (i, j, m) for (i, j), m in sorted(basis.mass.items()) if m > zero
    )
    value = sum(C[i][j] * m for i, j, m in entries)
    return entries, tuple(phi), tuple(psi), value, iterations


def solve_exact(problem: TransportProblem, cap: int | None = None) -> ExactSolution:
    """Ground-truth vertex solution in exact rational arithmetic.

    Float weights and cost entries are binary rationals, so the float-visible
    problem is solved exactly; see :func:`otstruct.core.cost_matrix_exact`
    for which cost kinds are additionally evaluated exactly from coordinates.
    Instances above the size cap (default M*N <= 400, override with the
    OTSTRUCT_ORACLE_CAP environment variable or ``cap``) are refused.
    """
    M, N = problem.shape
    limit = oracle_cap() if cap is None else cap
    if M * N > limit:
        raise SizeCapError(f"exact oracle cap is {limit} cost entries, instance has {M * N}")
    C = cost_matrix_exact(problem)
    a = [Fraction(float(w)) for w in problem.source.weights]
    b = [Fraction(float(w)) for w in problem.target.weights]
    spill = sum(a) - sum(b)
    if spill != 0:
        # float weight vectors rarely sum to exactly the same binary rational;
        # absorb the difference (within tolerance) into the last demand
        if abs(spill) > Fraction(1, 10**9):
            raise InfeasibleProblemError("marginal masses differ")
        b[-1] += spill
    entries, phi, psi, value, iterations = _solve_rational(C, a, b)
    return ExactSolution(entries, phi, psi, value, iterations)


# ---------------------------------------------------------------------------
# optimal-face exploration


def _tight_mask(C, dual: DualPair, tol: Tolerances) -> np.ndarray:
    scale = tol.cost_scale(C)
    rc = C - dual.phi[:, None] - dual.psi[None, :]
    return np.abs(rc) <= tol.tie * scale


def _face_component(tight, edge):
    """Nodes and edges of the tight-graph component containing ``edge``."""
    M, N = tight.shape
    adj = [set() for _ in range(M + N)]
    for i, j in zip(*np.nonzero(tight)):
        adj[i].add(M + int(j))
        adj[M + int(j)].add(int(i))
    seen = {edge[0]}
    stack = [edge[0]]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    rows = sorted(u for u in seen if u < M)
    cols = sorted(u - M for u in seen if u >= M)
    return rows, cols


def _face_extreme(problem, base, edge, tol, sense):
    """Extremal value of one coordinate over the optimal face.

    The optimal face is the set of couplings supported on tight edges of the
    base dual; the sub-LP restricted to the component of ``edge`` is solved
    by the same simplex with cost +-1 on that single coordinate and forbidden
    (non-tight) edges priced out.
    """
    C = cost_matrix(problem)
    i0, j0 = int(edge[0]), int(edge[1])
    M, N = C.shape
    if not (0 <= i0 < M and 0 <= j0 < N):
        raise ValidationError(f"edge {edge} out of range")
    tight = _tight_mask(C, base.dual, tol)
    if not tight[i0, j0]:
        return 0.0
    rows, cols = _face_component(tight, (i0, j0))
    ri = {g: k for k, g in enumerate(rows)}
    cj = {g: k for k, g in enumerate(cols)}
    a = [float(problem.source.weights[g]) for g in rows]
    b = [float(problem.target.weights[g]) for g in cols]
    # base plan restricted to the component is a feasible start (a forest on
    # tight edges); extend it with zero-mass tight edges to a spanning tree
    sub_tight = tight[np.ix_(rows, cols)]
    m, n = len(rows), len(cols)
    start = _basis_from_plan(base.plan, rows, cols, ri, cj, sub_tight)
    obj = np.zeros((m, n))
    obj[ri[i0], cj[j0]] = -1.0 if sense > 0 else 1.0
    mass = _restricted_simplex(obj, a, b, sub_tight, start, tol)
    got = mass.get((ri[i0], cj[j0]), 0.0)
    return float(got)


def _basis_from_plan(plan, rows, cols, ri, cj, allowed):
    """Spanning tree of the component built from plan entries plus filler."""
    m, n = len(rows), len(cols)
    parent = list(range(m + n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    entries = []
    have = set()
    row_set, col_set = set(rows), set(cols)
    for i, j, mass in plan.entries:
        if i in row_set and j in col_set:
            u, v = ri[i], m + cj[j]
            pu, pv = find(u), find(v)
            if pu == pv:
                raise InternalConsistencyError(
                    "base plan support contains a cycle; face LPs need a vertex plan"
                )
            parent[pu] = pv
            entries.append((ri[i], cj[j], mass))
            have.add((ri[i], cj[j]))
    for i in range(m):
        for j in range(n):
            if allowed[i, j] and (i, j) not in have:
                pu, pv = find(i), find(m + j)
                if pu != pv:
                    parent[pu] = pv
                    entries.append((i, j, 0.0))
                    have.add((i, j))
    if len(entries) != m + n - 1:
        raise InternalConsistencyError("tight component failed to yield a spanning tree")
    return entries


def _restricted_simplex(C, a, b, allowed, start_entries, tol):
    """Simplex over couplings supported on ``allowed`` edges only."""
    engine = _FloatSimplex(C, a, b, allowed=allowed, start=start_entries, rule="bland")
    return engine.run(tol)


def face_max_mass(problem: TransportProblem, base: Solution, edge, tol: Tolerances = DEFAULT_TOL) -> float:
    """Maximum of gamma_{ij} over the optimal face; 0 means the edge appears
    in no optimal plan."""
    return _face_extreme(problem, base, edge, tol, sense=+1)


def face_mass_range(problem: TransportProblem, base: Solution, edge, tol: Tolerances = DEFAULT_TOL) -> tuple:
    """(min, max) of gamma_{ij} over the optimal face."""
    lo = _face_extreme(problem, base, edge, tol, sense=-1)
    hi = _face_extreme(problem, base, edge, tol, sense=+1)
    return lo, hi


# ---------------------------------------------------------------------------
# spanning-forest vertex enumeration (brute-force oracle)


def _spanning_trees(M: int, N: int):
    """All edge sets of spanning trees of the complete bipartite graph K_{M,N}.

    A transportation basis is such a tree; there are N^(M-1) * M^(N-1) of
    them, so this is a small-instance oracle only.
    """
    edges = [(i, j) for i in range(M) for j in range(N)]
    need = M + N - 1
    trees = []
    for combo in itertools.combinations(range(len(edges)), need):
        parent = list(range(M + N))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        ok = True
        for k in combo:
            i, j = edges[k]
            pu, pv = find(i), find(M + j)
            if pu == pv:
                ok = False
                break
            parent[pu] = pv
        if ok:
            trees.append(tuple(edges[k] for k in combo))
    return trees


_TREE_CACHE: dict = {}


def _spanning_trees_cached(M, N):
    key = (M, N)
    if key not in _TREE_CACHE:
        _TREE_CACHE[key] = _spanning_trees(M, N)
    return _TREE_CACHE[key]


@dataclass(frozen=True)
class ExactFace:
    """Every optimal vertex of the transportation polytope, exactly."""

    value: Fraction
    vertices: tuple  # tuple of frozenset({(i, j, Fraction mass)})
    union_support: frozenset  # union of positive-mass supports

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)


def optimal_vertices_exact(problem: TransportProblem, tree_cap: int = 100_000) -> ExactFace:
    """Enumerate all optimal extreme points by trying every spanning forest.

    Each spanning tree of K_{M,N} determines a unique basic solution by leaf
    peeling; feasible ones (all masses >= 0) are vertices.  Exact arithmetic
    makes tie detection trivial.
    """
    M, N = problem.shape
    n_trees = N ** (M - 1) * M ** (N - 1) if M and N else 0
    if n_trees > tree_cap:
        raise SizeCapError(f"{n_trees} spanning trees exceed the cap {tree_cap}")
    C = cost_matrix_exact(problem)
    a = [Fraction(float(w)) for w in problem.source.weights]
    b = [Fraction(float(w)) for w in problem.target.weights]
    spill = sum(a) - sum(b)
    if abs(spill) > Fraction(1, 10**9):
        raise InfeasibleProblemError("marginal masses differ")
    b = list(b)
    b[-1] += spill
    best = None
    seen: dict = {}
    for tree in _spanning_trees_cached(M, N):
        masses = _peel_tree(tree, a, b, M, N)
        if masses is None:
            continue
        cost = sum(C[i][j] * m for (i, j), m in masses.items())
        support = frozenset((i, j) for (i, j), m in masses.items() if m > 0)
        key = frozenset((i, j, m) for (i, j), m in masses.items() if m > 0)
        if best is None or cost < best:
            best = cost
            seen = {key: support}
        elif cost == best:
            seen[key] = support
    if best is None:
        raise InternalConsistencyError("no feasible spanning tree found")
    union = frozenset().union(*seen.values())
    return ExactFace(best, tuple(seen.keys()), union)


def _peel_tree(tree, a, b, M, N):
    """Masses of the unique coupling carried by a spanning tree, or None if
    any mass would be negative."""
    adj = [set() for _ in range(M + N)]
    for i, j in tree:
        adj[i].add(M + j)
        adj[M + j].add(i)
    need = list(a) + list(b)
    deg = [len(s) for s in adj]
    leaves = [u for u in range(M + N) if deg[u] == 1]
    masses = {}
    zero = Fraction(0)
    while leaves:
        u = leaves.pop()
        if not adj[u]:
            continue
        v = next(iter(adj[u]))
        e = (u, v - M) if u < M else (v, u - M)
        m = need[u]
        if m < zero:
            return None
        masses[e] = m
        need[v] -= m
        adj[u].discard(v)
        adj[v].discard(u)
        deg[v] -= 1
        if deg[v] == 1:
            leaves.append(v)
    if any(n < zero for n in need):
        return None
    return masses
