"""Bipartite support graphs and the combinatorics of the optimal set.

The union G of supports over all optimal couplings decides uniqueness on
both sides of the LP: the primal optimizer is unique iff G is acyclic, the
dual optimizer is unique up to a constant iff G is connected.  This module
builds those graphs, certifies the verdicts, measures cyclical-monotonicity
gaps, and quantifies the slack between disconnected tight components.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import (
    DEFAULT_TOL,
    InternalConsistencyError,
    Tolerances,
    TransportProblem,
    ValidationError,
    cost_matrix,
)
from .solver import Coupling, DualPair, Solution, face_max_mass, reduced_costs


@dataclass(frozen=True)
class SupportGraph:
    """Bipartite graph over source indices [0, m) and target indices [0, n)."""

    m: int
    n: int
    edges: frozenset

    def __init__(self, m, n, edges):
        m, n = int(m), int(n)
        es = frozenset((int(i), int(j)) for i, j in edges)
        for i, j in es:
            if not (0 <= i < m and 0 <= j < n):
                raise ValidationError(f"edge ({i},{j}) out of range for ({m},{n})")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "edges", es)

    def adjacency(self):
        adj = [set() for _ in range(self.m + self.n)]
        for i, j in self.edges:
            adj[i].add(self.m + j)
            adj[self.m + j].add(i)
        return adj

    def is_acyclic(self) -> bool:
        """Union-find cycle check; an edge joining already-joined nodes closes a cycle."""
        parent = list(range(self.m + self.n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for i, j in sorted(self.edges):
            pu, pv = find(i), find(self.m + j)
            if pu == pv:
                return False
            parent[pu] = pv
        return True

    def components(self):
        """Connected components as (sorted source list, sorted target list) pairs.

        Isolated nodes are impossible for graphs of optimal structures (every
        index carries mass in every optimal plan), so they raise.
        """
        adj = self.adjacency()
        comp_of = [-1] * (self.m + self.n)
        comps = []
        for s in range(self.m + self.n):
            if comp_of[s] != -1:
                continue
            if not adj[s]:
                raise InternalConsistencyError(
                    f"node {s} is isolated; graphs of optimal structures cannot have "
                    "isolated nodes since every index carries mass"
                )
            k = len(comps)
            stack = [s]
            comp_of[s] = k
            nodes = [s]
            while stack:
                u = stack.pop()
                for v in adj[u]:
                    if comp_of[v] == -1:
                        comp_of[v] = k
                        nodes.append(v)
                        stack.append(v)
            comps.append(
                (
                    sorted(u for u in nodes if u < self.m),
                    sorted(u - self.m for u in nodes if u >= self.m),
                )
            )
        comps.sort()
        return comps

    def is_connected(self) -> bool:
        return len(self.components()) == 1

    def find_cycle(self):
        """One simple cycle as a Chain, or None.

        The chain [(i_1, j_1), ..., (i_k, j_k)] encodes the node cycle
        x_{i_1}, y_{j_1}, x_{i_2}, ..., y_{j_k}, x_{i_1}: both the listed
        pairs and the shifted pairs (i_{l+1}, j_l) are edges of the graph.
        Deterministic: a BFS spanning forest is built in index order and the
        first non-tree edge closes the reported cycle through the LCA.
        """
        adj = [sorted(vs) for vs in self.adjacency()]
        parent = [-1] * (self.m + self.n)
        depth = [-1] * (self.m + self.n)
        tree = set()
        for root in range(self.m + self.n):
            if depth[root] != -1:
                continue
            depth[root] = 0
            queue = [root]
            while queue:
                nxt = []
                for u in queue:
                    for v in adj[u]:
                        if depth[v] == -1:
                            depth[v] = depth[u] + 1
                            parent[v] = u
                            tree.add((min(u, v), max(u, v)))
                            nxt.append(v)
                queue = nxt
        for i, j in sorted(self.edges):
            u, v = i, self.m + j
            if (min(u, v), max(u, v)) in tree:
                continue
            # walk both endpoints up to their lowest common ancestor
            pu, pv = u, v
            left, right = [pu], [pv]
            while depth[pu] > depth[pv]:
                pu = parent[pu]
                left.append(pu)
            while depth[pv] > depth[pu]:
                pv = parent[pv]
                right.append(pv)
            while pu != pv:
                pu, pv = parent[pu], parent[pv]
                left.append(pu)
                right.append(pv)
            nodes = left + right[-2::-1]  # u .. lca .. v, closed by edge (v, u)
            return self._cycle_to_chain(nodes)
        return None

    def _cycle_to_chain(self, nodes):
        if nodes[0] >= self.m:  # rotate so the cycle starts at a source node
            nodes = nodes[1:] + nodes[:1]
        pairs = []
        for k in range(0, len(nodes), 2):
            pairs.append((nodes[k], nodes[k + 1] - self.m))
        return canonical_chain(tuple(pairs))


@dataclass(frozen=True)
class Chain:
    """Ordered support coordinates [(i_1, j_1), ..., (i_n, j_n)].

    All source indices are pairwise distinct and all target indices are
    pairwise distinct, so the cyclic shift (i_{k+1}, j_k) lands outside the
    chain itself.
    """

    pairs: tuple

    def __init__(self, pairs):
        pairs = tuple((int(i), int(j)) for i, j in pairs)
        if len({i for i, _ in pairs}) != len(pairs) or len({j for _, j in pairs}) != len(pairs):
            raise ValidationError("chain indices must be pairwise distinct on both sides")
        if not pairs:
            raise ValidationError("chain must be nonempty")
        object.__setattr__(self, "pairs", pairs)

    def __len__(self):
        return len(self.pairs)


def canonical_chain(pairs) -> Chain:
    """Rotate a chain so the smallest source index comes first."""
    pairs = tuple(pairs)
    k = min(range(len(pairs)), key=lambda t: pairs[t])
    return Chain(pairs[k:] + pairs[:k])


@dataclass(frozen=True)
class UniquenessReport:
    primal_unique: bool
    dual_unique: bool
    g_gamma: SupportGraph
    cycles_found: tuple
    components: tuple

    def __post_init__(self):
        if self.primal_unique != self.g_gamma.is_acyclic():
            raise InternalConsistencyError("primal verdict disagrees with graph acyclicity")
        if self.dual_unique != (len(self.components) == 1):
            raise InternalConsistencyError("dual verdict disagrees with component count")


def support_graph(plan: Coupling) -> SupportGraph:
    """Edges are exactly the strictly positive entries of the coupling."""
    return SupportGraph(plan.dims[0], plan.dims[1], [(i, j) for i, j, _ in plan.entries])


def tight_graph(problem: TransportProblem, dual: DualPair, tol: Tolerances = DEFAULT_TOL) -> SupportGraph:
    """Edges where the dual constraint is active: |C_ij - phi_i - psi_j| <= tie."""
    C = cost_matrix(problem)
    rc = C - dual.phi[:, None] - dual.psi[None, :]
    mask = np.abs(rc) <= tol.tie * tol.cost_scale(C)
    M, N = problem.shape
    return SupportGraph(M, N, [(int(i), int(j)) for i, j in zip(*np.nonzero(mask))])


def g_gamma(problem: TransportProblem, base: Solution, tol: Tolerances = DEFAULT_TOL) -> SupportGraph:
    """Union of support graphs over every optimal coupling.

    Candidate edges are the tight edges of the base dual; a candidate beyond
    the base support belongs iff its maximal mass over the optimal face is
    positive.  Base support edges are their own witnesses.
    """
    M, N = problem.shape
    edges = set(base.plan.support())
    tight = tight_graph(problem, base.dual, tol)
    for e in sorted(tight.edges - edges):
        if face_max_mass(problem, base, e, tol) > tol.mass:
            edges.add(e)
    return SupportGraph(M, N, edges)


def primal_unique(g: SupportGraph) -> bool:
    """The optimal coupling is unique iff the union graph has no cycles."""
    return g.is_acyclic()


def dual_unique(g: SupportGraph) -> bool:
    """Optimal potentials are unique up to a constant iff the union graph is
    connected across all m + n nodes."""
    return g.is_connected()


def uniqueness_report(problem: TransportProblem, base: Solution, tol: Tolerances = DEFAULT_TOL) -> UniquenessReport:
    g = g_gamma(problem, base, tol)
    comps = tuple(g.components())
    cycle = g.find_cycle()
    return UniquenessReport(
        primal_unique=g.is_acyclic(),
        dual_unique=len(comps) == 1,
        g_gamma=g,
        cycles_found=(cycle,) if cycle is not None else (),
        components=comps,
    )


def cm_gap(problem: TransportProblem, chain: Chain) -> float:
    """Cyclical-monotonicity gap of a chain.

    Sum over k of C[i_{k+1}, j_k] - C[i_k, j_k] with i_{n+1} := i_1: the cost
    of shifting every chain member's target to its cyclic predecessor.
    Nonnegative for all chains in an optimal support; zero signals a direction
    in which mass can be permuted at no cost.
    """
    C = cost_matrix(problem)
    M, N = C.shape
    for i, j in chain.pairs:
        if not (0 <= i < M and 0 <= j < N):
            raise ValidationError(f"chain pair ({i},{j}) out of range")
    total = 0.0
    n = len(chain.pairs)
    for k in range(n):
        i_next = chain.pairs[(k + 1) % n][0]
        i_k, j_k = chain.pairs[k]
        total += C[i_next, j_k] - C[i_k, j_k]
    return float(total)


def min_cycle_gap(problem: TransportProblem, plan: Coupling, max_len: int = 6):
    """Minimum cyclical-monotonicity gap over chains drawn from the support.

    Chains are sequences of support entries with pairwise distinct source
    indices and pairwise distinct target indices, length 2..max_len,
    canonicalized up to rotation.  Enumeration is exponential in max_len;
    the cap keeps this a small-scale diagnostic.  Returns (gap, chain);
    (inf, None) when no admissible chain exists.
    """
    if max_len < 2:
        raise ValidationError("max_len must be at least 2")
    C = cost_matrix(problem)
    entries = sorted(plan.support())
    best = math.inf
    best_chain = None
    n_max = min(max_len, len(entries))

    def extend(seq, used_i, used_j):
        nonlocal best, best_chain
        if 2 <= len(seq):
            gap = 0.0
            n = len(seq)
            for k in range(n):
                gap += C[seq[(k + 1) % n][0], seq[k][1]] - C[seq[k][0], seq[k][1]]
            if gap < best:
                best = float(gap)
                best_chain = canonical_chain(seq)
        if len(seq) == n_max:
            return
        for e in entries:
            # rotation canonicalization: chains start at their smallest entry
            if e <= seq[0] or e[0] in used_i or e[1] in used_j:
                continue
            extend(seq + [e], used_i | {e[0]}, used_j | {e[1]})

    for start in entries:
        extend([start], {start[0]}, {start[1]})
    return best, best_chain


def component_slacks(problem: TransportProblem, dual: DualPair, tol: Tolerances = DEFAULT_TOL):
    """Directed slack matrix between tight-graph components.

    Entry (k, l) is the minimum reduced cost over source nodes of component k
    paired with target nodes of component l: the largest amount by which
    component l's target potentials can rise (sources falling in step) before
    a (k, l) constraint goes tight.  Strictly positive off the diagonal,
    zero on it; inf when a pairing is empty.  Returns (matrix, components).
    """
    g = tight_graph(problem, dual, tol)
    comps = g.components()
    rc = reduced_costs(problem, dual)
    r = len(comps)
    out = np.zeros((r, r))
    for k, (src_k, _) in enumerate(comps):
        for l, (_, tgt_l) in enumerate(comps):
            if k == l:
                continue
            if not src_k or not tgt_l:
                out[k, l] = math.inf
            else:
                out[k, l] = float(rc[np.ix_(src_k, tgt_l)].min())
    return out, comps


def dual_perturbation_window(problem: TransportProblem, dual: DualPair, component: int,
                             tol: Tolerances = DEFAULT_TOL):
    """Feasible shift range [-eps_minus, eps_plus] for one tight component.

    Shifting component l by t (psi + t, phi - t) eats the slack of crossing
    constraints: t is bounded above by min_k eps(k, l) and below by
    -min_k eps(l, k).  The two directions are genuinely asymmetric.
    """
    slacks, comps = component_slacks(problem, dual, tol)
    r = len(comps)
    if not (0 <= component < r):
        raise ValidationError(f"component {component} out of range (found {r})")
    others = [k for k in range(r) if k != component]
    eps_plus = min((slacks[k][component] for k in others), default=math.inf)
    eps_minus = min((slacks[component][k] for k in others), default=math.inf)
    return float(eps_minus), float(eps_plus), comps


def perturb_dual_component(problem: TransportProblem, dual: DualPair, component: int, t: float,
                           tol: Tolerances = DEFAULT_TOL) -> DualPair:
    """Shift one tight-graph component: phi_i -> phi_i - t, psi_j -> psi_j + t.

    Stays feasible exactly for t in [-eps_minus, eps_plus]; values outside
    the window (beyond lp slack) are rejected.  When the component carries
    matched source/target mass and the dual was optimal, the objective value
    is unchanged.
    """
    eps_minus, eps_plus, comps = dual_perturbation_window(problem, dual, component, tol)
    C = cost_matrix(problem)
    slack = tol.lp * tol.cost_scale(C)
    if not (-eps_minus - slack <= t <= eps_plus + slack):
        raise ValidationError(
            f"shift {t} outside feasible window [{-eps_minus}, {eps_plus}]"
        )
    src, tgt = comps[component]
    phi = dual.phi.copy()
    psi = dual.psi.copy()
    phi[list(src)] -= t
    psi[list(tgt)] += t
    return DualPair(phi, psi)
