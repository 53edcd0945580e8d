"""Shared instance builders for the test suite."""

from fractions import Fraction

import numpy as np
import pytest

from otstruct import (
    CorrelationCost,
    DiscreteMeasure,
    ExplicitCost,
    PNormCost,
    TransportProblem,
)


def jump_problem(eps: float) -> TransportProblem:
    """Two sources at (+-1, -+eps), two targets at (0, +-1), squared cost."""
    src = DiscreteMeasure([[-1.0, eps], [1.0, -eps]], [0.5, 0.5])
    tgt = DiscreteMeasure([[0.0, 1.0], [0.0, -1.0]], [0.5, 0.5])
    return TransportProblem(src, tgt, PNormCost(2))


def figure_problem() -> TransportProblem:
    """Four corner sources, three axis targets, correlation cost."""
    src = DiscreteMeasure([[1, 1], [-1, 1], [1, -1], [-1, -1]], [0.25] * 4)
    tgt = DiscreteMeasure([[0, 1], [0, 0], [1, 0]], [1 / 3] * 3)
    return TransportProblem(src, tgt, CorrelationCost())


# the paper-figure union graph and its three simple cycles, 0-based
FIGURE_G_EDGES = frozenset(
    {(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (2, 1), (2, 2), (3, 1)}
)
FIGURE_CYCLES = [
    frozenset({(0, 1), (1, 1), (1, 0), (0, 0)}),          # x1 y2 x2 y1
    frozenset({(0, 1), (2, 1), (2, 2), (0, 2)}),          # x1 y2 x3 y3
    frozenset({(0, 2), (2, 2), (2, 1), (1, 1), (1, 0), (0, 0)}),  # x1 y3 x3 y2 x2 y1
]


def chain_edge_set(chain):
    """All graph edges traversed by a chain's cycle (pairs plus shifted pairs)."""
    pairs = chain.pairs
    n = len(pairs)
    edges = set(pairs)
    for k in range(n):
        edges.add((pairs[(k + 1) % n][0], pairs[k][1]))
    return frozenset(edges)


def random_problem(rng, max_m=10, max_n=10, dim=2, kind=None) -> TransportProblem:
    """Generic float instance with strictly positive random weights."""
    m = int(rng.integers(1, max_m + 1))
    n = int(rng.integers(1, max_n + 1))
    X = rng.normal(size=(m, dim))
    Y = rng.normal(size=(n, dim))
    a = rng.random(m) + 0.2
    b = rng.random(n) + 0.2
    if kind is None:
        kind = ["p2", "p3", "corr"][int(rng.integers(0, 3))]
    cost = {"p2": PNormCost(2), "p3": PNormCost(3), "corr": CorrelationCost()}[kind]
    return TransportProblem(
        DiscreteMeasure(X, a / a.sum()), DiscreteMeasure(Y, b / b.sum()), cost
    )


def dyadic_weights(rng, m, denom=1024):
    """Strictly positive weights k_i / denom summing exactly to 1 in floats.

    Power-of-two denominators make every weight, every partial sum, and the
    total exactly representable, so the float problem and its rational lift
    are the same problem: no spill mass, no dust edges for exact oracles.
    """
    units = rng.multinomial(denom - m, [1.0 / m] * m) + 1
    return units.astype(float) / denom


def random_rational_problem(rng, max_m=4, max_n=4, coord=5):
    """Small instance whose data are exactly representable rationals.

    Integer coordinates and dyadic weights keep every vertex mass and every
    cost entry an exact rational, so exact enumeration is a strict oracle
    and float ties are genuine ties.
    """
    m = int(rng.integers(1, max_m + 1))
    n = int(rng.integers(1, max_n + 1))
    X = rng.integers(-coord, coord + 1, size=(m, 2)).astype(float)
    Y = rng.integers(-coord, coord + 1, size=(n, 2)).astype(float)
    kind = int(rng.integers(0, 2))
    cost = PNormCost(2) if kind == 0 else CorrelationCost()
    return TransportProblem(
        DiscreteMeasure(X, dyadic_weights(rng, m)),
        DiscreteMeasure(Y, dyadic_weights(rng, n)),
        cost,
    )


def two_cluster_problem(seed: int, cost_kind: str = "p2"):
    """Two far-apart sub-problems with matched per-cluster mass."""
    from otstruct.cli import two_cluster_instance
    from otstruct.io import problem_from_json

    return problem_from_json(
        two_cluster_instance(seed, separation=10.0,
                             cost="p_norm" if cost_kind == "p2" else "correlation")
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20250809)
