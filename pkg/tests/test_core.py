import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from otstruct import (
    CorrelationCost,
    DiscreteMeasure,
    ExplicitCost,
    PNormCost,
    Tolerances,
    TransportProblem,
    ValidationError,
    coalesce,
    cost_matrix,
    swap,
    validate,
)
from otstruct.core import cost_matrix_exact

from conftest import jump_problem


def test_cost_matrix_single_pair_345():
    prob = TransportProblem(
        DiscreteMeasure([[0.0, 0.0]], [1.0]),
        DiscreteMeasure([[3.0, 4.0]], [1.0]),
        PNormCost(2),
    )
    assert np.allclose(cost_matrix(prob), [[25.0]])


def test_cost_matrix_jump_example():
    C = cost_matrix(jump_problem(0.1))
    assert np.allclose(C, [[1.81, 2.21], [2.21, 1.81]], atol=1e-12)


def test_cost_matrix_explicit_passthrough():
    vals = [[1.0, 2.0], [3.0, 4.0]]
    prob = TransportProblem(
        DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5]),
        DiscreteMeasure([[0.0], [2.0]], [0.5, 0.5]),
        ExplicitCost(vals),
    )
    assert np.array_equal(cost_matrix(prob), vals)


@st.composite
def small_problem(draw):
    m = draw(st.integers(1, 5))
    n = draw(st.integers(1, 5))
    d = draw(st.integers(1, 3))
    coords = st.floats(-10, 10, allow_nan=False)
    X = [[draw(coords) for _ in range(d)] for _ in range(m)]
    Y = [[draw(coords) for _ in range(d)] for _ in range(n)]
    kind = draw(st.sampled_from(["p15", "p2", "p3", "corr"]))
    cost = {"p15": PNormCost(1.5), "p2": PNormCost(2),
            "p3": PNormCost(3), "corr": CorrelationCost()}[kind]
    return TransportProblem(
        DiscreteMeasure(X, [1.0 / m] * m), DiscreteMeasure(Y, [1.0 / n] * n), cost
    )


@settings(max_examples=50, deadline=None)
@given(small_problem())
def test_swap_transposes_cost(prob):
    assert np.allclose(cost_matrix(swap(prob)), cost_matrix(prob).T)


@settings(max_examples=50, deadline=None)
@given(small_problem())
def test_correlation_p2_expansion(prob):
    # ||x - y||^2 = ||x||^2 + ||y||^2 + 2 * (-<x, y>) entrywise
    p2 = TransportProblem(prob.source, prob.target, PNormCost(2))
    corr = TransportProblem(prob.source, prob.target, CorrelationCost())
    sq_x = np.einsum("ij,ij->i", prob.source.points, prob.source.points)
    sq_y = np.einsum("ij,ij->i", prob.target.points, prob.target.points)
    lhs = cost_matrix(p2)
    rhs = sq_x[:, None] + sq_y[None, :] + 2 * cost_matrix(corr)
    assert np.allclose(lhs, rhs, atol=1e-9)


def test_validate_reports():
    ok = validate([[0.0], [1.0]], [0.5, 0.5])
    assert ok["mass_defect"] == pytest.approx(0.0) and ok["ok"]

    bad = validate([[0.0], [1.0]], [0.5, 0.6])
    assert bad["mass_defect"] == pytest.approx(0.1)
    assert not bad["ok"]

    dup = validate([[0.0, 0.0], [0.0, 0.0]], [0.5, 0.5])
    assert dup["coinciding_points"] == [(0, 1)]
    assert dup["ok"]  # coinciding points are informational, not an error


def test_measure_rejects_bad_weights():
    with pytest.raises(ValidationError):
        DiscreteMeasure([[0.0], [1.0]], [0.5, -0.5])
    with pytest.raises(ValidationError):
        DiscreteMeasure([[0.0], [1.0]], [0.5, 0.6])
    with pytest.raises(ValidationError):
        DiscreteMeasure([[0.0], [1.0]], [1.0])


def test_coalesce_merges_exact_duplicates():
    m = DiscreteMeasure([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]], [0.25, 0.25, 0.5])
    merged = coalesce(m)
    assert merged.size == 2
    assert merged.weights == pytest.approx([0.5, 0.5])


def test_problem_dimension_checks():
    a = DiscreteMeasure([[0.0, 0.0]], [1.0])
    b = DiscreteMeasure([[1.0]], [1.0])
    with pytest.raises(ValidationError):
        TransportProblem(a, b, PNormCost(2))
    with pytest.raises(ValidationError):
        TransportProblem(a, a, ExplicitCost([[1.0, 2.0]]))


def test_pnorm_requires_p_above_one():
    with pytest.raises(ValidationError):
        PNormCost(1.0)
    with pytest.raises(ValidationError):
        PNormCost(0.5)


def test_tolerances_positive_and_tied():
    with pytest.raises(ValidationError):
        Tolerances(mass=0.0)
    t = Tolerances()
    assert t.tied(1.0, 1.0 + 1e-10)
    assert not t.tied(1.0, 1.0 + 1e-6)
    # scale-free: ties at magnitude 1e6 behave like ties at magnitude 1
    assert t.tied(1e6, 1e6 + 1e-4)


def test_exact_cost_matrix_matches_float():
    prob = jump_problem(0.0)
    exact = cost_matrix_exact(prob)
    assert all(v == 2 for row in exact for v in row)
    prob3 = TransportProblem(prob.source, prob.target, PNormCost(3))
    approx = cost_matrix_exact(prob3)
    assert np.allclose(
        [[float(v) for v in row] for row in approx], cost_matrix(prob3)
    )
