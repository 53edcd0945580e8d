"""Discrete optimal transport with solution-set structure analysis.

Solve fully discrete transport problems exactly, then ask structural
questions: is the optimal plan unique, are the dual potentials unique, what
does the polyhedron of optimal potentials look like, how do plans deform as
support points move, and how far apart are two plans as measures.
"""

from .core import (
    CorrelationCost,
    DiscreteMeasure,
    ExplicitCost,
    InfeasibleProblemError,
    InternalConsistencyError,
    OtstructError,
    PNormCost,
    SizeCapError,
    Tolerances,
    TransportProblem,
    ValidationError,
    coalesce,
    cost_matrix,
    swap,
    validate,
)
from .dualset import (
    AssignableSets,
    HalfSpaceSystem,
    assignable_sets,
    centered_dual,
    ctransform,
    ctransform_reverse,
    diameter_bound_two_components,
    halfspaces,
    is_extreme_dual,
    is_optimal_potential,
    phi_interval_hull,
    quotient_sup_distance,
    sample_phi_vertices,
    to_legendre,
)
from .homotopy import (
    PathSpec,
    TrackReport,
    geodesic_path,
    glue_composition,
    glue_has_alternatives,
    noncrossing_check,
    stability_check,
    stability_constants,
    structural_glue,
    track,
)
from .metrics import (
    map_lp_distance,
    plan_as_measure,
    plan_to_map,
    tau_c_eps,
    weighted_l2_norm,
    wp,
    wp_plans,
)
from .solver import (
    Coupling,
    DualPair,
    ExactFace,
    ExactSolution,
    Solution,
    face_max_mass,
    face_mass_range,
    marginal_defect,
    optimal_vertices_exact,
    reduced_costs,
    solve,
    solve_exact,
)
from .structure import (
    Chain,
    SupportGraph,
    UniquenessReport,
    canonical_chain,
    cm_gap,
    component_slacks,
    dual_perturbation_window,
    dual_unique,
    g_gamma,
    min_cycle_gap,
    perturb_dual_component,
    primal_unique,
    support_graph,
    tight_graph,
    uniqueness_report,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
