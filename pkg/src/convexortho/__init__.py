"""Orthogonal polynomials, conformal maps, and zero distributions on convex domains."""

from .classical import (
    ChebyshevResult,
    FaberSequence,
    LawsonStall,
    SharpnessInstance,
    chebyshev,
    faber,
    faber_derivative_norms,
    sharpness_check,
    sharpness_instance,
)
from .conformal import (
    OutsideDomainOfDefinition,
    ParameterSolveFailed,
    capacity,
    equilibrium_measure,
    exterior_map,
    harmonic_measure,
    interior_map,
    laurent_coefficients,
    map_from_dict,
    poisson_arc_measure,
)
from .geometry import (
    BoundaryArc,
    BoundaryPoint,
    ConvexDomain,
    Degenerate,
    Disk,
    Ellipse,
    GeometryError,
    NoConvergence,
    NonConvex,
    Polygon,
    arc_from_length,
    domain_from_dict,
    regular_polygon,
)
from .measures import (
    BoundaryMeasure,
    DiscrepancyReport,
    ExteriorZero,
    GridMismatch,
    PotentialGapReport,
    SingularEvaluation,
    balayage_measure,
    boundary_grid,
    common_grid,
    discrepancy,
    equilibrium_boundary_measure,
    on_grid,
    potential_gap,
    potential_of_measure,
)
from .orthopoly import (
    BreakdownAtDegree,
    InnerProductEngine,
    OrthoSequence,
    QuadratureBudgetExceeded,
    Weight,
    build_engine,
    eval_basis,
    eval_poly,
    leading_product,
    orthonormalize,
    sup_norm,
)
from .zeros import (
    EigenFailure,
    ZeroSet,
    comrade_matrix,
    zero_counting_measure,
    zeros_of,
)

__version__ = "0.1.0"

__all__ = [
    "BoundaryArc",
    "BoundaryPoint",
    "ConvexDomain",
    "Degenerate",
    "Disk",
    "Ellipse",
    "BoundaryMeasure",
    "BreakdownAtDegree",
    "ChebyshevResult",
    "DiscrepancyReport",
    "EigenFailure",
    "ExteriorZero",
    "FaberSequence",
    "GeometryError",
    "GridMismatch",
    "InnerProductEngine",
    "LawsonStall",
    "NoConvergence",
    "NonConvex",
    "OrthoSequence",
    "PotentialGapReport",
    "SharpnessInstance",
    "SingularEvaluation",
    "OutsideDomainOfDefinition",
    "ParameterSolveFailed",
    "Polygon",
    "QuadratureBudgetExceeded",
    "Weight",
    "ZeroSet",
    "arc_from_length",
    "balayage_measure",
    "boundary_grid",
    "build_engine",
    "capacity",
    "chebyshev",
    "common_grid",
    "comrade_matrix",
    "discrepancy",
    "domain_from_dict",
    "equilibrium_boundary_measure",
    "equilibrium_measure",
    "eval_basis",
    "eval_poly",
    "exterior_map",
    "faber",
    "faber_derivative_norms",
    "harmonic_measure",
    "interior_map",
    "laurent_coefficients",
    "leading_product",
    "map_from_dict",
    "on_grid",
    "orthonormalize",
    "poisson_arc_measure",
    "potential_gap",
    "potential_of_measure",
    "regular_polygon",
    "sharpness_check",
    "sharpness_instance",
    "sup_norm",
    "zero_counting_measure",
    "zeros_of",
    "__version__",
]
