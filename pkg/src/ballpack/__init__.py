"""Curvature, Yamabe flows and functional minimization for ball packings on
triangulated closed 3-manifolds."""

__version__ = "0.1.0"

from .triangulation import (  # noqa: E402
    Triangulation, TriangulationError, TriangulationParseError, ValidationReport,
    dump_triangulation, generate_16cell, generate_boundary_4simplex, is_regular,
    load_triangulation, validate,
)
from .tet_geometry import (  # noqa: E402
    ALPHA_BAR, TetGeometry, TetStatus, classify, critical_radius, dihedral_angles,
    extended_solid_angles, q_gradient, q_value, solid_angle_jacobian, solid_angles, volume,
)
from .curvature import (  # noqa: E402
    CurvatureJacobian, CurvatureReport, VirtualPackingError, alpha_functional, cooper_rivin,
    crg_functional, curvature, curvature_jacobian, edge_curvatures, extended_cooper_rivin,
    extended_crg, extended_curvature, householder_basis, projected_hessian, regge_functional,
)
from .flow import (  # noqa: E402
    Blowup, BoundaryHit, Converged, FlowConfig, FlowMode, FlowOutcome, FlowTrace, QCollapse,
    TimeLimit, ZeroRadius, classify_boundary, min_ratio, monotonicity_check, rhs, run, step,
)
from .optimize import (  # noqa: E402
    ChiEstimate, MinimizeConfig, MinimizeResult, chi_estimate, minimize_extended, multi_start,
    ray_profile, solve_prescribed, yamabe_invariant_estimate,
)
