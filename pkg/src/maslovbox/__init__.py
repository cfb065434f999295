"""Counting unstable real eigenvalues of quadratic operator pencils.

The eigenvalue problem y'' + V(x) y = lam f1(x) y + lam^2 f2(x) y is analyzed
by propagating the Lagrangian plane of decaying solutions and counting its
signed intersections with a boundary plane; an independent finite-difference
determinant scan cross-checks every count.
"""
from .frameflow import (
    ConjugatePoint,
    FramePath,
    IntegrationError,
    IntegratorOptions,
    NonTransversalCrossingError,
    crossing_form,
    detect_crossings,
    propagate_in_lambda,
    propagate_in_x,
)
from .lagrangian import LagrangianFrame, dirichlet_frame, intersection_dim, make_frame
from .maslov import (
    InconsistentBoxError,
    ShelfResult,
    SpectralCountReport,
    bottom_shelf_correction,
    eigenvalue_curves,
    maslov_box,
    shelf_index,
    spectral_count,
    spectral_count_halfline,
    spectral_count_truncated,
    spectral_count_wholeline,
)
from .oracle import UnsupportedBoundaryError, count_real_eigs, discretize, oracle_count
from .pencil import (
    BoundaryData,
    CoefficientField,
    HyperbolicityLostError,
    PencilProblem,
    check_boundary_assumptions,
    check_hyperbolicity,
    lambda_max,
    linear_boundary,
    unstable_frame_at_minus_infinity,
)
from .problems import BUILTINS, ConfigError, builtin_problem, load_problem

__version__ = "0.1.0"
