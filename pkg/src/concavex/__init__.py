"""Constrained variational solver for ``-Δu = |u|^{p-2}u + μ|u|^{q-2}u`` on boxes."""

from .functional import (
    CertificateReport,
    ParameterError,
    ProblemParams,
    energy,
    energy_gradient,
    nonlinearity,
    phi,
    psi,
    szulkin_certificate,
)
from .grid import (
    EigenPair,
    GridDomain,
    GridError,
    GridFunction,
    Lt,
    PoissonSolveError,
    build_domain,
    eigenpairs,
    neg_laplacian,
    norm,
    poisson_solve,
    read_grid_function,
    write_grid_function,
)
from .solver import (
    BallViolation,
    ConstraintSet,
    DeflationState,
    SolveReport,
    SolverError,
    ToleranceError,
    fixed_point_solve,
    minimize_positive,
    multiplicity_search,
    project_feasible,
    sphere_level_estimate,
    verify_solution,
)
from .threshold import (
    EmbeddingConstants,
    ThresholdResult,
    estimate_constants,
    estimate_embedding_constant,
    mu_star,
    radius_interval,
    thresholds,
)

__version__ = "0.1.0"
