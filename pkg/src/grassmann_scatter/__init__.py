"""Scatter estimation from subspace-valued data.

Geometry of unimodular SPD matrices, Gaussian-induced distributions on
Grassmannians, the averaged subspace log-likelihood with exact Riemannian
derivatives, fixed-point and descent solvers, existence diagnostics, and
Monte Carlo verification of the consistency and fluctuation limits.
"""

from .asymptotics import (
    CLTReport,
    LLNReport,
    clt_experiment,
    commutation_matrix,
    limiting_covariance,
    lln_experiment,
    projector_kron_mean,
    score_covariance,
    tangent_vec_projector,
    unvec,
    vec,
    whiten_normalize,
)
from .diagnostics import (
    Candidate,
    CandidateScan,
    ExistenceReport,
    VelocityFlag,
    asymptotic_slope,
    boundary_flag,
    candidate_subspaces,
    classify_existence,
    decompose_velocity,
    existence_index,
    unique_sample_threshold,
)
from .errors import (
    DegeneracyError,
    DomainError,
    EmptyFlagError,
    ExistenceError,
    GrassmannScatterError,
    UsageError,
)
from .estimator import (
    GEResult,
    SolverOptions,
    fixed_point_solve,
    residual,
    riemannian_descent,
)
from .grassmann import (
    Empirical,
    Gaussian,
    Measure,
    act,
    act_measure,
    busemann,
    check_basis,
    cocycle,
    density_ratio,
    dim_intersection,
    distinguished_ray_direction,
    modular_parabolic,
    orthonormalize,
    pi_matrix,
    projector,
    sample,
)
from .likelihood import (
    MonteCarloEstimate,
    covariant_deriv_grad,
    grad,
    grad_norm_sq,
    grad_norm_sq_grad,
    grad_point,
    hess_quadform,
    loglik,
    loglik_point,
    mean_projector,
)
from .manifold import (
    check_scatter,
    check_tangent,
    distance,
    geodesic,
    inner,
    log_map,
    manifold_dim,
    norm,
    normalize_det,
    random_scatter,
    random_unit_tangent,
    sym_sqrt,
    tangent_project,
)

__version__ = "0.1.0"
