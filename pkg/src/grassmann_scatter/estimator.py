"""Solvers for M-estimates of scatter from subspace data.

The estimating equation says the whitened mean projector equals (r/m) Id;
equivalently the residual

    residual(P, Sigma) = || mean_projector(P, Sigma) - (r/m) Id ||_F^2

vanishes.  Two solvers are provided:

* ``fixed_point_solve`` iterates the classical scatter update

      Sigma <- normalize_det( (m/r) sum_j w_j X_j (X_j^T Sigma^-1 X_j)^-1 X_j^T ),

  optionally damped by moving only part of the way along the connecting
  geodesic.  The update strictly decreases the objective away from fixed
  points, and its fixed points are exactly the zeros of the residual.

* ``riemannian_descent`` runs geodesic gradient descent with Armijo
  backtracking on the averaged log-likelihood.  Slower but makes no
  structural assumptions; useful as a cross-check.

When no estimate exists the iterates escape to the boundary of the cone:
eigenvalues split and the distance from the starting point grows without
bound (linearly in the iteration count, since the escape is along a ray).
Divergence is therefore detected *additively*: the run is flagged once the
distance from the start has grown by at least ``divergence_growth`` over the
last ``divergence_window`` iterations while the residual is still above
tolerance.  The returned result then carries a boundary flag describing the
escape direction (see ``diagnostics.boundary_flag``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diagnostics import VelocityFlag, boundary_flag
from .errors import EmptyFlagError, ExistenceError, UsageError
from .grassmann import Empirical, Measure
from .likelihood import _materialize, _weighted_kernel_sum, grad, loglik
from .manifold import (
    COND_MAX,
    _congruence_inv,
    check_scatter,
    distance,
    geodesic,
    inner,
    log_map,
    normalize_det,
    sym_sqrt,
)


@dataclass
class SolverOptions:
    """Knobs shared by both solvers.

    max_iter            maximum number of updates
    tol                 convergence threshold on the residual
    damping             step fraction in (0, 1]; 1 is the undamped update
    divergence_window   lookback (iterations) for the divergence test
    divergence_growth   distance growth over the window that flags divergence
    """

    max_iter: int = 500
    tol: float = 1e-12
    damping: float = 1.0
    divergence_window: int = 25
    divergence_growth: float = 10.0

    def __post_init__(self):
        if self.max_iter < 1:
            raise UsageError("max_iter must be at least 1")
        if not self.tol > 0.0:
            raise UsageError("tol must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise UsageError("damping must lie in (0, 1]")
        if self.divergence_window < 1 or not self.divergence_growth > 0.0:
            raise UsageError("divergence window/growth must be positive")


@dataclass
class GEResult:
    """Outcome of a solver run.

    estimate    final iterate (unimodular SPD)
    residual    || mean_projector - (r/m) Id ||_F^2 at the final iterate
    iterations  number of updates performed
    status      "converged" | "diverged_to_boundary" | "max_iterations"
    trace       per-iterate (iteration, residual, distance from start)
    boundary    escape-direction flag when diverged, else None
    """

    estimate: np.ndarray
    residual: float
    iterations: int
    status: str
    trace: list[tuple[int, float, float]] = field(default_factory=list)
    boundary: VelocityFlag | None = None

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def residual(meas: Measure, Sigma, mc_n: int | None = None, rng=None) -> float:
    """Squared Frobenius defect of the estimating equation (= 4x grad norm^2)."""
    Sigma = check_scatter(Sigma)
    emp = _materialize(meas, mc_n, rng, "residual")
    S = _weighted_kernel_sum(emp.points, emp.weights, Sigma)
    M = _congruence_inv(sym_sqrt(Sigma), S)
    D = M - (emp.r / emp.m) * np.eye(emp.m)
    return float(np.sum(D * D))


def _span_witness(points: np.ndarray) -> np.ndarray | None:
    """Orthonormal basis of the joint span if it is a proper subspace, else None."""
    n, m, r = points.shape
    stacked = np.concatenate([points[j] for j in range(n)], axis=1)
    U, s, _ = np.linalg.svd(stacked, full_matrices=False)
    rank = int(np.sum(s > 1e-10 * s[0]))
    if rank < m:
        return U[:, :rank]
    return None


def _check_span(emp: Empirical) -> None:
    W = _span_witness(emp.points)
    if W is not None:
        raise ExistenceError(
            "atoms are contained in a proper subspace (dimension "
            f"{W.shape[1]} of {emp.m}); no estimate of scatter exists",
            witness=W,
        )


def _diverged(trace, opts: SolverOptions) -> bool:
    k = len(trace) - 1
    if k < opts.divergence_window:
        return False
    return trace[k][2] - trace[k - opts.divergence_window][2] >= opts.divergence_growth


def _escape_result(Sigma, res, k, trace, iterates) -> GEResult:
    try:
        flag = boundary_flag(iterates)
    except EmptyFlagError:
        flag = None
    return GEResult(Sigma, res, k, "diverged_to_boundary", trace, boundary=flag)


def fixed_point_solve(
    meas: Empirical,
    Sigma0=None,
    options: SolverOptions | None = None,
) -> GEResult:
    """Iterate the scatter fixed-point update until the residual drops below tol.

    Requires an empirical measure whose atoms jointly span the whole space
    (otherwise ExistenceError, carrying a basis of the deficient span as
    witness).  Starts from Sigma0 (default: identity).  With
    ``damping < 1`` each update moves only that fraction of the way along
    the geodesic toward the plain update target.
    """
    if not isinstance(meas, Empirical):
        raise UsageError("fixed_point_solve needs an empirical measure; sample first")
    opts = options or SolverOptions()
    _check_span(meas)
    m, r = meas.m, meas.r
    Sigma = np.eye(m) if Sigma0 is None else check_scatter(Sigma0, name="Sigma0")
    start = Sigma
    rm_eye = (r / m) * np.eye(m)

    iterates = [Sigma]
    trace: list[tuple[int, float, float]] = []
    for k in range(opts.max_iter + 1):
        lam = np.linalg.eigvalsh(Sigma)
        if lam[0] <= 0.0 or lam[-1] > COND_MAX * lam[0]:
            # conditioning breached before the distance test fired; the run
            # is escaping and the current iterate is numerically unusable
            return _escape_result(iterates[-2], trace[-1][1], k, trace, iterates[:-1])
        S = _weighted_kernel_sum(meas.points, meas.weights, Sigma)
        M = _congruence_inv(sym_sqrt(Sigma), S)
        D = M - rm_eye
        res = float(np.sum(D * D))
        trace.append((k, res, distance(start, Sigma)))
        if res <= opts.tol:
            return GEResult(Sigma, res, k, "converged", trace)
        if _diverged(trace, opts):
            return _escape_result(Sigma, res, k, trace, iterates)
        if k == opts.max_iter:
            break
        T = normalize_det((m / r) * S)
        if opts.damping >= 1.0:
            Sigma = T
        else:
            Sigma = geodesic(Sigma, log_map(Sigma, T), opts.damping)
        iterates.append(Sigma)
    return GEResult(Sigma, res, opts.max_iter, "max_iterations", trace)


def riemannian_descent(
    meas: Measure,
    Sigma0=None,
    options: SolverOptions | None = None,
    mc_n: int | None = None,
    rng=None,
) -> GEResult:
    """Geodesic gradient descent with Armijo backtracking on the objective.

    Gaussian measures are first replaced by a Monte Carlo sample of size
    ``mc_n`` (so the run optimizes the sample-average objective).  The
    objective value is non-increasing along the run.  A stalled line search
    (no decrease after 60 halvings) ends the run with status
    "max_iterations".
    """
    opts = options or SolverOptions()
    emp = _materialize(meas, mc_n, rng, "riemannian_descent")
    _check_span(emp)
    m, r = emp.m, emp.r
    Sigma = np.eye(m) if Sigma0 is None else check_scatter(Sigma0, name="Sigma0")
    start = Sigma

    step0 = 2.0 * m / r  # undamped fixed-point step, linearized
    step = step0
    f = loglik(emp, Sigma)
    iterates = [Sigma]
    trace: list[tuple[int, float, float]] = []
    for k in range(opts.max_iter + 1):
        G = grad(emp, Sigma)
        gn2 = inner(Sigma, G, G)
        res = 4.0 * gn2
        trace.append((k, res, distance(start, Sigma)))
        if res <= opts.tol:
            return GEResult(Sigma, res, k, "converged", trace)
        if _diverged(trace, opts):
            return _escape_result(Sigma, res, k, trace, iterates)
        if k == opts.max_iter:
            break
        t = step
        accepted = False
        for _ in range(60):
            cand = geodesic(Sigma, -G, t)
            f_new = loglik(emp, cand)
            if f_new <= f - 1e-4 * t * gn2:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            return GEResult(Sigma, res, k, "max_iterations", trace)
        Sigma, f = cand, f_new
        step = min(2.0 * t, 8.0 * step0)
        iterates.append(Sigma)
    return GEResult(Sigma, res, opts.max_iter, "max_iterations", trace)
