"""Log-likelihood of subspace data and its exact Riemannian derivatives.

For a subspace U = span(X) and a unimodular SPD matrix Sigma, the (negative)
log-likelihood contribution of U is

    loglik_point(U, Sigma) = 1/2 log( det(X^T Sigma^-1 X) / det(X^T X) ),

and for a measure P the objective is the P-average.  Estimates of scatter are
the minimizers.  First and second derivatives are available in closed form:

    grad_point(U, Sigma)  = (r/2m) Sigma - 1/2 X (X^T Sigma^-1 X)^-1 X^T
    covariant_deriv_grad  = 1/4 Z pi Sigma + 1/4 Sigma pi Z - 1/2 Sigma pi Z pi Sigma

with pi = pi_matrix(U, Sigma), so the geodesic second derivative equals
<covariant_deriv_grad(U, Sigma, Z), Z>_Sigma and is always nonnegative
(geodesic convexity).

The same data can be packaged through the whitened mean projector

    mean_projector(P, Gamma) = g^-1 ( sum_j w_j X_j (X_j^T Gamma^-1 X_j)^-1 X_j^T ) g^-1

(g = sym_sqrt(Gamma)): it is symmetric PSD with trace r, satisfies
r^2/m <= tr(M^2) <= r^2, and Gamma solves the estimating equation exactly
when M = (r/m) Id.  The squared gradient norm is then
grad_norm_sq = 1/4 || M - (r/m) Id ||_F^2, whose own gradient (uniform
weights) is grad_norm_sq_grad.

Gaussian (parametric) measures are evaluated by plain Monte Carlo with a
caller-supplied sample size and RNG; empirical measures are exact weighted
sums, batched over atoms.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import UsageError
from .grassmann import Empirical, Gaussian, Measure, check_basis, pi_matrix, sample
from .manifold import _congruence_inv, check_scatter, check_tangent, sym, sym_sqrt


class MonteCarloEstimate(NamedTuple):
    """Monte Carlo value with its standard error."""

    value: float
    stderr: float


def _materialize(meas: Measure, mc_n: int | None, rng, op: str) -> Empirical:
    """Turn a Gaussian measure into a uniform empirical one by sampling."""
    if isinstance(meas, Empirical):
        return meas
    if mc_n is None or rng is None:
        raise UsageError(f"{op} on a Gaussian measure needs mc_n and rng (Monte Carlo evaluation)")
    pts = np.stack([sample(meas, rng) for _ in range(int(mc_n))])
    return Empirical(pts)


def _batched_terms(points: np.ndarray, Sigma: np.ndarray):
    """Per-atom pieces W_j = Sigma^-1 X_j and G_j = X_j^T Sigma^-1 X_j, batched."""
    W = np.linalg.solve(Sigma[None], points)                    # (n, m, r)
    G = np.einsum("nir,nis->nrs", points, W)                    # (n, r, r)
    return W, 0.5 * (G + np.transpose(G, (0, 2, 1)))


def _weighted_kernel_sum(points: np.ndarray, weights: np.ndarray, Sigma: np.ndarray) -> np.ndarray:
    """sum_j w_j X_j (X_j^T Sigma^-1 X_j)^-1 X_j^T  (symmetric PSD, m x m)."""
    _, G = _batched_terms(points, Sigma)
    H = np.linalg.solve(G, np.transpose(points, (0, 2, 1)))     # (n, r, m)
    return sym(np.einsum("n,nir,nrj->ij", weights, points, H))


def _batched_loglik(points: np.ndarray, Sigma: np.ndarray) -> np.ndarray:
    """Per-atom log-likelihood values, batched over atoms."""
    _, G = _batched_terms(points, Sigma)
    _, ld_white = np.linalg.slogdet(G)
    gram = np.einsum("nir,nis->nrs", points, points)
    _, ld_plain = np.linalg.slogdet(gram)
    return 0.5 * (ld_white - ld_plain)


def loglik_point(X, Sigma) -> float:
    """Log-likelihood contribution 1/2 log(det(X^T Sigma^-1 X)/det(X^T X)).

    Vanishes at Sigma = Id and equals -(1/m) log density_ratio(U, Sigma).
    """
    Sigma = check_scatter(Sigma)
    X = check_basis(X)
    return float(_batched_loglik(X[None], Sigma)[0])


def loglik(meas: Measure, Sigma, mc_n: int | None = None, rng=None):
    """Measure-averaged log-likelihood.

    Empirical measures: exact weighted sum, returned as a float.  Gaussian
    measures: Monte Carlo with ``mc_n`` draws, returned as a
    MonteCarloEstimate (value, stderr); mc_n=None raises UsageError.
    """
    Sigma = check_scatter(Sigma)
    if isinstance(meas, Empirical):
        vals = _batched_loglik(meas.points, Sigma)
        return float(meas.weights @ vals)
    emp = _materialize(meas, mc_n, rng, "loglik")
    vals = _batched_loglik(emp.points, Sigma)
    n = len(vals)
    stderr = float(vals.std(ddof=1) / np.sqrt(n)) if n > 1 else float("inf")
    return MonteCarloEstimate(float(vals.mean()), stderr)


def grad_point(X, Sigma) -> np.ndarray:
    """Riemannian gradient (r/2m) Sigma - 1/2 X (X^T Sigma^-1 X)^-1 X^T.

    A tangent vector at Sigma; its inner product against any tangent W
    equals the derivative of loglik_point along the geodesic with velocity W.
    """
    Sigma = check_scatter(Sigma)
    X = check_basis(X)
    m, r = X.shape
    S = _weighted_kernel_sum(X[None], np.ones(1), Sigma)
    return sym((0.5 * r / m) * Sigma - 0.5 * S)


def grad(meas: Measure, Sigma, mc_n: int | None = None, rng=None) -> np.ndarray:
    """Measure-averaged gradient; vanishes exactly at an estimate of scatter."""
    Sigma = check_scatter(Sigma)
    emp = _materialize(meas, mc_n, rng, "grad")
    m, r = emp.m, emp.r
    S = _weighted_kernel_sum(emp.points, emp.weights, Sigma)
    return sym((0.5 * r / m) * Sigma - 0.5 * S)


def covariant_deriv_grad(X, Sigma, Z) -> np.ndarray:
    """Covariant derivative of the gradient field of one atom along Z.

    Equals 1/4 Z pi Sigma + 1/4 Sigma pi Z - 1/2 Sigma pi Z pi Sigma with
    pi = pi_matrix(X, Sigma); the result is again tangent at Sigma.
    """
    Sigma = check_scatter(Sigma)
    Z = check_tangent(Sigma, Z)
    pi = pi_matrix(X, Sigma)
    ZpS = Z @ pi @ Sigma
    return sym(0.25 * (ZpS + ZpS.T) - 0.5 * (Sigma @ pi @ Z @ pi @ Sigma))


def _batched_pi(points: np.ndarray, Sigma: np.ndarray) -> np.ndarray:
    """pi_matrix for every atom, batched: (n, m, m)."""
    W, G = _batched_terms(points, Sigma)
    H = np.linalg.solve(G, np.transpose(W, (0, 2, 1)))          # (n, r, m)
    P = np.einsum("nir,nrj->nij", W, H)
    return 0.5 * (P + np.transpose(P, (0, 2, 1)))


def hess_quadform(meas: Measure, Sigma, Z, mc_n: int | None = None, rng=None) -> float:
    """Geodesic second derivative <cov. deriv. of grad along Z, Z>_Sigma.

    Per atom this is 1/2 tr((Sigma^-1 - pi) Z pi Z) >= 0; the measure
    average is the Hessian quadratic form driving geodesic convexity.
    """
    Sigma = check_scatter(Sigma)
    Z = check_tangent(Sigma, Z)
    emp = _materialize(meas, mc_n, rng, "hess_quadform")
    pi = _batched_pi(emp.points, Sigma)
    A = np.linalg.solve(Sigma, Z)                               # Sigma^-1 Z
    B = np.einsum("nij,jk->nik", pi, Z)                         # pi_j Z
    t1 = np.einsum("ij,nji->n", A, B)                           # tr(Sigma^-1 Z pi Z)
    t2 = np.einsum("nij,nji->n", B, B)                          # tr(pi Z pi Z)
    return float(0.5 * emp.weights @ (t1 - t2))


def mean_projector(meas: Measure, Gamma, mc_n: int | None = None, rng=None) -> np.ndarray:
    """Whitened mean projector g^-1 (sum_j w_j X_j G_j^-1 X_j^T) g^-1, g = sym_sqrt(Gamma).

    Symmetric PSD with trace exactly r; tr(M^2) lies in [r^2/m, r^2], with
    the lower bound attained iff M = (r/m) Id, i.e. iff Gamma solves the
    estimating equation.
    """
    Gamma = check_scatter(Gamma)
    emp = _materialize(meas, mc_n, rng, "mean_projector")
    g = sym_sqrt(Gamma)
    S = _weighted_kernel_sum(emp.points, emp.weights, Gamma)
    return _congruence_inv(g, S)


def grad_norm_sq(meas: Measure, Gamma, mc_n: int | None = None, rng=None) -> float:
    """Squared metric norm of the gradient, 1/4 || M - (r/m) Id ||_F^2.

    Nonnegative; zero exactly at critical points of the objective.
    """
    emp = _materialize(meas, mc_n, rng, "grad_norm_sq")
    M = mean_projector(emp, Gamma)
    m, r = emp.m, emp.r
    D = M - (r / m) * np.eye(m)
    return float(0.25 * np.sum(D * D))


def grad_norm_sq_grad(meas: Empirical, Gamma) -> np.ndarray:
    """Gradient of grad_norm_sq for a uniform-weight empirical measure.

    With pi_j = pi_matrix(U_j, Gamma) and S = sum_j pi_j:

        1/(2 n^2) Gamma (sum_j pi_j Gamma S Gamma pi_j) Gamma
      - 1/(2 n^2) Gamma S Gamma S Gamma

    Tangent at Gamma; vanishes at critical points; matches central finite
    differences of grad_norm_sq along geodesics.  Non-uniform weights raise
    UsageError (the closed form assumes weights 1/n).
    """
    if not isinstance(meas, Empirical):
        raise UsageError("grad_norm_sq_grad is defined for empirical measures only")
    if not meas.is_uniform:
        raise UsageError("grad_norm_sq_grad requires uniform weights")
    Gamma = check_scatter(Gamma)
    n = meas.n
    pi = _batched_pi(meas.points, Gamma)
    S = pi.sum(axis=0)
    inner_mat = Gamma @ S @ Gamma
    K = np.einsum("nij,jk,nkl->il", pi, inner_mat, pi)
    term1 = Gamma @ K @ Gamma
    term2 = Gamma @ S @ inner_mat                               # = Gamma S Gamma S Gamma
    return sym((term1 - term2) / (2.0 * n * n))
