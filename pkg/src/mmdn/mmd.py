"""Squared MMD between an approximation set Y and a reference set R.

Uses the biased V-statistic

    MMD^2 = 1/mu^2 sum_ij k(y_i, y_j) + 1/lam^2 sum_ij k(r_i, r_j) - 2/(mu lam) sum_ij k(r_i, y_j)

with self-terms kept.  Derivatives are available in objective space (w.r.t.
the points of Y) and, through the chain rule, in decision space.  Decision sets
are handled as (mu, n) arrays; gradients and Hessians come back stacked
point-major, i.e. point i occupies entries [i*n, (i+1)*n).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .kernels import KernelSpec, kernel_grad, kernel_hess, kernel_value, spectral_moments
from .linalg import ContractError


def _check_sets(Y, R):
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if Y.shape[0] == 0 or R.shape[0] == 0 or Y.size == 0 or R.size == 0:
        raise ContractError("MMD needs non-empty point sets")
    if Y.shape[1] != R.shape[1]:
        raise ContractError(f"objective dimension mismatch: {Y.shape[1]} vs {R.shape[1]}")
    if not (np.all(np.isfinite(Y)) and np.all(np.isfinite(R))):
        raise ContractError("point sets must be finite")
    return Y, R


def stack(X) -> np.ndarray:
    return np.asarray(X, dtype=float).reshape(-1)


def unstack(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.size % n:
        raise ContractError(f"stacked vector of length {x.size} is not a multiple of n={n}")
    return x.reshape(-1, n)


def mmd_sq(Y, R, kernel: KernelSpec) -> float:
    Y, R = _check_sets(Y, R)
    mu, lam = len(Y), len(R)
    kyy = kernel_value(kernel, Y[:, None, :], Y[None, :, :]).sum()
    krr = kernel_value(kernel, R[:, None, :], R[None, :, :]).sum()
    kry = kernel_value(kernel, R[:, None, :], Y[None, :, :]).sum()
    return float(kyy / mu**2 + krr / lam**2 - 2.0 * kry / (mu * lam))


def mmd_grad_objective(Y, R, kernel: KernelSpec) -> np.ndarray:
    """(mu, k) array whose row l is dMMD^2/dy_l."""
    Y, R = _check_sets(Y, R)
    mu, lam = len(Y), len(R)
    # self-pairs contribute a zero gradient for both kernel families
    gyy = kernel_grad(kernel, Y[:, None, :], Y[None, :, :]).sum(axis=0)
    gry = kernel_grad(kernel, R[:, None, :], Y[None, :, :]).sum(axis=0)
    return 2.0 / mu**2 * gyy - 2.0 / (mu * lam) * gry


def mmd_hess_objective(Y, R, kernel: KernelSpec) -> np.ndarray:
    """(mu*k, mu*k) Hessian w.r.t. the stacked objective points."""
    Y, R = _check_sets(Y, R)
    mu, lam = len(Y), len(R)
    k = Y.shape[1]
    pair = kernel_hess(kernel, Y[:, None, :], Y[None, :, :])  # (i, l, k, k), d2/dy_l^2 of k(y_i, y_l)
    eye = np.eye(mu, dtype=bool)
    H = np.where(eye[:, :, None, None], 0.0, -2.0 / mu**2 * pair)  # off-diagonal: mixed = -hess
    diag = 2.0 / mu**2 * np.where(eye[:, :, None, None], 0.0, pair).sum(axis=0)
    diag -= 2.0 / (mu * lam) * kernel_hess(kernel, R[:, None, :], Y[None, :, :]).sum(axis=0)
    H[np.arange(mu), np.arange(mu)] = diag
    H = H.transpose(0, 2, 1, 3).reshape(mu * k, mu * k)
    return 0.5 * (H + H.T)


def _jacobians(problem, X) -> np.ndarray:
    return np.stack([problem.jacobian(x) for x in X])


def _hessian_tensors(problem, X) -> np.ndarray:
    return np.stack([problem.hessian_tensor(x) for x in X])


def _decision_X(X, problem) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = unstack(X, problem.n)
    if X.shape[1] != problem.n:
        raise ContractError(f"decision points have dimension {X.shape[1]}, problem expects {problem.n}")
    if not np.all(np.isfinite(X)):
        raise ContractError("decision points must be finite")
    return X


def mmd_grad_decision(X, problem, R, kernel: KernelSpec, Y=None, DF=None) -> np.ndarray:
    """Stacked (mu*n,) gradient of MMD^2(F[X], R) w.r.t. the decision points.

    ``Y`` and ``DF`` may be passed to reuse evaluations already made.
    """
    X = _decision_X(X, problem)
    Y = problem.evaluate(X) if Y is None else Y
    DF = _jacobians(problem, X) if DF is None else DF
    G = mmd_grad_objective(Y, R, kernel)
    return np.einsum("lj,ljn->ln", G, DF).reshape(-1)


def assemble_decision_hessian(H_obj, G_obj, DF, D2F) -> np.ndarray:
    """Chain rule: blocks DF_m^T H_ml DF_l plus the D2F term on the diagonal."""
    mu, k, n = DF.shape
    Hb = H_obj.reshape(mu, k, mu, k)
    T = np.einsum("maj,malb->mjlb", DF, Hb)
    H = np.einsum("mjlb,lbi->mjli", T, DF)
    H[np.arange(mu), :, np.arange(mu), :] += np.einsum("lj,ljab->lab", G_obj, D2F)
    H = H.reshape(mu * n, mu * n)
    return 0.5 * (H + H.T)


def mmd_hess_decision(X, problem, R, kernel: KernelSpec, Y=None, DF=None, D2F=None) -> np.ndarray:
    X = _decision_X(X, problem)
    Y = problem.evaluate(X) if Y is None else Y
    DF = _jacobians(problem, X) if DF is None else DF
    D2F = _hessian_tensors(problem, X) if D2F is None else D2F
    return assemble_decision_hessian(mmd_hess_objective(Y, R, kernel), mmd_grad_objective(Y, R, kernel), DF, D2F)


# ---------------------------------------------------------------------------
# spectral bound oracles (Gaussian kernel, mu == lambda)


@dataclass(frozen=True)
class SpectrumBounds:
    off_lower: np.ndarray  # (mu, mu); diagonal entries unused (nan)
    off_upper: np.ndarray  # (mu, mu)
    diag_lower: np.ndarray  # (mu,)
    diag_upper: np.ndarray  # (mu,)
    radius: np.ndarray  # (mu,) whole-spectrum radii R_l


def _sq_dists(A, B):
    return np.sum((A[:, None, :] - B[None, :, :]) ** 2, axis=-1)


def hessian_block_bounds(Y, R, kernel: KernelSpec) -> SpectrumBounds:
    """Eigenvalue intervals for each k x k block of the objective-space Hessian."""
    Y, R = _check_sets(Y, R)
    mu = len(Y)
    if len(R) != mu:
        raise ContractError(f"block bounds assume |Y| == |R|, got {mu} and {len(R)}")
    sm = spectral_moments(kernel, Y.shape[1])  # raises for Laplace
    m2, m4, smin = sm.m2, sm.m4, sm.sigma_min_C
    dyy = _sq_dists(Y, Y)
    d2_R = _sq_dists(Y, R).sum(axis=1) / mu
    d2_Y = dyy.sum(axis=1) / mu  # self-distance is zero, so this is the beta != l sum
    off_lower = 2.0 / mu**2 * (smin - 0.5 * m4 * dyy)
    np.fill_diagonal(off_lower, np.nan)
    off_upper = np.full((mu, mu), 2.0 / mu**2 * m2)
    np.fill_diagonal(off_upper, np.nan)
    diag_lower = 2.0 / mu * (smin - m2 - 0.5 * m4 * d2_R)
    diag_upper = 2.0 / mu * (m2 - smin + 0.5 * m4 * d2_Y)
    radius = 2.0 / mu**2 * ((2 * mu - 1) * m2 - smin) + m4 / mu * (d2_R + d2_Y)
    return SpectrumBounds(off_lower, off_upper, diag_lower, diag_upper, radius)


def gradient_row_bound(Y, R, kernel: KernelSpec) -> np.ndarray:
    """Upper bound on ||dMMD^2/dy_l||_2 from mean distances to Y and to R."""
    Y, R = _check_sets(Y, R)
    mu = len(Y)
    m2 = spectral_moments(kernel, Y.shape[1]).m2
    dY = np.sqrt(_sq_dists(Y, Y)).sum(axis=1) / mu
    dR = np.sqrt(_sq_dists(Y, R)).sum(axis=1) / mu
    return 2.0 / mu * (dY + dR) * m2


# ---------------------------------------------------------------------------


class IllConditionedRatioError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SlopeEstimate:
    value: float
    numerator: float
    denominator: float
    numerator_se: float
    denominator_se: float

    def __float__(self) -> float:
        return self.value


def kkt_slope_estimate(R, y, theta: float, samples: int = 200_000, seed: Optional[int] = 0,
                       full: bool = False):
    """Monte-Carlo estimate of the normal-space slope at a stationary point y (k = 2).

    With nu ~ N(0, I) and D(nu) = sum_r sin(sqrt(2 theta) <nu, r - y>) the slope
    is E[nu_2 D] / E[nu_1 D].

    Raises:
        IllConditionedRatioError: if the denominator is within 3 standard
            errors of zero.
    """
    R = np.atleast_2d(np.asarray(R, dtype=float))
    y = np.asarray(y, dtype=float)
    if R.shape[1] != 2 or y.shape != (2,):
        raise ContractError("kkt_slope_estimate is defined for two objectives")
    if samples < 100_000:
        raise ContractError("kkt_slope_estimate needs at least 1e5 samples")
    rng = np.random.default_rng(seed)
    nu = rng.standard_normal((samples, 2))
    D = np.zeros(samples)
    scale = np.sqrt(2.0 * theta)
    for r in R:
        D += np.sin(scale * nu @ (r - y))
    s1, s2 = nu[:, 0] * D, nu[:, 1] * D
    num, den = s2.mean(), s1.mean()
    se_num = s2.std(ddof=1) / np.sqrt(samples)
    se_den = s1.std(ddof=1) / np.sqrt(samples)
    if abs(den) <= 3.0 * se_den:
        raise IllConditionedRatioError(
            f"denominator {den:.3e} is within 3 standard errors ({se_den:.3e}) of zero"
        )
    est = SlopeEstimate(num / den, num, den, se_num, se_den)
    return est if full else est.value
