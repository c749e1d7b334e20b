"""Newton iteration on the KKT system of  min MMD^2(F[X], R)  s.t. h(X) = 0, g(X) <= 0.

Inequalities are handled by an active set: constraints with g > -tol are
treated as equalities for the step.  The Hessian block of the KKT matrix is
made positive definite by a diagonal shift before each solve, and the step is
damped by Armijo backtracking on a merit function.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_solve

from . import linalg
from .kernels import KernelSpec
from .linalg import ContractError
from .mmd import assemble_decision_hessian, mmd_grad_objective, mmd_hess_objective, mmd_sq

log = logging.getLogger(__name__)

BETA = 1e-6
MAX_PRECONDITION_ATTEMPTS = 60
ARMIJO_C1 = 1e-4
MAX_HALVINGS = 25
ACTIVE_TOL = 1e-6
EPS = 1e-6

MODES = ("active-set", "clip", "none")


class PreconditioningError(np.linalg.LinAlgError):
    pass


@dataclass
class NewtonState:
    X: np.ndarray  # (mu, n)
    lam: np.ndarray  # multipliers, one per row of the active constraint vector
    active: list = field(default_factory=list)  # [(point, inequality index)]
    iteration: int = 0
    grad_norm: float = np.inf

    @property
    def mu(self) -> int:
        return self.X.shape[0]


@dataclass(frozen=True)
class PreconditionResult:
    tau: float
    cholesky_factor: np.ndarray
    attempts: int


@dataclass(frozen=True)
class ArmijoResult:
    step: float
    stalled: bool
    trials: int
    merit: float


@dataclass
class IterationRecord:
    iteration: int
    mmd2: float
    grad_norm: float
    kkt_norm: float
    step: float
    tau: float
    jacobian_calls: int
    hessian_calls: int
    evaluations: int  # set-level evaluations of F spent in the line search
    n_active: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Trace:
    records: list = field(default_factory=list)
    status: str = "running"
    # set-level call counts (one call evaluates every point of the set)
    evaluations: int = 0
    jacobian_calls: int = 0
    hessian_calls: int = 0
    mmd2_initial: float = np.nan
    mmd2_final: float = np.nan

    @property
    def iterations(self) -> int:
        return len(self.records)

    def to_dicts(self) -> list:
        return [r.to_dict() for r in self.records]


# ---------------------------------------------------------------------------
# constraints


def detect_active(X, problem, tol: float = ACTIVE_TOL) -> list:
    """(point, constraint) pairs with g_j(x_i) > -tol, point-major then by index."""
    if tol <= 0:
        raise ContractError("activity tolerance must be positive")
    cons = problem.inequality_constraints
    if cons is None:
        return []
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = []
    for i, x in enumerate(X):
        for j in np.flatnonzero(cons.fun(x) > -tol):
            out.append((i, int(j)))
    return out


@dataclass
class _ConstraintBlock:
    keys: list  # ("h", point, j) or ("g", point, j)
    values: np.ndarray  # (p',)
    jac: np.ndarray  # (p', mu*n)
    hess_rows: list  # per row: (point, (n, n) Hessian) or None when linear
    linear: bool


def _constraint_block(X, problem, active) -> _ConstraintBlock:
    mu, n = X.shape
    eq, ineq = problem.equality_constraints, problem.inequality_constraints
    by_point: dict = {}
    for i, j in active:
        by_point.setdefault(i, []).append(j)
    keys, vals, rows, hrows = [], [], [], []
    linear = True
    for i in range(mu):
        x = X[i]
        groups = []
        if eq is not None:
            groups.append(("h", eq, list(range(eq.size))))
        if ineq is not None and i in by_point:
            groups.append(("g", ineq, by_point[i]))
        for tag, con, idx in groups:
            if not idx:
                continue
            c, Jc = con.fun(x)[idx], con.jac(x)[idx]
            Hc = None if con.linear else con.hess(x)[idx]
            linear &= con.linear
            for r, j in enumerate(idx):
                keys.append((tag, i, j))
                vals.append(c[r])
                row = np.zeros(mu * n)
                row[i * n:(i + 1) * n] = Jc[r]
                rows.append(row)
                hrows.append(None if Hc is None else (i, Hc[r]))
    jac = np.array(rows) if rows else np.zeros((0, mu * n))
    return _ConstraintBlock(keys, np.array(vals, dtype=float), jac, hrows, linear)


def _empty_block(mu: int, n: int) -> _ConstraintBlock:
    return _ConstraintBlock([], np.zeros(0), np.zeros((0, mu * n)), [], True)


def _s_matrix(block: _ConstraintBlock, lam, mu: int, n: int) -> Optional[np.ndarray]:
    """sum_j lam_j * Hessian(h_j), or None when every active constraint is linear."""
    if block.linear:
        return None
    S = np.zeros((mu * n, mu * n))
    for lj, hr in zip(lam, block.hess_rows):
        if hr is not None:
            i, Hc = hr
            S[i * n:(i + 1) * n, i * n:(i + 1) * n] += lj * Hc
    return S


def _binding(X, problem, active, grad) -> list:
    """Drop inequality faces that steepest descent would leave.

    First-order multipliers solve min |grad + J^T lam|; a face whose
    multiplier is negative is released before the Newton step.  Deciding
    this from the gradient, not from the (possibly indefinite) Newton model,
    keeps faces where the objective keeps pushing outward.
    """
    if not active:
        return active
    block = _constraint_block(X, problem, active)
    lam1 = np.linalg.lstsq(block.jac.T, -grad, rcond=None)[0]
    drop = {(i, j) for (tag, i, j), l in zip(block.keys, lam1) if tag == "g" and l < 0}
    return [a for a in active if a not in drop]


def _resize_multipliers(old_keys, old_lam, new_keys) -> np.ndarray:
    lookup = dict(zip(old_keys, old_lam))
    return np.array([lookup.get(k, 0.0) for k in new_keys], dtype=float)


# ---------------------------------------------------------------------------
# KKT pieces


def _grad_hess(X, problem, R, kernel, need_hess=True):
    Y = problem.evaluate(X)
    DF = np.stack([problem.jacobian(x) for x in X])
    G = mmd_grad_objective(Y, R, kernel)
    grad = np.einsum("lj,ljn->ln", G, DF).reshape(-1)
    if not need_hess:
        return Y, grad, None
    D2F = np.stack([problem.hessian_tensor(x) for x in X])
    H = assemble_decision_hessian(mmd_hess_objective(Y, R, kernel), G, DF, D2F)
    return Y, grad, H


def _check_state(state: NewtonState, problem):
    X = np.atleast_2d(np.asarray(state.X, dtype=float))
    if X.shape[1] != problem.n:
        raise ContractError(f"state has n={X.shape[1]}, problem expects {problem.n}")
    return X


def kkt_residual(state: NewtonState, problem, R, kernel: KernelSpec) -> np.ndarray:
    """(grad MMD^2 + J^T lam, h_active) stacked."""
    X = _check_state(state, problem)
    block = _constraint_block(X, problem, state.active)
    lam = np.asarray(state.lam, dtype=float)
    if lam.shape != (len(block.keys),):
        raise ContractError(f"multiplier length {lam.shape} does not match {len(block.keys)} active constraints")
    _, grad, _ = _grad_hess(X, problem, R, kernel, need_hess=False)
    return np.concatenate([grad + block.jac.T @ lam, block.values])


def kkt_derivative(state: NewtonState, problem, R, kernel: KernelSpec) -> np.ndarray:
    """[[H + S, J^T], [J, 0]] with S = sum lam_j * Hessian(h_j)."""
    X = _check_state(state, problem)
    mu, n = X.shape
    block = _constraint_block(X, problem, state.active)
    lam = np.asarray(state.lam, dtype=float)
    if lam.shape != (len(block.keys),):
        raise ContractError(f"multiplier length {lam.shape} does not match {len(block.keys)} active constraints")
    _, _, H = _grad_hess(X, problem, R, kernel)
    S = _s_matrix(block, lam, mu, n)
    if S is not None:
        H = H + S
    p = len(block.keys)
    if p == 0:
        return H
    return np.block([[H, block.jac.T], [block.jac, np.zeros((p, p))]])


def precondition(H, beta: float = BETA, max_attempts: int = MAX_PRECONDITION_ATTEMPTS) -> PreconditionResult:
    """Smallest tau in {0, tau0, 2 tau0, ...} such that H + tau I admits a Cholesky factor.

    ``tau0 = max(0, beta - min(diag H))``; later shifts double (never below beta).
    """
    H = linalg.symmetrize(H)
    L = linalg.cholesky(H)
    if L is not None:
        return PreconditionResult(0.0, L, 1)
    eye = np.eye(H.shape[0])
    tau = max(0.0, beta - float(np.min(np.diag(H))))
    for attempt in range(2, max_attempts + 1):
        tau = max(tau, beta)
        L = linalg.cholesky(H + tau * eye)
        if L is not None:
            return PreconditionResult(tau, L, attempt)
        tau *= 2.0
    raise PreconditioningError(f"no positive-definite shift found in {max_attempts} attempts (last tau {tau:.3e})")


def armijo_backtrack(merit: Callable[[np.ndarray], float], x0, direction, grad_dot_dir: float,
                     c1: float = ARMIJO_C1, max_halvings: int = MAX_HALVINGS,
                     merit0: Optional[float] = None) -> ArmijoResult:
    """Largest s in {1, 1/2, ..., 2^-max_halvings} satisfying the Armijo condition.

    Returns ``step=0`` and ``stalled=True`` when every trial fails.
    """
    if not grad_dot_dir < 0:
        raise ContractError(f"direction is not a descent direction (slope {grad_dot_dir:.3e})")
    x0 = np.asarray(x0, dtype=float)
    d = np.asarray(direction, dtype=float)
    f0 = merit(x0) if merit0 is None else merit0
    s = 1.0
    for trial in range(1, max_halvings + 2):
        f = merit(x0 + s * d)
        if np.isfinite(f) and f <= f0 + c1 * s * grad_dot_dir:
            return ArmijoResult(s, False, trial, float(f))
        s *= 0.5
    return ArmijoResult(0.0, True, max_halvings + 1, float(f0))


# ---------------------------------------------------------------------------
# driver


def _tangent_basis(jac: np.ndarray):
    """Selector of free coordinates for bound-type rows, else an orthonormal null-space basis."""
    nz = jac != 0
    if np.all(nz.sum(axis=1) == 1):
        free = ~nz.any(axis=0)
        return free, None
    Q, _ = linalg.qr(jac.T)
    return None, Q[:, jac.shape[0]:]


def _solve_bound_step(Hs, grad, block: _ConstraintBlock, cols, free):
    """KKT step when every active row fixes one distinct coordinate.

    Fixed coordinates move onto their face, the free block is solved with the
    shifted Cholesky factor and the multipliers follow from the fixed rows.
    """
    coef = block.jac[np.arange(len(cols)), cols]
    d = np.zeros(Hs.shape[0])
    d[cols] = -block.values / coef
    if free.any():
        pre = precondition(Hs[np.ix_(free, free)])
        rhs = grad[free] + Hs[np.ix_(free, cols)] @ d[cols]
        d[free] = -cho_solve((pre.cholesky_factor, True), rhs)
    else:
        pre = PreconditionResult(0.0, np.zeros((0, 0)), 1)
    lam_new = -(Hs[cols] @ d + grad[cols]) / coef
    return d, lam_new, pre


def _solve_step(Hs: np.ndarray, grad, block: _ConstraintBlock, lam):
    """Newton step, updated multipliers and the shift used.

    The shift is chosen for the Hessian restricted to the tangent space of the
    active constraints (all of R^N when none are active); directions fixed by
    the constraints keep their curvature untouched.
    """
    p = len(block.keys)
    if p == 0:
        pre = precondition(Hs)
        return -cho_solve((pre.cholesky_factor, True), grad), np.zeros(0), pre
    N = Hs.shape[0]
    free, Z = _tangent_basis(block.jac)
    if Z is None:
        cols = np.argmax(block.jac != 0, axis=1)
        if len(np.unique(cols)) == p:
            return _solve_bound_step(Hs, grad, block, cols, free)
        pre = precondition(Hs[np.ix_(free, free)]) if free.any() else PreconditionResult(0.0, np.zeros((0, 0)), 1)
        A = Hs + np.diag(pre.tau * free)
    else:
        pre = precondition(linalg.symmetrize(Z.T @ Hs @ Z)) if Z.shape[1] else PreconditionResult(0.0, np.zeros((0, 0)), 1)
        A = Hs + pre.tau * (Z @ Z.T)
    K = np.block([[A, block.jac.T], [block.jac, np.zeros((p, p))]])
    rhs = -np.concatenate([grad + block.jac.T @ lam, block.values])
    sol = linalg.solve(K, rhs)
    return sol[:N], lam + sol[N:], pre


def mmdn_run(X0, problem, R, kernel: KernelSpec, max_iter: int = 5, eps: float = EPS,
             tol: float = ACTIVE_TOL, mode: str = "active-set", Y0=None) -> tuple:
    """Run the MMD-Newton method from X0.

    Args:
        X0: (mu, n) initial decision points; projected into the problem's Newton box.
        problem: a ``Problem``.
        R: (lambda, k) reference set.
        kernel: kernel of the MMD.
        max_iter: maximal number of Newton iterations.
        eps: stop once the KKT residual norm drops to ``eps``.
        tol: activity tolerance for inequality constraints.
        mode: "active-set" (constraints in the KKT system, trial points clipped
            into the box), "clip" (unconstrained step, clipped) or "none".
        Y0: objective values of X0 if already known; they are reused (and not
            counted as an evaluation) unless projection moved X0.

    The trace counts set-level calls: one Jacobian and one Hessian per
    iteration, one evaluation per line-search trial.  The gradient taken
    after the last allowed iteration only reports the final norm and is not
    counted.

    Returns:
        (NewtonState, Trace)
    """
    if eps <= 0:
        raise ContractError("eps must be positive")
    if mode not in MODES:
        raise ContractError(f"mode must be one of {MODES}")
    R = np.atleast_2d(np.asarray(R, dtype=float))
    X = np.atleast_2d(np.array(X0, dtype=float))
    if X.shape[1] != problem.n:
        raise ContractError(f"X0 has n={X.shape[1]}, problem expects {problem.n}")
    mu, n = X.shape
    lo, hi = problem.newton_lower, problem.newton_upper
    X_in = X
    if mode != "none":
        X = np.clip(X, lo, hi)
    project = (lambda Z: np.clip(Z, lo, hi)) if mode != "none" else (lambda Z: Z)
    use_constraints = mode == "active-set"

    trace = Trace()
    if Y0 is not None and np.array_equal(X, X_in):
        Y = np.array(Y0, dtype=float)
    else:
        Y = problem.evaluate(X)
        trace.evaluations += 1
    if not np.all(np.isfinite(Y)):
        trace.status = "nan"
        return NewtonState(X, np.zeros(0)), trace
    f = mmd_sq(Y, R, kernel)
    trace.mmd2_initial = f
    keys: list = []
    lam = np.zeros(0)
    state = NewtonState(X, lam)

    for it in range(max_iter + 1):
        DF = np.stack([problem.jacobian(x) for x in X])
        if it < max_iter:
            trace.jacobian_calls += 1
        G = mmd_grad_objective(Y, R, kernel)
        grad = np.einsum("lj,ljn->ln", G, DF).reshape(-1)

        if use_constraints:
            active = _binding(X, problem, detect_active(X, problem, tol), grad)
            block = _constraint_block(X, problem, active)
        else:
            active, block = [], _empty_block(mu, n)
        lam = _resize_multipliers(keys, lam, block.keys)
        keys = block.keys
        kkt = np.concatenate([grad + block.jac.T @ lam, block.values])
        grad_norm, kkt_norm = float(np.linalg.norm(grad)), float(np.linalg.norm(kkt))
        state = NewtonState(X, lam, active, it, grad_norm)
        if kkt_norm <= eps:
            trace.status = "converged"
            break
        if it == max_iter:
            trace.status = "max_iter"
            break

        D2F = np.stack([problem.hessian_tensor(x) for x in X])
        trace.hessian_calls += 1
        H = assemble_decision_hessian(mmd_hess_objective(Y, R, kernel), G, DF, D2F)
        S = _s_matrix(block, lam, mu, n)
        Hs = H if S is None else linalg.symmetrize(H + S)
        try:
            d, lam_new, pre = _solve_step(Hs, grad, block, lam)
        except (linalg.SingularMatrixError, PreconditioningError) as err:
            log.warning("Newton step failed: %s", err)
            trace.status = "singular"
            break

        rho = max(1.0, 2.0 * float(np.max(np.abs(lam_new)))) if len(lam_new) else 1.0
        con = problem.inequality_constraints
        eqc = problem.equality_constraints

        def violation(Z, block=block):
            if not block.keys:
                return 0.0
            tot = 0.0
            for tag, i, j in block.keys:
                c = (eqc if tag == "h" else con).fun(Z[i])[j]
                tot += abs(c)
            return tot

        last = {}

        def merit(z):
            Z = project(z.reshape(mu, n))
            Yz = problem.evaluate(Z)
            trace.evaluations += 1
            last["trial"] = (Z, Yz)
            if not np.all(np.isfinite(Yz)):
                return np.inf
            val = mmd_sq(Yz, R, kernel)
            return val + rho * violation(Z) if use_constraints else val

        viol0 = violation(X) if use_constraints else 0.0
        merit0 = f + rho * viol0 if use_constraints else f
        slope = float(grad @ d) - (rho * viol0 if use_constraints else 0.0)
        if not slope < 0:
            trace.status = "stalled"
            trace.records.append(IterationRecord(it, f, grad_norm, kkt_norm, 0.0, pre.tau, 1, 1, 0, len(active)))
            break
        evals_before = trace.evaluations
        ls = armijo_backtrack(merit, X.reshape(-1), d, slope, merit0=merit0)
        trace.records.append(IterationRecord(it, f, grad_norm, kkt_norm, ls.step, pre.tau, 1, 1,
                                             trace.evaluations - evals_before, len(active)))
        if ls.stalled:
            trace.status = "stalled"
            break
        X, Y = last["trial"]  # the accepted trial is the last one evaluated
        f = mmd_sq(Y, R, kernel)
        lam = lam_new

    trace.mmd2_final = f
    return state, trace
