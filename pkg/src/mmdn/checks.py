"""Fast oracle and invariant checks behind ``mmdn check``.

Each check returns a :class:`CheckResult`; nothing here depends on a test
runner, so an installed package can verify itself.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import KernelSpec
from .metrics import BudgetLedger, equivalent_evals
from .mmd import hessian_block_bounds, mmd_grad_objective, mmd_hess_objective, mmd_sq
from .newton import precondition
from .problems import PROBLEMS, check_derivatives, make_problem
from .refset import ReferenceSetConfig, build_reference_set, detect_components, shift_direction


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.ok else 'FAIL'}] {self.name}: {self.detail}"


def _fd_objective(Y, R, kern, h=1e-6):
    mu, k = Y.shape
    g = np.zeros(mu * k)
    H = np.zeros((mu * k, mu * k))
    flat = Y.ravel()
    for j in range(mu * k):
        e = np.zeros_like(flat)
        e[j] = h
        up, dn = (flat + e).reshape(mu, k), (flat - e).reshape(mu, k)
        g[j] = (mmd_sq(up, R, kern) - mmd_sq(dn, R, kern)) / (2 * h)
        H[:, j] = (mmd_grad_objective(up, R, kern) - mmd_grad_objective(dn, R, kern)).ravel() / (2 * h)
    return g, H


def check_problem_derivatives(seed=0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = {}
    for name in PROBLEMS:
        p = make_problem(name)
        x = p.random_interior(rng, 1, margin=0.05)[0]
        rep = check_derivatives(p, x)
        worst[name] = max(rep.jacobian_error, rep.hessian_error)
    bad = {k: v for k, v in worst.items() if v > 1e-4}
    return CheckResult("problem derivatives", not bad, f"max error {max(worst.values()):.1e}" if not bad else f"{bad}")


def check_mmd_derivatives(seed=0, instances=10) -> CheckResult:
    rng = np.random.default_rng(seed)
    gerr = herr = 0.0
    for i in range(instances):
        k = 2 + i % 2
        Y, R = rng.random((4, k)), rng.random((5, k))
        kern = KernelSpec.gaussian([0.1, 1.0, 10.0][i % 3])
        g_fd, H_fd = _fd_objective(Y, R, kern)
        g = mmd_grad_objective(Y, R, kern).ravel()
        gerr = max(gerr, np.max(np.abs(g - g_fd)) / max(1.0, np.max(np.abs(g_fd))))
        herr = max(herr, np.max(np.abs(mmd_hess_objective(Y, R, kern) - H_fd)))
    return CheckResult("MMD derivatives", gerr <= 1e-5 and herr <= 1e-4, f"gradient {gerr:.1e}, Hessian {herr:.1e}")


def check_stationarity(a=0.7, b=1.3) -> CheckResult:
    Y = np.array([[0.0, 0.0], [a, 0.0], [-a, 0.0]])
    R = np.array([[0.0, b], [0.0, -b]])
    g = mmd_grad_objective(Y, R, KernelSpec.gaussian(1.0))[0]
    err = float(np.max(np.abs(g)))
    return CheckResult("symmetric stationarity", err <= 1e-12, f"|grad|_inf = {err:.1e}")


def check_spectrum(seed=0, instances=20) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(instances):
        mu, k = int(rng.integers(2, 6)), int(rng.integers(2, 4))
        Y, R = rng.random((mu, k)), rng.random((mu, k))
        kern = KernelSpec.gaussian(float(rng.uniform(0.1, 5)))
        b = hessian_block_bounds(Y, R, kern)
        w = np.linalg.eigvalsh(mmd_hess_objective(Y, R, kern))
        worst = max(worst, float(np.max(np.abs(w) - np.max(b.radius))))
    return CheckResult("Hessian spectrum radius", worst <= 1e-8, f"max excess {worst:.1e}")


def check_preconditioning() -> CheckResult:
    res = precondition(np.diag([-1.0, 2.0]))
    ok = abs(res.tau - (1 + 1e-6)) <= 1e-15 and res.attempts == 2
    return CheckResult("preconditioning trace", ok, f"tau = {res.tau!r}, attempts = {res.attempts}")


def check_budget() -> CheckResult:
    v = equivalent_evals(BudgetLedger(0, 10, 10))
    return CheckResult("budget equivalence", v == 33.6, f"(0, 10, 10) -> {v!r}")


def check_reference_set() -> CheckResult:
    p = make_problem("zdt3")
    front = p.front_sample(100)
    n_comp = len(detect_components(front))
    eta = shift_direction(np.array([[0.0, 1.0], [1.0, 0.0]]))
    eta_err = float(np.max(np.abs(eta + np.ones(2) / np.sqrt(2))))
    R = build_reference_set(front, ReferenceSetConfig(target_size=40)).R
    dense = p.front_sample(2000)
    dominates = np.all(R[:, None, :] <= dense[None], axis=2) & np.any(R[:, None, :] < dense[None], axis=2)
    ok = n_comp == 5 and eta_err <= 1e-10 and bool(dominates.any(axis=1).all())
    return CheckResult("reference set", ok, f"{n_comp} components, eta error {eta_err:.1e}")


CHECKS = (check_problem_derivatives, check_mmd_derivatives, check_stationarity, check_spectrum,
          check_preconditioning, check_budget, check_reference_set)


def run_checks() -> list:
    out = []
    for fn in CHECKS:
        try:
            out.append(fn())
        except Exception as err:  # a crashing check is a failed check
            out.append(CheckResult(fn.__name__, False, f"raised {type(err).__name__}: {err}"))
    return out
