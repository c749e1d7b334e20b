"""Distance indicators (GD_p, IGD_p, averaged Hausdorff Delta_p) and budget accounting."""
from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal

import numpy as np
from scipy.spatial import cKDTree

from .linalg import ContractError

JAC_COST = 1.47
HESS_COST = 1.89
FRONT_DENSITY = {2: 1000, 3: 5000}


def _sets(A, B, p):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.size == 0 or B.size == 0:
        raise ContractError("indicator needs nonempty sets")
    if A.shape[1] != B.shape[1]:
        raise ContractError("sets live in different dimensions")
    if p < 1:
        raise ContractError("p must be >= 1")
    return A, B


def gd_p(A, front, p: float = 2.0) -> float:
    """Power mean over A of the distance to the nearest front point."""
    A, front = _sets(A, front, p)
    d, _ = cKDTree(front).query(A)
    return float(np.mean(d**p) ** (1.0 / p))


def igd_p(A, front, p: float = 2.0) -> float:
    return gd_p(front, A, p)


def delta_p(A, front, p: float = 2.0) -> float:
    return max(gd_p(A, front, p), igd_p(A, front, p))


def reference_front(problem, count=None) -> np.ndarray:
    """Front discretisation used for indicator evaluation."""
    count = FRONT_DENSITY.get(problem.k, 5000) if count is None else count
    return problem.front_sample(count)


@dataclass
class BudgetLedger:
    """Evaluation counts at the level of single points."""

    plain_evals: int = 0
    jacobian_calls: int = 0
    hessian_calls: int = 0
    jac_cost: float = JAC_COST
    hess_cost: float = HESS_COST

    def __post_init__(self):
        if min(self.plain_evals, self.jacobian_calls, self.hessian_calls) < 0:
            raise ContractError("call counts must be nonnegative")
        if self.jac_cost <= 0 or self.hess_cost <= 0:
            raise ContractError("cost factors must be positive")

    def __add__(self, other: "BudgetLedger") -> "BudgetLedger":
        return BudgetLedger(self.plain_evals + other.plain_evals, self.jacobian_calls + other.jacobian_calls,
                            self.hessian_calls + other.hessian_calls, self.jac_cost, self.hess_cost)


def equivalent_evals(ledger: BudgetLedger) -> float:
    """plain + jac_cost * jacobians + hess_cost * hessians.

    Summed in decimal so the result is the correctly rounded value of the
    decimal cost factors (10 * 1.47 + 10 * 1.89 is 33.6, not 33.599...).
    """
    total = (Decimal(ledger.plain_evals) + Decimal(repr(ledger.jac_cost)) * ledger.jacobian_calls
             + Decimal(repr(ledger.hess_cost)) * ledger.hessian_calls)
    return float(total)
