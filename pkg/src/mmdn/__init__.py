"""Set-oriented MMD-Newton refinement of NSGA-II Pareto front approximations."""
from .hybrid import RunConfig, RunRecord, run_baseline_matched, run_hybrid, run_pair, select_kernel
from .kernels import Family, KernelSpec
from .metrics import BudgetLedger, delta_p, equivalent_evals, gd_p, igd_p
from .mmd import mmd_grad_decision, mmd_grad_objective, mmd_hess_decision, mmd_hess_objective, mmd_sq
from .moea import MoeaConfig, nsga2_run
from .newton import mmdn_run, precondition
from .problems import PROBLEMS, make_problem
from .refset import ReferenceSetConfig, build_reference_set, generate_reference_set

__version__ = "0.1.0"
