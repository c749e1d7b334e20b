"""Hybrid NSGA-II + MMD-Newton runs, budget-matched baselines and aggregation."""
from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import linalg
from .kernels import Family, KernelSpec
from .metrics import BudgetLedger, delta_p, equivalent_evals, reference_front
from .mmd import assemble_decision_hessian, mmd_grad_objective, mmd_hess_objective
from .moea import NSGA2, MoeaConfig, nondominated_sort
from .newton import PreconditioningError, mmdn_run, precondition
from .problems import make_problem
from .refset import ReferenceSetConfig, build_reference_set

log = logging.getLogger(__name__)

MODES = ("hybrid", "moea-alone", "mmdn-only")
THETA_GRID = (1e-2, 1e-1, 1.0, 10.0, 100.0, 500.0, 1000.0, 5000.0)

# tuned kernel per problem for an NSGA-II warm start
KERNEL_PRESET = {
    "zdt1": KernelSpec.gaussian(2000.0),
    "zdt2": KernelSpec.gaussian(2000.0),
    "zdt3": KernelSpec.gaussian(2000.0),
    "zdt4": KernelSpec.laplace(1.0),
    **{f"dtlz{i}": KernelSpec.laplace(500.0) for i in range(1, 8)},
}


def default_mu(k: int) -> int:
    return 40 if k == 2 else 91


@dataclass
class RunConfig:
    problem: str
    mode: str = "hybrid"
    mu: Optional[int] = None  # None: 40 for two objectives, 91 for three
    n1: int = 300
    n2: int = 5
    eps: float = 1e-6
    kernel: str = "preset"  # "preset", "auto", "gaussian" or "laplace"
    theta: Optional[float] = None
    n: Optional[int] = None  # decision dimension; None: problem default
    delta: float = 0.08
    fill_multiplier: int = 10
    kmeans_iters: int = 50
    dbscan_min_pts: int = 3
    crossover_prob: float = 0.9
    crossover_eta: float = 15.0
    mutation_eta: float = 20.0
    newton_mode: str = "active-set"
    seeds: list = field(default_factory=lambda: [0])
    out: Optional[str] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mu is not None and self.mu < 2:
            raise ValueError("mu must be at least 2")
        if self.n1 < 0 or self.n2 < 0:
            raise ValueError("n1 and n2 must be nonnegative")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.kernel not in ("auto", "preset", "gaussian", "laplace"):
            raise ValueError(f"unknown kernel choice {self.kernel!r}")
        if self.kernel in ("gaussian", "laplace") and not (self.theta and self.theta > 0):
            raise ValueError("an explicit kernel family needs a positive theta")

    def resolved_mu(self, problem) -> int:
        return self.mu if self.mu is not None else default_mu(problem.k)

    def config_hash(self) -> str:
        d = asdict(self)
        d.pop("seeds")
        d.pop("out")
        return hashlib.sha256(canonical_json(d).encode()).hexdigest()[:16]


@dataclass
class RunRecord:
    config_hash: str
    problem: str
    mode: str
    seed: int
    mu: int
    delta2: float
    mmd2: Optional[float]
    kernel: Optional[str]
    moea_budget: dict
    newton_budget: dict
    equivalent_evals: float
    generations: int
    trace: list
    status: str
    Y: list
    R: Optional[list] = None
    wall_time: float = 0.0

    def to_json(self) -> str:
        return canonical_json(asdict(self))

    @classmethod
    def from_json(cls, line: str) -> "RunRecord":
        return cls(**json.loads(line))


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def _ledger_dict(ledger: BudgetLedger) -> dict:
    return {"plain_evals": ledger.plain_evals, "jacobian_calls": ledger.jacobian_calls,
            "hessian_calls": ledger.hessian_calls}


# ---------------------------------------------------------------------------
# kernel selection


@dataclass(frozen=True)
class KernelScore:
    kernel: KernelSpec
    tau: float
    condition: float


def _free_coordinates(problem, X0, tol=1e-6) -> np.ndarray:
    """Flat mask of decision coordinates not sitting on a Newton box face."""
    lo = np.broadcast_to(problem.newton_lower, X0.shape)
    hi = np.broadcast_to(problem.newton_upper, X0.shape)
    return ((X0 > lo + tol) & (X0 < hi - tol)).ravel()


def select_kernel(problem, X0, R0, thetas=THETA_GRID, return_scores: bool = False, eps: float = 1e-6):
    """Pick the (family, theta) whose shifted decision-space Hessian is best conditioned.

    For every pair the Hessian of MMD^2 at X0 is shifted by the smallest tau
    that makes it positive definite and its condition number is computed.
    Like the Newton step, only coordinates off the box faces are scored.
    Pairs whose gradient norm is <= eps are skipped: the kernel no longer
    couples the set to R0 there, so the Hessian is (numerically) zero and
    its condition number says nothing.  Ties go to the Gaussian family,
    then to the smaller theta.
    """
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    R0 = np.atleast_2d(np.asarray(R0, dtype=float))
    if X0.size == 0 or R0.size == 0:
        raise linalg.ContractError("select_kernel needs nonempty X0 and R0")
    Y = problem.evaluate(X0)
    DF = np.stack([problem.jacobian(x) for x in X0])
    D2F = np.stack([problem.hessian_tensor(x) for x in X0])
    free = _free_coordinates(problem, X0)
    if not free.any():
        free[:] = True
    scores = []
    for fam in (Family.GAUSSIAN, Family.LAPLACE):
        for theta in sorted(thetas):
            kern = KernelSpec(fam, float(theta))
            G = mmd_grad_objective(Y, R0, kern)
            g = np.einsum("ik,ikn->in", G, DF).ravel()[free]
            if not np.all(np.isfinite(g)) or np.linalg.norm(g) <= eps:
                continue
            H = assemble_decision_hessian(mmd_hess_objective(Y, R0, kern), G, DF, D2F)[np.ix_(free, free)]
            try:
                pre = precondition(H)
            except PreconditioningError:
                continue
            w = np.linalg.eigvalsh(linalg.symmetrize(H) + pre.tau * np.eye(len(H)))
            cond = float(w[-1] / w[0]) if w[0] > 0 else np.inf
            scores.append(KernelScore(kern, pre.tau, cond))
    if not scores:
        raise PreconditioningError("no kernel in the grid could be preconditioned")
    # stable min keeps the first (Gaussian, smaller theta) among equal condition numbers
    best = min(scores, key=lambda s: s.condition)
    return (best.kernel, scores) if return_scores else best.kernel


def _resolve_kernel(cfg: RunConfig, problem, X0, R) -> KernelSpec:
    if cfg.kernel == "preset" and problem.name in KERNEL_PRESET:
        return KERNEL_PRESET[problem.name]
    if cfg.kernel in ("gaussian", "laplace"):
        return KernelSpec(Family(cfg.kernel), float(cfg.theta))
    return select_kernel(problem, X0, R)  # "auto", or a problem without a preset


# ---------------------------------------------------------------------------
# runs


def _final_delta2(problem, Y, front) -> float:
    first = nondominated_sort(Y)[0]
    return delta_p(Y[first], front, 2.0)


def _moea_config(cfg: RunConfig, mu: int, seed: int) -> MoeaConfig:
    return MoeaConfig(pop_size=mu, crossover_prob=cfg.crossover_prob, crossover_eta=cfg.crossover_eta,
                      mutation_eta=cfg.mutation_eta, seed=seed)


def _refset_config(cfg: RunConfig, mu: int, seed: int) -> ReferenceSetConfig:
    return ReferenceSetConfig(target_size=mu, delta=cfg.delta, dbscan_min_pts=cfg.dbscan_min_pts,
                              fill_multiplier=cfg.fill_multiplier, kmeans_iters=cfg.kmeans_iters, seed=seed)


@dataclass
class _Context:
    problem: object
    mu: int
    front: np.ndarray
    moea: NSGA2


def _context(cfg: RunConfig, seed: int) -> _Context:
    problem = make_problem(cfg.problem, cfg.n)
    mu = cfg.resolved_mu(problem)
    return _Context(problem, mu, reference_front(problem), NSGA2(problem, _moea_config(cfg, mu, seed)))


def _moea_record(cfg: RunConfig, ctx: _Context, seed: int, mode: str, t0: float) -> RunRecord:
    pop = ctx.moea.pop
    ledger = BudgetLedger(pop.eval_count, 0, 0)
    return RunRecord(
        config_hash=cfg.config_hash(), problem=ctx.problem.name, mode=mode, seed=seed, mu=ctx.mu,
        delta2=_final_delta2(ctx.problem, pop.F, ctx.front), mmd2=None, kernel=None,
        moea_budget=_ledger_dict(ledger), newton_budget=_ledger_dict(BudgetLedger()),
        equivalent_evals=equivalent_evals(ledger), generations=pop.generation, trace=[], status="ok",
        Y=pop.F.tolist(), R=None, wall_time=time.perf_counter() - t0,
    )


def _newton_phase(cfg: RunConfig, ctx: _Context, seed: int, X0, Y0, R, moea_ledger: BudgetLedger,
                  mode: str, t0: float) -> RunRecord:
    problem, mu = ctx.problem, ctx.mu
    status = "ok"
    try:
        kernel = _resolve_kernel(cfg, problem, X0, R)
        state, trace = mmdn_run(X0, problem, R, kernel, max_iter=cfg.n2, eps=cfg.eps, mode=cfg.newton_mode, Y0=Y0)
        X = state.X
        Y = problem.evaluate(X)  # re-evaluation of the accepted iterate, not charged
        # trace counts whole-set calls; the budget counts single points
        newton = BudgetLedger(mu * trace.evaluations, mu * trace.jacobian_calls, mu * trace.hessian_calls)
        mmd2, trace_d, kname = trace.mmd2_final, trace.to_dicts(), str(kernel)
        if trace.status in ("singular", "nan"):
            status = f"newton-{trace.status}"
    except Exception as err:  # a failed phase still yields a (flagged) record
        log.exception("Newton phase failed")
        Y, newton, mmd2, trace_d, kname, status = np.asarray(Y0), BudgetLedger(), None, [], None, f"failed: {err}"
    total = moea_ledger + newton
    return RunRecord(
        config_hash=cfg.config_hash(), problem=problem.name, mode=mode, seed=seed, mu=mu,
        delta2=_final_delta2(problem, Y, ctx.front), mmd2=mmd2, kernel=kname,
        moea_budget=_ledger_dict(moea_ledger), newton_budget=_ledger_dict(newton),
        equivalent_evals=equivalent_evals(total), generations=ctx.moea.pop.generation, trace=trace_d,
        status=status, Y=Y.tolist(), R=np.asarray(R).tolist(), wall_time=time.perf_counter() - t0,
    )


def _warm_start(cfg: RunConfig, ctx: _Context, seed: int):
    """Run NSGA-II for n1 generations and build the reference set from its result."""
    pop = ctx.moea.run(cfg.n1).copy()
    Y0 = pop.F
    first = nondominated_sort(Y0)[0]
    base = Y0[first] if len(first) >= max(cfg.dbscan_min_pts, 2) else Y0
    R = build_reference_set(base, _refset_config(cfg, ctx.mu, seed)).R
    return pop, R


def run_hybrid(cfg: RunConfig, seed: int, _ctx: Optional[_Context] = None) -> RunRecord:
    """NSGA-II warm start, reference set, kernel choice and Newton refinement."""
    t0 = time.perf_counter()
    ctx = _ctx or _context(cfg, seed)
    if cfg.mode == "moea-alone":
        ctx.moea.run(cfg.n1)
        return _moea_record(cfg, ctx, seed, "moea-alone", t0)
    if cfg.mode == "mmdn-only":
        # Newton from the random initial population towards the sampled front
        pop = ctx.moea.pop.copy()
        R = build_reference_set(ctx.problem.front_sample(ctx.mu), _refset_config(cfg, ctx.mu, seed)).R
        ledger = BudgetLedger(pop.eval_count, 0, 0)
        return _newton_phase(cfg, ctx, seed, pop.X, pop.F, R, ledger, "mmdn-only", t0)
    pop, R = _warm_start(cfg, ctx, seed)
    if cfg.n2 == 0:
        rec = _moea_record(cfg, ctx, seed, "hybrid", t0)
        return rec
    return _newton_phase(cfg, ctx, seed, pop.X, pop.F, R, BudgetLedger(pop.eval_count, 0, 0), "hybrid", t0)


def extra_generations(extra_evals: float, mu: int) -> int:
    return max(0, math.ceil(extra_evals / mu - 1e-12))


def run_baseline_matched(cfg: RunConfig, seed: int, hybrid_record: RunRecord,
                         _ctx: Optional[_Context] = None) -> RunRecord:
    """NSGA-II continued past n1 until it has spent at least the hybrid's equivalent budget."""
    t0 = time.perf_counter()
    ctx = _ctx
    if ctx is None:
        ctx = _context(cfg, seed)
        ctx.moea.run(cfg.n1)
    newton = BudgetLedger(**hybrid_record.newton_budget)
    ctx.moea.run(extra_generations(equivalent_evals(newton), ctx.mu))
    rec = _moea_record(cfg, ctx, seed, "moea-matched", t0)
    return rec


def run_pair(cfg: RunConfig, seed: int) -> tuple:
    """Hybrid and budget-matched baseline sharing one NSGA-II phase."""
    ctx = _context(cfg, seed)
    hyb = run_hybrid(cfg, seed, _ctx=ctx)
    base = run_baseline_matched(cfg, seed, hyb, _ctx=ctx)
    return hyb, base


# ---------------------------------------------------------------------------
# aggregation


@dataclass
class SummaryRow:
    problem: str
    mode: str
    seed_count: int
    median_d2: float
    q10_d2: float
    q90_d2: float
    median_budget: float


def summarize(records) -> list:
    groups: dict = {}
    for r in records:
        groups.setdefault((r.problem, r.mode), []).append(r)
    rows = []
    for (problem, mode), rs in sorted(groups.items()):
        d2 = np.array([r.delta2 for r in rs], dtype=float)
        budget = np.array([r.equivalent_evals for r in rs], dtype=float)
        rows.append(SummaryRow(problem, mode, len(rs), float(np.median(d2)), float(np.quantile(d2, 0.1)),
                               float(np.quantile(d2, 0.9)), float(np.median(budget))))
    return rows


def win_loss(rows) -> dict:
    """Per problem: 'win' if the hybrid median is below the baseline median, else 'loss'."""
    by = {(r.problem, r.mode): r for r in rows}
    out = {}
    for (problem, mode), r in by.items():
        if mode != "hybrid":
            continue
        base = by.get((problem, "moea-matched")) or by.get((problem, "moea-alone"))
        if base is not None:
            out[problem] = "win" if r.median_d2 < base.median_d2 else ("tie" if r.median_d2 == base.median_d2 else "loss")
    return out
