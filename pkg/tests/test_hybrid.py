import json
import math

import numpy as np
import pytest

from mmdn.hybrid import (KERNEL_PRESET, THETA_GRID, RunConfig, RunRecord, _resolve_kernel, extra_generations,
                         run_baseline_matched, run_hybrid, run_pair, select_kernel, summarize, win_loss)
from mmdn.kernels import Family, KernelSpec
from mmdn.linalg import symmetrize
from mmdn.metrics import BudgetLedger, equivalent_evals
from mmdn.mmd import mmd_hess_decision
from mmdn.newton import precondition
from mmdn.problems import Problem, make_problem

SMALL = dict(mu=10, n1=15, n2=3)


def _strip_time(rec: RunRecord) -> str:
    d = json.loads(rec.to_json())
    d.pop("wall_time")
    return json.dumps(d, sort_keys=True)


# ---------------------------------------------------------------------------
# kernel selection


def _toy_case():
    p = make_problem("toy-biobj")
    t = np.linspace(-0.6, 0.6, 5)
    X0 = np.c_[t, t] + np.random.default_rng(0).uniform(-0.1, 0.1, (5, 2))
    R = p.evaluate(np.c_[t, t]) - 0.2
    return p, X0, R


def test_select_kernel_from_grid_and_deterministic():
    p, X0, R = _toy_case()
    a, b = select_kernel(p, X0, R), select_kernel(p, X0, R)
    assert a == b
    assert a.family in (Family.GAUSSIAN, Family.LAPLACE) and a.theta in THETA_GRID


def test_select_kernel_is_exhaustive_minimum():
    p, X0, R = _toy_case()
    best, scores = select_kernel(p, X0, R, return_scores=True)
    conds = {}
    for fam in (Family.GAUSSIAN, Family.LAPLACE):
        for theta in THETA_GRID:
            kern = KernelSpec(fam, theta)
            H = mmd_hess_decision(X0, p, R, kern)
            tau = precondition(H).tau
            w = np.linalg.eigvalsh(symmetrize(H) + tau * np.eye(len(H)))
            conds[kern] = w[-1] / w[0]
    scored = {s.kernel: s.condition for s in scores}
    for kern, c in scored.items():
        assert c == pytest.approx(conds[kern], rel=1e-8)
    assert best == min(scored, key=scored.get)


class IdentityProblem(Problem):
    """F(x) = x on a wide box, so decision and objective Hessians coincide."""

    name = "identity"
    k = 2

    def __init__(self):
        super().__init__(2, -10.0, 10.0)

    def evaluate(self, X):
        return np.asarray(X, float).copy()

    def jacobian(self, x):
        return np.eye(2)

    def hessian_tensor(self, x):
        return np.zeros((2, 2, 2))


def test_select_kernel_picks_the_unshifted_well_conditioned_theta():
    # one point, one reference at squared distance 0.45: the Gaussian Hessian is
    # 4 theta k (I - 2 theta d d^T), so theta = 1 is positive definite with
    # condition exactly 10, theta = 10 is indefinite and needs a shift, and at
    # theta = 100 the kernel no longer couples the point to the reference
    p = IdentityProblem()
    X0 = np.array([[0.0, 0.0]])
    R = np.array([[np.sqrt(0.45), 0.0]])
    thetas = (1.0, 10.0, 100.0)
    best, scores = select_kernel(p, X0, R, thetas=thetas, return_scores=True)
    by = {s.kernel: s for s in scores}
    one = by[KernelSpec.gaussian(1.0)]
    assert one.tau == 0.0 and one.condition == pytest.approx(10.0, rel=1e-10)
    assert by[KernelSpec.gaussian(10.0)].tau > 0
    assert KernelSpec.gaussian(100.0) not in by
    assert best == KernelSpec.gaussian(1.0)
    assert all(s.condition > 10.0 for s in scores if s.kernel != best)


def test_resolve_kernel_choices():
    p, X0, R = _toy_case()
    zdt1 = make_problem("zdt1")
    assert _resolve_kernel(RunConfig("zdt1"), zdt1, None, None) == KERNEL_PRESET["zdt1"]
    assert _resolve_kernel(RunConfig("toy-biobj"), p, X0, R) == select_kernel(p, X0, R)
    explicit = RunConfig("zdt1", kernel="laplace", theta=3.0)
    assert _resolve_kernel(explicit, zdt1, None, None) == KernelSpec.laplace(3.0)


# ---------------------------------------------------------------------------
# runs


def test_no_newton_iterations_equals_moea_alone():
    a = run_hybrid(RunConfig("zdt1", n2=0, mu=10, n1=15), seed=3)
    b = run_hybrid(RunConfig("zdt1", mode="moea-alone", mu=10, n1=15), seed=3)
    assert a.delta2 == b.delta2 and a.Y == b.Y
    assert a.equivalent_evals == b.equivalent_evals == 10 * 16


def test_hybrid_record_contents():
    rec = run_hybrid(RunConfig("zdt1", **SMALL), seed=0)
    assert rec.status == "ok" and rec.mode == "hybrid"
    assert rec.delta2 >= 0 and rec.mmd2 is not None
    assert rec.moea_budget == {"plain_evals": 160, "jacobian_calls": 0, "hessian_calls": 0}
    nb = rec.newton_budget
    assert nb["jacobian_calls"] == 10 * len(rec.trace) == nb["hessian_calls"]
    total = BudgetLedger(**rec.moea_budget) + BudgetLedger(**nb)
    assert rec.equivalent_evals == equivalent_evals(total)
    assert len(rec.R) == 10


def test_mmdn_only_mode():
    rec = run_hybrid(RunConfig("toy-biobj", mode="mmdn-only", mu=6, n2=5), seed=1)
    assert rec.mode == "mmdn-only" and rec.status == "ok"
    assert rec.moea_budget["plain_evals"] == 6


def test_reproducible():
    cfg = RunConfig("dtlz2", mu=12, n1=10, n2=2)
    assert _strip_time(run_hybrid(cfg, 5)) == _strip_time(run_hybrid(cfg, 5))


def test_record_round_trip():
    line = run_hybrid(RunConfig("zdt2", **SMALL), seed=1).to_json()
    assert RunRecord.from_json(line).to_json() == line


def test_extra_generations_example():
    mu = 10
    newton = BudgetLedger(5 * mu, 5, 5)
    extra = equivalent_evals(newton)
    assert extra == pytest.approx(5 * mu + 5 * 1.47 + 5 * 1.89)
    assert extra_generations(extra, mu) == math.ceil(extra / mu) == 7
    assert extra_generations(0.0, mu) == 0
    assert extra_generations(30.0, mu) == 3


def test_zero_newton_work_baseline_equals_moea_phase():
    cfg = RunConfig("zdt1", **SMALL)
    fake = run_hybrid(RunConfig("zdt1", n2=0, mu=10, n1=15), seed=2)
    base = run_baseline_matched(cfg, 2, fake)
    alone = run_hybrid(RunConfig("zdt1", mode="moea-alone", mu=10, n1=15), seed=2)
    assert base.Y == alone.Y and base.generations == 15


@pytest.mark.parametrize("name", ["zdt1", "dtlz2"])
def test_budget_fairness(name):
    cfg = RunConfig(name, mu=10, n1=15, n2=3)
    hyb, base = run_pair(cfg, seed=0)
    assert base.equivalent_evals >= hyb.equivalent_evals
    assert base.equivalent_evals - hyb.equivalent_evals < hyb.mu
    assert base.mode == "moea-matched"


def test_pair_shares_the_moea_phase():
    cfg = RunConfig("zdt1", **SMALL)
    hyb, base = run_pair(cfg, seed=4)
    alone = run_baseline_matched(cfg, 4, hyb)
    assert base.Y == alone.Y


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig("zdt1", mode="other")
    with pytest.raises(ValueError):
        RunConfig("zdt1", mu=1)
    with pytest.raises(ValueError):
        RunConfig("zdt1", n2=-1)
    with pytest.raises(ValueError):
        RunConfig("zdt1", eps=0.0)
    with pytest.raises(ValueError):
        RunConfig("zdt1", kernel="gaussian")


def test_config_hash_ignores_seeds_and_output():
    a = RunConfig("zdt1", seeds=[0], out="a")
    b = RunConfig("zdt1", seeds=[1, 2], out="b")
    assert a.config_hash() == b.config_hash() != RunConfig("zdt2").config_hash()


# ---------------------------------------------------------------------------
# aggregation


def _records(values, mode="hybrid", problem="zdt1"):
    return [RunRecord("h", problem, mode, i, 10, v, None, None, {}, {}, 100.0 + i, 0, [], "ok", [])
            for i, v in enumerate(values)]


def test_summary_quantiles_example():
    (row,) = summarize(_records([0.1 * i for i in range(1, 11)]))
    assert row.seed_count == 10
    assert row.median_d2 == pytest.approx(0.55)
    assert row.q10_d2 == pytest.approx(0.19)
    assert row.q90_d2 == pytest.approx(0.91)


def test_summary_matches_sorting_oracle():
    rng = np.random.default_rng(9)
    for n in range(1, 25):
        v = rng.random(n)
        (row,) = summarize(_records(v))
        s = np.sort(v)

        def q(p):
            h = (n - 1) * p
            lo = int(math.floor(h))
            return s[lo] + (h - lo) * (s[min(lo + 1, n - 1)] - s[lo])

        assert row.median_d2 == pytest.approx(q(0.5), abs=1e-15)
        assert row.q10_d2 == pytest.approx(q(0.1), abs=1e-15)
        assert row.q90_d2 == pytest.approx(q(0.9), abs=1e-15)


def test_win_loss():
    rows = summarize(_records([0.1, 0.2]) + _records([0.3, 0.4], mode="moea-matched")
                     + _records([0.5], problem="zdt2") + _records([0.4], mode="moea-matched", problem="zdt2"))
    assert win_loss(rows) == {"zdt1": "win", "zdt2": "loss"}
