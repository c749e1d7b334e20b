import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _fd import fd_gradient, fd_jacobian, rel_err
from mmdn.kernels import KernelSpec, kernel_value
from mmdn.linalg import ContractError
from mmdn.mmd import (IllConditionedRatioError, assemble_decision_hessian, gradient_row_bound,
                      hessian_block_bounds, kkt_slope_estimate, mmd_grad_decision, mmd_grad_objective,
                      mmd_hess_decision, mmd_hess_objective, mmd_sq, stack, unstack)
from mmdn.problems import Problem, make_problem

G1 = KernelSpec.gaussian(1.0)


def brute_mmd(Y, R, kern):
    mu, lam = len(Y), len(R)
    s = 0.0
    for a in Y:
        for b in Y:
            s += kernel_value(kern, a, b) / mu**2
    for a in R:
        for b in R:
            s += kernel_value(kern, a, b) / lam**2
    for a in Y:
        for b in R:
            s -= 2 * kernel_value(kern, a, b) / (mu * lam)
    return s


def block_eigs(H, mu, k, m, l):
    B = H[m * k:(m + 1) * k, l * k:(l + 1) * k]
    return np.linalg.eigvalsh(0.5 * (B + B.T)) if m == l else np.linalg.eigvals(B).real


# ---------------------------------------------------------------------------
# value


def test_mmd_zero_for_identical_sets():
    Y = np.random.default_rng(0).random((6, 3))
    assert abs(mmd_sq(Y, Y, G1)) <= 1e-12
    assert abs(mmd_sq(Y, Y, KernelSpec.laplace(3.0))) <= 1e-12


def test_mmd_single_points():
    assert mmd_sq([[0.0, 0.0]], [[1.0, 0.0]], G1) == pytest.approx(2 - 2 / np.e, abs=1e-15)


def test_mmd_matches_double_loop():
    rng = np.random.default_rng(1)
    Y, R = rng.random((5, 2)), rng.random((5, 2))
    for kern in (G1, KernelSpec.laplace(2.0)):
        assert abs(mmd_sq(Y, R, kern) - brute_mmd(Y, R, kern)) <= 1e-14


def test_mmd_rejects_bad_sets():
    with pytest.raises(ContractError):
        mmd_sq(np.zeros((0, 2)), np.zeros((3, 2)), G1)
    with pytest.raises(ContractError):
        mmd_sq(np.zeros((2, 2)), np.zeros((3, 3)), G1)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 6), st.integers(1, 3),
       st.sampled_from([0.1, 1.0, 10.0]), st.booleans())
def test_mmd_nonnegative(seed, mu, lam, k, theta, laplace):
    rng = np.random.default_rng(seed)
    kern = KernelSpec.laplace(theta) if laplace else KernelSpec.gaussian(theta)
    assert mmd_sq(rng.random((mu, k)), rng.random((lam, k)), kern) >= -1e-12


def test_stack_round_trip():
    X = np.arange(12.0).reshape(4, 3)
    np.testing.assert_array_equal(unstack(stack(X), 3), X)
    with pytest.raises(ContractError):
        unstack(np.arange(5.0), 3)


# ---------------------------------------------------------------------------
# objective-space derivatives


def test_symmetric_configuration_is_stationary():
    Y = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0]])
    R = np.array([[0.0, 1.0], [0.0, -1.0]])
    assert np.max(np.abs(mmd_grad_objective(Y, R, G1)[0])) <= 1e-12


def test_gradient_vanishes_at_reference():
    Y = np.random.default_rng(2).random((5, 2))
    assert np.max(np.abs(mmd_grad_objective(Y, Y.copy(), G1))) <= 1e-10


def test_objective_gradient_finite_differences():
    rng = np.random.default_rng(3)
    Y, R = rng.random((4, 2)), rng.random((6, 2))
    g = mmd_grad_objective(Y, R, G1).ravel()
    assert rel_err(g, fd_gradient(lambda Z: mmd_sq(Z, R, G1), Y, h=1e-5)) <= 1e-6


def test_objective_hessian_finite_differences():
    rng = np.random.default_rng(4)
    Y, R = rng.random((3, 2)), rng.random((4, 2))
    kern = KernelSpec.gaussian(0.7)
    H = mmd_hess_objective(Y, R, kern)
    H_fd = fd_jacobian(lambda Z: mmd_grad_objective(Z, R, kern), Y, h=1e-5)
    assert np.max(np.abs(H - H_fd)) <= 1e-4


def test_objective_hessian_single_point_is_reference_sum():
    rng = np.random.default_rng(5)
    y, R = rng.random((1, 2)), rng.random((4, 2))
    from mmdn.kernels import kernel_hess
    expect = -2.0 / 4 * kernel_hess(G1, R, y[0]).sum(axis=0)
    np.testing.assert_allclose(mmd_hess_objective(y, R, G1), expect, atol=1e-14)


def test_objective_hessian_symmetric():
    rng = np.random.default_rng(6)
    for _ in range(20):
        mu, k = rng.integers(1, 6), rng.integers(1, 4)
        H = mmd_hess_objective(rng.random((mu, k)), rng.random((rng.integers(1, 6), k)), G1)
        assert np.max(np.abs(H - H.T)) <= 1e-10


def test_laplace_derivatives_with_separated_points():
    rng = np.random.default_rng(7)
    kern = KernelSpec.laplace(1.5)
    checked = 0
    while checked < 10:
        Y, R = rng.random((3, 2)), rng.random((4, 2))
        Z = np.vstack([Y, R])
        d = np.linalg.norm(Z[:, None] - Z[None], axis=-1) + np.eye(len(Z))
        if d.min() < 0.1:
            continue
        checked += 1
        g = mmd_grad_objective(Y, R, kern).ravel()
        assert rel_err(g, fd_gradient(lambda W: mmd_sq(W, R, kern), Y)) <= 1e-5
        H_fd = fd_jacobian(lambda W: mmd_grad_objective(W, R, kern), Y, h=1e-5)
        assert np.max(np.abs(mmd_hess_objective(Y, R, kern) - H_fd)) <= 1e-4


def test_permutation_invariance():
    rng = np.random.default_rng(8)
    Y, R = rng.random((5, 3)), rng.random((4, 3))
    perm = rng.permutation(5)
    assert mmd_sq(Y[perm], R, G1) == pytest.approx(mmd_sq(Y, R, G1), abs=1e-15)
    np.testing.assert_allclose(mmd_grad_objective(Y[perm], R, G1), mmd_grad_objective(Y, R, G1)[perm], atol=1e-15)
    idx = (perm[:, None] * 3 + np.arange(3)).ravel()
    H = mmd_hess_objective(Y, R, G1)
    np.testing.assert_allclose(mmd_hess_objective(Y[perm], R, G1), H[np.ix_(idx, idx)], atol=1e-14)


# ---------------------------------------------------------------------------
# decision-space derivatives


class AffineProblem(Problem):
    name = "affine"
    k = 2

    def __init__(self):
        super().__init__(3, -1.0, 1.0)
        self.A = np.array([[1.0, 2.0, -1.0], [0.5, -1.0, 3.0]])

    def evaluate(self, X):
        return np.asarray(X, float) @ self.A.T + np.array([0.1, -0.2])

    def jacobian(self, x):
        return self.A.copy()

    def hessian_tensor(self, x):
        return np.zeros((2, 3, 3))


def test_affine_problem_hessian_is_pure_chain_rule():
    p = AffineProblem()
    rng = np.random.default_rng(9)
    X, R = rng.uniform(-1, 1, (3, 3)), rng.random((3, 2))
    H_obj = mmd_hess_objective(p.evaluate(X), R, G1)
    J = np.kron(np.eye(3), p.A)
    np.testing.assert_allclose(mmd_hess_decision(X, p, R, G1), J.T @ H_obj @ J, atol=1e-13)


def test_decision_gradient_zero_when_objective_gradient_zero():
    p = make_problem("toy-biobj")
    X = np.array([[0.2, -0.1], [0.5, 0.4]])
    Y = p.evaluate(X)
    np.testing.assert_allclose(mmd_grad_decision(X, p, Y, G1), 0.0, atol=1e-12)


def test_decision_gradient_zdt1_finite_differences():
    p = make_problem("zdt1")
    rng = np.random.default_rng(10)
    X = p.random_interior(rng, 3)
    R = p.front_sample(5)
    g = mmd_grad_decision(X, p, R, G1)
    assert rel_err(g, fd_gradient(lambda Z: mmd_sq(p.evaluate(Z), R, G1), X)) <= 1e-5


def test_decision_hessian_toy_finite_differences():
    p = make_problem("toy-biobj")
    rng = np.random.default_rng(11)
    X = rng.uniform(-1, 1, (2, 2))
    R = p.front_sample(4)
    kern = KernelSpec.gaussian(0.1)
    H_fd = fd_jacobian(lambda Z: mmd_grad_decision(Z, p, R, kern), X, h=1e-5)
    assert np.max(np.abs(mmd_hess_decision(X, p, R, kern) - H_fd)) <= 1e-4


@pytest.mark.parametrize("name", ["zdt1", "dtlz2"])
def test_decision_hessian_symmetric_and_matches_fd(name):
    p = make_problem(name)
    rng = np.random.default_rng(12)
    R = p.front_sample(6)
    for _ in range(10):
        X = p.random_interior(rng, 3)
        H = mmd_hess_decision(X, p, R, G1)
        assert np.max(np.abs(H - H.T)) <= 1e-8 * max(1.0, np.max(np.abs(H)))
    H_fd = fd_jacobian(lambda Z: mmd_grad_decision(Z, p, R, G1), X, h=1e-6)
    assert np.max(np.abs(H - H_fd)) <= 1e-4


def test_assemble_matches_objective_blocks_for_identity_map():
    rng = np.random.default_rng(13)
    mu, k = 3, 2
    Y, R = rng.random((mu, k)), rng.random((4, k))
    DF = np.stack([np.eye(k)] * mu)
    D2F = np.zeros((mu, k, k, k))
    H = assemble_decision_hessian(mmd_hess_objective(Y, R, G1), mmd_grad_objective(Y, R, G1), DF, D2F)
    np.testing.assert_allclose(H, mmd_hess_objective(Y, R, G1), atol=1e-15)


# ---------------------------------------------------------------------------
# spectral bounds


def _check_containment(Y, R, kern, slack=1e-8):
    mu, k = Y.shape
    b = hessian_block_bounds(Y, R, kern)
    H = mmd_hess_objective(Y, R, kern)
    for m in range(mu):
        for l in range(mu):
            w = block_eigs(H, mu, k, m, l)
            lo, hi = (b.diag_lower[m], b.diag_upper[m]) if m == l else (b.off_lower[m, l], b.off_upper[m, l])
            assert np.all(w >= lo - slack) and np.all(w <= hi + slack), (m, l, w, lo, hi)
    w = np.linalg.eigvalsh(H)
    assert np.all(np.abs(w) <= np.max(b.radius) + slack)
    # every eigenvalue falls in at least one [-R_l, R_l]
    assert all(np.any(np.abs(v) <= b.radius + slack) for v in w)


def test_bounds_at_reference():
    Y = np.random.default_rng(14).random((4, 2))
    b = hessian_block_bounds(Y, Y, G1)
    assert np.all(b.diag_upper >= 0)
    _check_containment(Y, Y.copy(), G1)


def test_bounds_random_clouds():
    rng = np.random.default_rng(15)
    for _ in range(10):
        _check_containment(rng.random((4, 2)), rng.random((4, 2)), G1)


def test_bounds_require_equal_sizes_and_gaussian():
    with pytest.raises(ContractError):
        hessian_block_bounds(np.zeros((2, 2)), np.zeros((3, 2)), G1)
    with pytest.raises(ValueError):
        hessian_block_bounds(np.zeros((2, 2)), np.ones((2, 2)), KernelSpec.laplace(1.0))


def test_gradient_row_bound():
    rng = np.random.default_rng(16)
    for _ in range(100):
        mu, k = rng.integers(1, 7), rng.integers(1, 4)
        Y, R = rng.random((mu, k)) * 2, rng.random((mu, k)) * 2
        kern = KernelSpec.gaussian(rng.uniform(0.05, 5))
        rows = np.linalg.norm(mmd_grad_objective(Y, R, kern), axis=1)
        assert np.all(rows <= gradient_row_bound(Y, R, kern) + 1e-12)


# ---------------------------------------------------------------------------
# KKT slope


def test_slope_small_theta_matches_center_of_mass():
    y = np.array([2.0, 2.0])
    R = y + np.array([[-1.2, -0.3], [-0.8, -0.9], [-1.5, -0.5], [-0.6, -1.1]])
    m = R.mean(axis=0) - y
    est = kkt_slope_estimate(R, y, 1e-4, samples=1_000_000, seed=0)
    assert abs(est - m[1] / m[0]) <= 0.05 * abs(m[1] / m[0])


def test_slope_zero_for_mirror_symmetric_reference():
    y = np.zeros(2)
    R = np.array([[-1.0, 0.4], [-1.0, -0.4], [-0.5, 0.8], [-0.5, -0.8]])
    est = kkt_slope_estimate(R, y, 0.5, samples=400_000, seed=1, full=True)
    assert abs(est.numerator) <= 4 * est.numerator_se
    assert abs(est.value) <= 0.05


def test_slope_seed_stability():
    y = np.array([4.0, 4.0])
    R = y + np.array([[-0.3, -0.1], [-0.2, -0.25], [-0.1, -0.35], [-0.25, -0.2]])
    a = kkt_slope_estimate(R, y, 10.0, samples=400_000, seed=2, full=True)
    b = kkt_slope_estimate(R, y, 10.0, samples=400_000, seed=3, full=True)
    # delta-method standard error of each ratio
    se = [abs(e.value) * np.hypot(e.numerator_se / e.numerator, e.denominator_se / e.denominator) for e in (a, b)]
    assert abs(a.value - b.value) <= 3 * np.hypot(*se)


def test_slope_ill_conditioned_denominator():
    y = np.zeros(2)
    R = np.array([[0.0, -1.0], [0.0, -2.0]])  # no offset along the first axis
    with pytest.raises(IllConditionedRatioError):
        kkt_slope_estimate(R, y, 1.0, samples=200_000, seed=0)


def test_slope_needs_enough_samples():
    with pytest.raises(ContractError):
        kkt_slope_estimate(np.ones((2, 2)), np.zeros(2), 1.0, samples=1000)


def test_block_bounds_do_not_cover_single_objective():
    # Known limitation: the diagonal upper bound charges mu copies of
    # -sigma_min(C) against the mu - 1 terms of the Y-Y sum.  With k >= 2 the
    # slack between m2 and sigma_max(C) absorbs this; with k = 1 it does not.
    # One point next to its reference: the true block is 4 theta k (1 - 2 theta d^2).
    theta, d = 1.0, 0.1
    Y, R = np.array([[0.0]]), np.array([[d]])
    H = mmd_hess_objective(Y, R, KernelSpec.gaussian(theta))
    exact = 4 * theta * np.exp(-theta * d * d) * (1 - 2 * theta * d * d)
    assert H[0, 0] == pytest.approx(exact, rel=1e-12)
    b = hessian_block_bounds(Y, R, KernelSpec.gaussian(theta))
    assert b.diag_upper[0] == 0.0 < H[0, 0]
    assert b.radius[0] < H[0, 0]
