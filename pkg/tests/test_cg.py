import itertools

import numpy as np
import pytest
import scipy.sparse as sp

from hyperrank.cg import CgConfig, as_operator, cg_iterations, cg_solve
from hyperrank.errors import ContractViolation, ConvergenceError, InvalidInputError, ShapeError

from conftest import gauss_solve, random_spd


def test_identity_one_iteration(rng):
    y = rng.standard_normal(12)
    res = cg_solve(np.eye(12), y, theta=9.0)
    assert res.iters == 1
    assert np.allclose(res.f, 0.9 * y, atol=1e-15)


def test_hand_2x2():
    # fold theta into b: theta = 1 gives b = y / 2
    X = np.array([[4.0, 1.0], [1.0, 3.0]])
    res = cg_solve(X, np.array([2.0, 4.0]), theta=1.0)
    assert np.allclose(res.f, [1 / 11, 7 / 11], atol=1e-14)
    assert res.iters <= 2


def test_random_spd_300_against_gauss(rng):
    X = random_spd(rng, 300, cond=50)
    y = rng.standard_normal(300)
    res = cg_solve(X, y, theta=0.5, cfg=CgConfig(rel_tolerance=1e-12))
    oracle = gauss_solve(X, (0.5 / 1.5) * y)
    assert np.max(np.abs(res.f - oracle)) <= 1e-7
    assert res.iters <= 300
    assert res.residual <= 1e-12 * 1.01


def test_zero_rhs():
    res = cg_solve(np.eye(3), np.zeros(3), theta=1.0)
    assert res.iters == 0 and np.array_equal(res.f, np.zeros(3))


def test_residual_recurrence_tracks_true_residual(rng):
    X = random_spd(rng, 60, cond=20)
    b = rng.standard_normal(60)
    apply = as_operator(X)
    for state in itertools.islice(cg_iterations(apply, b, np.zeros(60)), 30):
        assert np.linalg.norm(b - X @ state.f - state.r) <= 5e-12 * np.linalg.norm(b)


def test_orthogonality_and_conjugacy(rng):
    X = random_spd(rng, 80, cond=30)
    b = rng.standard_normal(80)
    states = list(itertools.islice(cg_iterations(as_operator(X), b, np.zeros(80)), 10))
    rs = [s.r for s in states]
    ps = [s.p for s in states]
    for i, j in itertools.combinations(range(10), 2):
        assert abs(rs[i] @ rs[j]) <= 1e-8 * np.linalg.norm(rs[i]) * np.linalg.norm(rs[j])
        scale = np.sqrt((ps[i] @ X @ ps[i]) * (ps[j] @ X @ ps[j]))
        assert abs(ps[i] @ X @ ps[j]) <= 1e-8 * scale


def test_first_step_matches_recurrences(rng):
    X = random_spd(rng, 10)
    b = rng.standard_normal(10)
    f0 = rng.standard_normal(10)
    it = cg_iterations(as_operator(X), b, f0)
    s0, s1 = next(it), next(it)
    r0 = b - X @ f0
    assert np.array_equal(s0.r, r0) and np.array_equal(s0.p, r0)
    alpha = (r0 @ r0) / (r0 @ X @ r0)
    r1 = r0 - alpha * X @ r0
    beta = (r1 @ r1) / (r0 @ r0)
    assert np.isclose(s1.alpha, alpha, rtol=1e-13)
    assert np.isclose(s1.beta, beta, rtol=1e-12)
    assert np.allclose(s1.f, f0 + alpha * r0, rtol=1e-13)
    assert np.allclose(s1.p, r1 + beta * r0, rtol=1e-12)


def test_finite_termination_distinct_eigenvalues(rng):
    d = 25
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    X = (Q * np.arange(1.0, d + 1)) @ Q.T
    res = cg_solve(X, rng.standard_normal(d), theta=1.0, cfg=CgConfig(rel_tolerance=1e-10, max_iters=d))
    assert res.iters <= d and res.residual < 1e-10


def test_energy_error_monotone(rng):
    X = random_spd(rng, 50, cond=200)
    b = rng.standard_normal(50)
    fstar = np.linalg.solve(X, b)
    prev = np.inf
    for state in itertools.islice(cg_iterations(as_operator(X), b, np.zeros(50)), 40):
        e = state.f - fstar
        energy = np.sqrt(e @ X @ e)
        assert energy <= prev * (1 + 1e-12)
        prev = energy


def test_matrix_free_and_sparse_operators(rng):
    X = sp.diags([np.full(99, -1.0), np.full(100, 4.0), np.full(99, -1.0)], [-1, 0, 1], format="csr")
    y = rng.standard_normal(100)
    ref = cg_solve(X, y, theta=1.0).f
    assert np.allclose(cg_solve(lambda v: X @ v, y, theta=1.0).f, ref, atol=1e-14)

    class Op:
        shape = (100, 100)

        def matvec(self, v):
            return X @ v

    assert np.allclose(cg_solve(Op(), y, theta=1.0).f, ref, atol=1e-14)


def test_convergence_error_carries_best_iterate(rng):
    X = random_spd(rng, 100, cond=1e4)
    with pytest.raises(ConvergenceError) as info:
        cg_solve(X, rng.standard_normal(100), theta=1.0, cfg=CgConfig(max_iters=3))
    err = info.value
    assert err.f.shape == (100,) and err.iters == 3 and err.residual > 1e-8


def test_symmetry_check_and_indefinite():
    nonsym = np.array([[2.0, 1.0], [0.0, 2.0]])
    with pytest.raises(ContractViolation):
        cg_solve(nonsym, np.ones(2), theta=1.0, cfg=CgConfig(check_symmetry=True))
    with pytest.raises(ContractViolation):
        cg_solve(-np.eye(3), np.ones(3), theta=1.0)


def test_argument_validation():
    with pytest.raises(InvalidInputError):
        CgConfig(rel_tolerance=0)
    with pytest.raises(InvalidInputError):
        CgConfig(max_iters=0)
    with pytest.raises(InvalidInputError):
        cg_solve(np.eye(2), np.ones(2), theta=0.0)
    with pytest.raises(ShapeError):
        cg_solve(np.eye(3), np.ones(2), theta=1.0)
    with pytest.raises(InvalidInputError):
        as_operator(42)
