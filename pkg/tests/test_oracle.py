import numpy as np
import pytest

from conftest import random_contact_system
from tresca_ssn.oracle import (
    OracleError,
    energy,
    largest_eigenvalue,
    oracle_solve,
    prox,
    residual_check,
    smooth_gradient,
)
from tresca_ssn.reduction import CondensedBoundarySystem, expand_blocks
from tresca_ssn.ssn import solve


def small_cbs(A, b) -> CondensedBoundarySystem:
    return CondensedBoundarySystem(
        A_tilde=np.asarray(A, float),
        b_tilde=np.asarray(b, float),
        interior_factor=None,
        K_IC=None,
        l_I=None,
        interior_dofs=np.array([], dtype=np.int64),
        contact_dofs=np.arange(len(b)),
    )


def spd(rng, n):
    M = rng.standard_normal((n, n))
    return M @ M.T + n * np.eye(n)


def test_frictionless_far_obstacle_is_linear_solve():
    rng = np.random.default_rng(0)
    A = spd(rng, 9)
    b = rng.standard_normal(9)
    sol = oracle_solve(small_cbs(A, b), gap=1e6, phi=0.0)
    u = np.linalg.solve(A, b)
    assert np.linalg.norm(sol.u - u) <= 1e-9 * np.linalg.norm(u)


def test_single_node_kkt():
    sol = oracle_solve(small_cbs(np.eye(3), [3.0, 4.0, -1.0]), gap=0.0, phi=1.0)
    assert np.allclose(sol.u, [2.4, 3.2, 0.0], rtol=0, atol=1e-10)
    assert sol.lam[0] == pytest.approx(1.0, abs=1e-10)
    assert np.allclose(sol.lifted(), [2.4, 3.2, 0.0, 1.0], atol=1e-10)
    # J = 0.5*16 - 25*0.8 + 4 = -8
    assert sol.objective == pytest.approx(-8.0, rel=1e-10)


def test_gradient_finite_difference():
    rng = np.random.default_rng(1)
    A, b = spd(rng, 6), rng.standard_normal(6)
    u = rng.standard_normal(6)
    h = 1e-6
    fd = np.array([
        (energy(A, b, np.zeros(2), u + h * e) - energy(A, b, np.zeros(2), u - h * e)) / (2 * h)
        for e in np.eye(6)
    ])
    assert np.allclose(fd, smooth_gradient(A, b, u), rtol=1e-7, atol=1e-7)


def test_largest_eigenvalue():
    rng = np.random.default_rng(2)
    A = spd(rng, 20)
    assert largest_eigenvalue(A) == pytest.approx(np.linalg.eigvalsh(A)[-1], rel=1e-8)
    assert largest_eigenvalue(np.zeros((3, 3))) == 0.0


def test_prox_cases():
    z = np.array([3.0, 4.0, -2.0, 0.1, 0.0, 5.0])
    out = prox(z, 0.5, np.array([2.0, 2.0]), np.array([0.5, 0.0]))
    # node 0: |z_tau| = 5, threshold 1 -> 0.8 scale; normal clipped to -0.5
    assert np.allclose(out[:3], [2.4, 3.2, -0.5])
    # node 1: |z_tau| = 0.1 below threshold -> zero; normal unchanged
    assert np.array_equal(out[3:], [0.0, 0.0, 5.0])


def test_objective_is_minimal_against_perturbations():
    rng = np.random.default_rng(3)
    p = 4
    A, b = spd(rng, 3 * p), 5 * rng.standard_normal(3 * p)
    gap, phi = rng.uniform(0, 0.3, p), rng.uniform(0.5, 2, p)
    sol = oracle_solve(small_cbs(A, b), gap, phi)
    for _ in range(200):
        trial = prox(sol.u + 1e-3 * rng.standard_normal(3 * p), 0.0, phi, gap)
        assert energy(A, b, phi, trial) >= sol.objective - 1e-12 * abs(sol.objective)


def test_mutual_agreement_with_newton_on_random_systems():
    rng = np.random.default_rng(4)
    for _ in range(5):
        sys = random_contact_system(rng, 5)
        keep = np.ones(20, bool)
        keep[3::4] = False
        cbs = small_cbs(sys.A[np.ix_(keep, keep)], sys.b[keep])
        sol = oracle_solve(cbs, sys.gap, sys.phi)
        x, rep = solve(sys, eps=1e-12)
        assert rep.converged
        assert np.linalg.norm(x - sol.lifted()) <= 1e-7 * max(1.0, np.linalg.norm(x))
        tol = 1e-8 * np.abs(sys.b).max()
        assert residual_check(sys, sol.lifted(), tol).passed
        # objective values agree (mutual epsilon-optimality)
        assert energy(cbs.A_tilde, cbs.b_tilde, sys.phi, x.reshape(-1, 4)[:, :3].ravel()) == pytest.approx(
            sol.objective, rel=1e-10, abs=1e-12
        )


def test_residual_check_flags_bad_points():
    cbs = small_cbs(np.eye(3), [3.0, 4.0, -1.0])
    sys = expand_blocks(cbs, np.array([0.0]), 1.0)
    good = residual_check(sys, np.array([2.4, 3.2, 0.0, 1.0]), 1e-10)
    assert good.passed

    zero = residual_check(sys, np.zeros(4), 1e-10)
    assert set(zero.violations()) == {"friction_bound", "normal_equilibrium"}
    assert zero.friction_bound == pytest.approx(4.0)

    neg = residual_check(sys, np.array([2.4, 3.2, 0.0, -1.0]), 1e-10)
    assert "feasibility" in neg.violations()

    pen = residual_check(sys, np.array([2.4, 3.2, -0.5, 0.5]), 1e-10)
    assert pen.feasibility == pytest.approx(0.5)
    assert pen.complementarity == pytest.approx(0.25 / 4.0)


def test_residual_check_slip_alignment():
    cbs = small_cbs(np.eye(3), [3.0, 4.0, -1.0])
    sys = expand_blocks(cbs, np.array([0.0]), 1.0)
    # slipping against the friction force: direction flipped
    r = residual_check(sys, np.array([-2.4, -3.2, 0.0, 1.0]), 1e-10)
    assert r.slip_alignment > 1.0
    assert "slip_alignment" in r.violations()


def test_max_p_refusal():
    rng = np.random.default_rng(5)
    cbs = small_cbs(spd(rng, 9), rng.standard_normal(9))
    with pytest.raises(OracleError):
        oracle_solve(cbs, 0.0, 1.0, max_p=2)


def test_iteration_cap():
    rng = np.random.default_rng(6)
    cbs = small_cbs(spd(rng, 30), rng.standard_normal(30))
    with pytest.raises(OracleError):
        oracle_solve(cbs, 0.0, 0.1, tol=1e-14, max_iter=25)


def test_benchmark_agreement(level2):
    sol = oracle_solve(level2.cbs, level2.rsys.gap, level2.rsys.phi)
    x, rep = solve(level2.rsys)
    X = x.reshape(-1, 4)
    u, lam = X[:, :3].ravel(), X[:, 3]
    assert np.linalg.norm(u - sol.u) <= 1e-5 * np.linalg.norm(sol.u)
    assert np.linalg.norm(lam - sol.lam) <= 1e-4 * np.linalg.norm(sol.lam)
