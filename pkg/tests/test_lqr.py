import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metacore.errors import InstabilityError, SolverError
from metacore.lqr import (
    Controller,
    CostReport,
    LqrTask,
    exact_gradient,
    lqr_cost,
    lqr_cost_many,
    riccati_optimal,
    solve_discrete_lyapunov,
    spectral_radius,
)

from conftest import fd_gradient, random_stable_task, random_stabilizing_gain


# ---------------------------------------------------------------- types


def test_task_validates_shapes_and_symmetry():
    eye2 = np.eye(2)
    with pytest.raises(ValueError):
        LqrTask(np.zeros((2, 3)), np.eye(2), eye2, eye2)
    with pytest.raises(ValueError):
        LqrTask(np.zeros((2, 2)), np.zeros((3, 1)), eye2, np.eye(1))
    with pytest.raises(ValueError):
        LqrTask(np.zeros((2, 2)), eye2, np.array([[1.0, 0.5], [0.0, 1.0]]), eye2)
    with pytest.raises(ValueError):
        LqrTask(np.zeros((2, 2)), eye2, eye2, -eye2)  # R must be PD
    with pytest.raises(ValueError):
        LqrTask(np.full((2, 2), np.nan), eye2, eye2, eye2)


def test_task_accepts_psd_q_with_zero_eigenvalue():
    task = LqrTask(np.zeros((2, 2)), np.eye(2), np.diag([1.0, 0.0]), np.eye(2))
    assert task.d1 == 2 and task.d2 == 2 and task.gain_shape == (2, 2)


def test_controller_stabilizes_matches_spectral_radius():
    task = LqrTask(np.diag([0.5, 1.5]), np.eye(2), np.eye(2), np.eye(2))
    assert Controller(np.diag([0.0, 1.0])).stabilizes(task)
    assert not Controller(np.zeros((2, 2))).stabilizes(task)


# ---------------------------------------------------------------- spectral radius


def test_spectral_radius_diagonal():
    assert spectral_radius(np.diag([0.5, -0.25])) == pytest.approx(0.5, rel=1e-9)


def test_spectral_radius_zero_matrix():
    assert spectral_radius(np.zeros((3, 3))) == 0.0


def test_spectral_radius_complex_pair():
    # characteristic polynomial z^2 + 0.25 = 0 -> |z| = 0.5
    m = np.array([[0.0, 1.0], [-0.25, 0.0]])
    assert spectral_radius(m) == pytest.approx(0.5, rel=1e-9)


def test_spectral_radius_rejects_bad_input():
    with pytest.raises(ValueError):
        spectral_radius(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        spectral_radius(np.array([[np.nan, 0.0], [0.0, 1.0]]))


@given(c=st.floats(-3.0, 3.0), n=st.integers(1, 4))
def test_spectral_radius_of_scaled_identity(c, n):
    assert spectral_radius(c * np.eye(n)) == pytest.approx(abs(c), abs=1e-12)


# ---------------------------------------------------------------- Lyapunov


def test_lyapunov_scalar_geometric_series():
    # P = sum_k 0.25^k = 4/3
    p = solve_discrete_lyapunov(np.array([[0.5]]), np.array([[1.0]]))
    assert p[0, 0] == pytest.approx(4.0 / 3.0, rel=1e-12)


def test_lyapunov_zero_dynamics_returns_w():
    w = np.array([[2.0, 0.5], [0.5, 1.0]])
    np.testing.assert_allclose(solve_discrete_lyapunov(np.zeros((2, 2)), w), w)


def test_lyapunov_contracting_identity():
    p = solve_discrete_lyapunov(0.9 * np.eye(2), np.eye(2))
    np.testing.assert_allclose(p, np.eye(2) / 0.19, rtol=1e-10)


def test_lyapunov_rejects_unstable():
    with pytest.raises(InstabilityError):
        solve_discrete_lyapunov(np.eye(2), np.eye(2))
    with pytest.raises(InstabilityError):
        solve_discrete_lyapunov(1.5 * np.eye(2), np.eye(2))


def test_lyapunov_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        solve_discrete_lyapunov(np.zeros((2, 2)), np.eye(3))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 5))
def test_lyapunov_residual_and_psd_on_random_stable(seed, n):
    gen = np.random.default_rng(seed)
    a = gen.normal(size=(n, n))
    a *= 0.9 * gen.uniform(0.1, 1.0) / max(np.max(np.abs(np.linalg.eigvals(a))), 1e-12)
    w_half = gen.normal(size=(n, n))
    w = w_half @ w_half.T
    p = solve_discrete_lyapunov(a, w)
    residual = np.linalg.norm(a.T @ p @ a - p + w)
    assert residual <= 1e-10 * max(1.0, np.linalg.norm(w))
    np.testing.assert_allclose(p, p.T, atol=1e-12)
    assert np.min(np.linalg.eigvalsh(p)) >= -1e-10


# ---------------------------------------------------------------- cost


def test_cost_identity_instance():
    task = LqrTask(np.zeros((2, 2)), np.eye(2), np.eye(2), np.eye(2))
    report = lqr_cost(task, np.zeros((2, 2)), np.eye(2))
    assert report.stable
    assert report.value == pytest.approx(2.0, rel=1e-12)
    np.testing.assert_allclose(report.p, np.eye(2))
    np.testing.assert_allclose(report.sigma_k, np.eye(2))


def test_cost_scalar_instance():
    task = LqrTask([[0.5]], [[1.0]], [[1.0]], [[1.0]])
    report = lqr_cost(task, [[0.0]], [[1.0]])
    assert report.value == pytest.approx(4.0 / 3.0, rel=1e-12)
    assert report.sigma_k[0, 0] == pytest.approx(4.0 / 3.0, rel=1e-12)


def test_cost_unstable_closed_loop():
    task = LqrTask(1.2 * np.eye(2), np.eye(2), np.eye(2), np.eye(2))
    report = lqr_cost(task, np.zeros((2, 2)), np.eye(2))
    assert report == CostReport(value=float("inf"), p=None, sigma_k=None, stable=False)


def test_cost_deterministic(rng):
    task = random_stable_task(rng)
    k = random_stabilizing_gain(rng, task)
    r1 = lqr_cost(task, k, np.eye(task.d1))
    r2 = lqr_cost(task, k, np.eye(task.d1))
    assert r1.value == r2.value
    np.testing.assert_array_equal(r1.p, r2.p)


def test_cost_batch_matches_scalar(rng):
    task = random_stable_task(rng)
    ks = np.stack([random_stabilizing_gain(rng, task) for _ in range(6)]
                  + [5.0 * np.ones(task.gain_shape)])  # last one destabilizes
    sigma0 = np.eye(task.d1)
    values = lqr_cost_many(task, ks, sigma0)
    for i in range(ks.shape[0]):
        expected = lqr_cost(task, ks[i], sigma0).value
        if np.isinf(expected):
            assert np.isinf(values[i])
        else:
            assert values[i] == pytest.approx(expected, rel=1e-12)


# ---------------------------------------------------------------- gradient


def test_gradient_scalar_closed_form():
    task = LqrTask([[0.5]], [[1.0]], [[1.0]], [[1.0]])
    g = exact_gradient(task, [[0.0]], [[1.0]])
    assert g[0, 0] == pytest.approx(-16.0 / 9.0, rel=1e-12)


def test_gradient_rejects_destabilizing_gain():
    task = LqrTask(1.2 * np.eye(2), np.eye(2), np.eye(2), np.eye(2))
    with pytest.raises(InstabilityError):
        exact_gradient(task, np.zeros((2, 2)), np.eye(2))


def test_gradient_matches_finite_differences():
    for seed in range(25):
        gen = np.random.default_rng(seed)
        task = random_stable_task(gen)
        k = random_stabilizing_gain(gen, task)
        sigma0 = np.eye(task.d1)
        grad = exact_gradient(task, k, sigma0)
        fd = fd_gradient(lambda kk: lqr_cost(task, kk, sigma0).value, k, h=1e-5)
        rel = np.linalg.norm(grad - fd) / max(1.0, np.linalg.norm(fd))
        assert rel <= 1e-6, f"seed {seed}: finite-difference mismatch {rel:.2e}"


def test_gradient_descent_step_decreases_cost(rng):
    task = random_stable_task(rng)
    k = random_stabilizing_gain(rng, task)
    sigma0 = np.eye(task.d1)
    g = exact_gradient(task, k, sigma0)
    eta = 1e-3 / max(1.0, np.linalg.norm(g))
    before = lqr_cost(task, k, sigma0).value
    after = lqr_cost(task, k - eta * g, sigma0).value
    assert after < before


# ---------------------------------------------------------------- Riccati


def test_riccati_trivial_instance():
    task = LqrTask(np.zeros((2, 2)), np.eye(2), np.eye(2), np.eye(2))
    np.testing.assert_allclose(riccati_optimal(task), np.zeros((2, 2)), atol=1e-12)


def test_riccati_gain_is_stationary_and_locally_optimal():
    for seed in range(10):
        gen = np.random.default_rng(seed)
        task = random_stable_task(gen)
        sigma0 = np.eye(task.d1)
        k_star = riccati_optimal(task)
        grad_at_zero = exact_gradient(task, np.zeros(task.gain_shape), sigma0)
        scale = max(1.0, np.linalg.norm(grad_at_zero))
        assert np.linalg.norm(exact_gradient(task, k_star, sigma0)) <= 1e-8 * scale
        j_star = lqr_cost(task, k_star, sigma0).value
        for _ in range(20):
            delta = 1e-3 * gen.normal(size=task.gain_shape)
            assert lqr_cost(task, k_star + delta, sigma0).value >= j_star - 1e-12


def test_riccati_raises_on_uncontrollable_unstable_pair():
    # unstable mode with zero input authority cannot be stabilized
    task = LqrTask(np.diag([2.0, 0.5]), np.array([[0.0], [1.0]]), np.eye(2), np.eye(1))
    with pytest.raises(SolverError):
        riccati_optimal(task)


def test_gradient_dominance_bound(rng):
    # optimality gap <= ||Sigma_K*|| / (4 sig_min(R) sig_min(Sigma0)^2) * ||grad||^2
    task = random_stable_task(rng)
    sigma0 = np.eye(task.d1)
    k_star = riccati_optimal(task)
    star = lqr_cost(task, k_star, sigma0)
    lam = 4.0 * np.min(np.linalg.eigvalsh(task.r)) / np.linalg.norm(star.sigma_k, 2)
    for _ in range(50):
        k = random_stabilizing_gain(rng, task)
        gap = lqr_cost(task, k, sigma0).value - star.value
        grad_sq = np.linalg.norm(exact_gradient(task, k, sigma0)) ** 2
        assert lam * gap <= grad_sq * (1.0 + 1e-9) + 1e-12
