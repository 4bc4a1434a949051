import json

import numpy as np
import pytest

from metacore.coreset import GradientTable, pairwise_distances
from metacore.errors import ConfigError, GenerationError, PoolFormatError
from metacore.lqr import exact_gradient, lqr_cost, spectral_radius
from metacore.tasks import (
    LqrPool,
    PoolSpec,
    SyntheticTaskSpec,
    _floor_eigenvalues,
    default_initial_gain,
    generate_lqr_pool,
    generate_synthetic_pool,
    generate_unseen_tasks,
    load_pool,
    lqr_task_function,
    pool_from_json,
    pool_to_json,
    save_pool,
    synthetic_task,
    wrap_pool,
)

from conftest import fd_gradient


# ---------------------------------------------------------------- specs


def test_pool_spec_validation():
    with pytest.raises(ConfigError):
        PoolSpec(d1=0)
    with pytest.raises(ConfigError):
        PoolSpec(d1=11)
    with pytest.raises(ConfigError):
        PoolSpec(m=0)
    with pytest.raises(ConfigError):
        PoolSpec(eps_het=(0.1, 0.1, 0.1))
    with pytest.raises(ConfigError):
        PoolSpec(eps_het=(0.1, -0.1, 0.1, 0.1))
    with pytest.raises(ConfigError):
        PoolSpec(seed=-1)


def test_synthetic_spec_validation():
    with pytest.raises(ConfigError):
        SyntheticTaskSpec(dims=(0, 2))
    with pytest.raises(ConfigError):
        SyntheticTaskSpec(center_radius=-1.0)
    with pytest.raises(ConfigError):
        SyntheticTaskSpec(curvature_range=(0.0, 1.0))
    with pytest.raises(ConfigError):
        SyntheticTaskSpec(curvature_range=(2.0, 1.0))
    with pytest.raises(ConfigError):
        SyntheticTaskSpec(alpha=-0.5)


# ---------------------------------------------------------------- LQR pools


def test_default_pool_satisfies_contracts():
    pool = generate_lqr_pool(PoolSpec())
    assert pool.m == 40
    assert spectral_radius(pool.nominal.a) <= 0.95 + 1e-12
    # the nominal Riccati gain stabilizes every member
    for t in pool.tasks:
        assert spectral_radius(t.a - t.b @ pool.nominal_gain) < 1.0
    # pairwise heterogeneity budget per matrix
    eps = pool.spec.eps_het
    for idx, (name, budget) in enumerate(zip("abqr", eps)):
        for i in range(pool.m):
            for j in range(i + 1, pool.m):
                gap = np.linalg.norm(getattr(pool.tasks[i], name) - getattr(pool.tasks[j], name), 2)
                assert gap <= budget + 1e-12, f"{name}: {gap} > {budget}"


def test_zero_heterogeneity_collapses_to_nominal():
    pool = generate_lqr_pool(PoolSpec(m=6, eps_het=(0.0, 0.0, 0.0, 0.0)))
    for t in pool.tasks:
        assert t.a.tobytes() == pool.nominal.a.tobytes()
        assert t.b.tobytes() == pool.nominal.b.tobytes()
        assert t.q.tobytes() == pool.nominal.q.tobytes()
        assert t.r.tobytes() == pool.nominal.r.tobytes()


def test_pool_generation_is_bitwise_reproducible():
    a = generate_lqr_pool(PoolSpec(m=5, seed=123))
    b = generate_lqr_pool(PoolSpec(m=5, seed=123))
    assert a.root_seed == b.root_seed
    for ta, tb in zip(a.tasks, b.tasks):
        assert ta.a.tobytes() == tb.a.tobytes()
        assert ta.r.tobytes() == tb.r.tobytes()
    c = generate_lqr_pool(PoolSpec(m=5, seed=124))
    assert a.tasks[0].a.tobytes() != c.tasks[0].a.tobytes()


def test_unseen_tasks_share_distribution_and_are_reproducible():
    pool = generate_lqr_pool(PoolSpec(m=4, seed=9))
    unseen = generate_unseen_tasks(pool, 3)
    again = generate_unseen_tasks(pool, 3)
    assert len(unseen) == 3
    for u, v in zip(unseen, again):
        assert u.a.tobytes() == v.a.tobytes()
    eps = pool.spec.eps_het
    for u in unseen:
        assert np.linalg.norm(u.a - pool.nominal.a, 2) <= 0.5 * eps[0] + 1e-12
        assert np.linalg.norm(u.b - pool.nominal.b, 2) <= 0.5 * eps[1] + 1e-12
    # held-out draws differ from the training members
    assert not any(u.a.tobytes() == t.a.tobytes() for u in unseen for t in pool.tasks)
    with pytest.raises(ConfigError):
        generate_unseen_tasks(pool, 0)


def test_generation_error_when_budget_is_absurd():
    with pytest.raises(GenerationError):
        generate_lqr_pool(PoolSpec(m=20, eps_het=(50.0, 50.0, 0.0, 0.0), seed=0))


def test_eigenvalue_floor_helper():
    m = np.diag([1.0, -0.5])
    floored = _floor_eigenvalues(m, 0.01)
    assert np.min(np.linalg.eigvalsh(floored)) >= 0.01 - 1e-12
    ok = np.diag([1.0, 0.5])
    assert _floor_eigenvalues(ok, 0.01) is ok  # untouched when admissible


def test_initial_gain_is_stabilizing_but_suboptimal():
    pool = generate_lqr_pool(PoolSpec(seed=0))
    k0 = default_initial_gain(pool)
    sigma0 = np.eye(pool.spec.d1)
    gaps = []
    for t in pool.tasks:
        assert spectral_radius(t.a - t.b @ k0) < 1.0
        k_star = lqr_task_function(t, sigma0)
        gaps.append(k_star.gap(k0))
    assert min(gaps) > 0.0
    assert np.mean(gaps) > 0.1  # clearly away from optimal


def test_initial_gain_rejects_bad_detune():
    pool = generate_lqr_pool(PoolSpec(m=2, seed=1))
    with pytest.raises(ConfigError):
        default_initial_gain(pool, detune=0.5)


# ---------------------------------------------------------------- reward wrapper


def test_reward_wrapper_negates_cost_and_flags_instability():
    pool = generate_lqr_pool(PoolSpec(m=3, seed=5))
    sigma0 = np.eye(pool.spec.d1)
    f = lqr_task_function(pool.tasks[0], sigma0)
    k0 = default_initial_gain(pool)
    assert f.eval(k0) == pytest.approx(-lqr_cost(pool.tasks[0], k0, sigma0).value)
    np.testing.assert_allclose(
        f.exact_grad(k0), -exact_gradient(pool.tasks[0], k0, sigma0))
    assert f.eval(1e3 * np.ones(f.dims)) == -np.inf
    assert f.gap(f.k_opt) == pytest.approx(0.0, abs=1e-8)
    assert f.gap(k0) > 0.0


def test_reward_wrapper_batch_matches_scalar():
    pool = generate_lqr_pool(PoolSpec(m=2, seed=8))
    f = lqr_task_function(pool.tasks[1], np.eye(pool.spec.d1))
    k0 = default_initial_gain(pool)
    ks = np.stack([k0, 0.9 * k0, 1e3 * np.ones(f.dims)])
    batch = f.eval_many(ks)
    singles = np.array([f.eval(k) for k in ks])
    assert batch[2] == singles[2] == -np.inf
    np.testing.assert_allclose(batch[:2], singles[:2], rtol=1e-12)


def test_wrap_pool_defaults_to_identity_sigma():
    pool = generate_lqr_pool(PoolSpec(m=3, seed=2))
    fns = wrap_pool(pool)
    assert len(fns) == 3
    np.testing.assert_array_equal(fns[0].sigma0, np.eye(pool.spec.d1))


# ---------------------------------------------------------------- synthetic


def test_synthetic_gradient_matches_finite_differences():
    spec = SyntheticTaskSpec(dims=(2, 3), alpha=0.7)
    tasks = generate_synthetic_pool(spec, 5, seed=3)
    gen = np.random.default_rng(0)
    for f in tasks:
        theta = gen.normal(size=f.dims)
        grad = f.exact_grad(theta)
        fd = fd_gradient(f.eval, theta, h=1e-6)
        rel = np.linalg.norm(grad - fd) / max(1.0, np.linalg.norm(fd))
        assert rel <= 1e-8


def test_synthetic_eval_many_matches_scalar_eval():
    tasks = generate_synthetic_pool(SyntheticTaskSpec(), 3, seed=11)
    thetas = np.random.default_rng(1).normal(size=(6, 2, 2))
    for f in tasks:
        np.testing.assert_allclose(
            f.eval_many(thetas), [f.eval(t) for t in thetas], rtol=1e-12)


def test_degenerate_family_has_zero_gradient_spread():
    spec = SyntheticTaskSpec(center_radius=0.0, curvature_range=(1.0, 1.0), alpha=0.3)
    tasks = generate_synthetic_pool(spec, 4, seed=7)
    theta = 0.3 * np.ones((2, 2))
    grads = GradientTable(np.stack([f.exact_grad(theta) for f in tasks]))
    np.testing.assert_allclose(pairwise_distances(grads), np.zeros((4, 4)), atol=1e-12)


def test_synthetic_curvature_is_bounded():
    spec = SyntheticTaskSpec(alpha=0.5, freq_scale=2.0)
    tasks = generate_synthetic_pool(spec, 3, seed=13)
    bound = 10.0 * (spec.curvature_range[1] + spec.alpha * spec.freq_scale**2)
    gen = np.random.default_rng(5)
    h = 1e-4
    for f in tasks:
        for _ in range(350):
            theta = gen.normal(size=f.dims)
            v = gen.normal(size=f.dims)
            v /= np.linalg.norm(v)
            second = (f.eval(theta + h * v) - 2.0 * f.eval(theta) + f.eval(theta - h * v)) / h**2
            assert abs(second) <= bound


def test_synthetic_task_validates_curvature():
    center = np.zeros((2, 2))
    freq = np.zeros((2, 2))
    with pytest.raises(ConfigError):
        synthetic_task(center, -np.eye(4), 0.1, freq)
    with pytest.raises(ConfigError):
        synthetic_task(center, np.eye(3), 0.1, freq)  # wrong size
    bad = np.eye(4)
    bad[0, 1] = 0.5
    with pytest.raises(ConfigError):
        synthetic_task(center, bad, 0.1, freq)  # not symmetric


def test_synthetic_concave_case_has_single_peak():
    f = synthetic_task(np.full((1, 2), 0.5), np.eye(2), 0.0, np.zeros((1, 2)))
    assert f.eval(np.full((1, 2), 0.5)) == pytest.approx(0.0)
    assert f.eval(np.zeros((1, 2))) < 0.0
    np.testing.assert_allclose(f.exact_grad(np.full((1, 2), 0.5)), np.zeros((1, 2)), atol=1e-15)


# ---------------------------------------------------------------- serialization


def test_pool_round_trip_is_bitwise(tmp_path):
    pool = generate_lqr_pool(PoolSpec(m=4, seed=42))
    path = tmp_path / "pool.json"
    save_pool(pool, path)
    loaded = load_pool(path)
    assert loaded.spec == pool.spec
    assert loaded.root_seed == pool.root_seed
    for a, b in zip(pool.tasks, loaded.tasks):
        assert a.a.tobytes() == b.a.tobytes()
        assert a.b.tobytes() == b.b.tobytes()
        assert a.q.tobytes() == b.q.tobytes()
        assert a.r.tobytes() == b.r.tobytes()
    assert pool.nominal_gain.tobytes() == loaded.nominal_gain.tobytes()


def test_pool_rejects_unknown_format():
    pool = generate_lqr_pool(PoolSpec(m=2, seed=1))
    doc = pool_to_json(pool)
    doc["format"] = "metacore-pool-v9"
    with pytest.raises(PoolFormatError):
        pool_from_json(doc)
    with pytest.raises(PoolFormatError):
        pool_from_json(["not", "a", "pool"])


def test_pool_rejects_missing_and_corrupt_fields(tmp_path):
    pool = generate_lqr_pool(PoolSpec(m=2, seed=1))
    doc = pool_to_json(pool)
    del doc["nominal"]
    with pytest.raises(PoolFormatError):
        pool_from_json(doc)
    doc2 = pool_to_json(pool)
    doc2["tasks"][0]["q"]["data"][1] = 99.0  # breaks symmetry
    with pytest.raises(PoolFormatError):
        pool_from_json(doc2)
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(PoolFormatError):
        load_pool(bad)
