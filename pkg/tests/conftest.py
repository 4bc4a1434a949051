"""Shared helpers for the test suite.

The finite-difference oracle and the random problem factories here are kept
independent of the package internals (plain numpy) so they can act as a
second opinion on the closed-form code paths.
"""

import numpy as np
import pytest

from metacore.lqr import LqrTask


def fd_gradient(f, x, h=1e-5):
    """Central-difference gradient of a scalar function of a matrix."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        step = np.zeros_like(x)
        step[idx] = h
        g[idx] = (f(x + step) - f(x - step)) / (2.0 * h)
    return g


def random_stable_task(rng, d1=3, d2=2, rho=0.85):
    """Random LQR task whose open loop is already Schur stable."""
    a = rng.normal(size=(d1, d1))
    radius = np.max(np.abs(np.linalg.eigvals(a)))
    a *= rho / max(radius, 1e-12)
    b = rng.normal(size=(d1, d2))
    q_half = rng.normal(size=(d1, d1))
    r_half = rng.normal(size=(d2, d2))
    q = q_half @ q_half.T / d1 + 0.1 * np.eye(d1)
    r = r_half @ r_half.T / d2 + 0.1 * np.eye(d2)
    return LqrTask(a, b, q, r)


def random_stabilizing_gain(rng, task, scale=0.2, margin=0.95):
    """Random gain that keeps the closed loop comfortably inside the circle."""
    for _ in range(60):
        k = scale * rng.normal(size=task.gain_shape)
        if np.max(np.abs(np.linalg.eigvals(task.a - task.b @ k))) < margin:
            return k
        scale *= 0.5
    raise AssertionError("could not find a stabilizing test gain")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
