"""Two-point zeroth-order gradient estimation on matrix parameters.

The estimator only ever sees reward values.  For a parameter of shape
``(p, q)`` with ``d = p * q`` it averages symmetric finite differences along
random directions drawn uniformly from the Frobenius sphere of radius ``r``:

    g = d / (2 * n_s * r^2) * sum_l (f(theta + v_l) - f(theta - v_l)) * v_l

Rewards are extended-real: ``-inf`` marks an inadmissible parameter (for LQR,
a destabilizing gain).  A probe pair touching an inadmissible point is
discarded and redrawn; the retry budget is ``10 * n_s`` failures, after which
:class:`~metacore.errors.ProbeInstabilityError` is raised.

The meta-learning variant estimates the gradient at the one-step adapted
parameter: first estimate ``g1`` at ``theta``, then rerun the estimator at
``theta + eta_inn * g1``.  The two stages draw from independent substreams
``derive_seed(seed, 1)`` and ``derive_seed(seed, 2)`` of the configured seed,
so either stage can be replayed in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import ConfigError, ProbeInstabilityError
from .rng import derive_seed, rng_from_seed

RETRY_FACTOR = 10  # failure budget per estimator call, in units of n_s


@dataclass(frozen=True, kw_only=True)
class TaskFunction:
    """A reward oracle over matrix parameters.

    ``eval_fn`` maps a ``dims``-shaped parameter to a float reward, returning
    ``-inf`` exactly when the parameter is inadmissible.  ``grad_fn`` (exact
    reward gradient) is optional and powers oracle-mode baselines.
    ``eval_many_fn``, when given, evaluates a stacked ``(batch, p, q)`` array
    in one call; otherwise batches fall back to a Python loop.
    """

    eval_fn: Callable[[np.ndarray], float]
    dims: tuple[int, int]
    grad_fn: Callable[[np.ndarray], np.ndarray] | None = None
    eval_many_fn: Callable[[np.ndarray], np.ndarray] | None = None

    def eval(self, theta: np.ndarray) -> float:
        return float(self.eval_fn(np.asarray(theta, dtype=float)))

    def eval_many(self, thetas: np.ndarray) -> np.ndarray:
        thetas = np.asarray(thetas, dtype=float)
        if self.eval_many_fn is not None:
            return np.asarray(self.eval_many_fn(thetas), dtype=float)
        return np.array([self.eval_fn(t) for t in thetas], dtype=float)

    @property
    def has_exact_grad(self) -> bool:
        return self.grad_fn is not None

    def exact_grad(self, theta: np.ndarray) -> np.ndarray:
        if self.grad_fn is None:
            raise ConfigError("task function does not expose an exact gradient")
        return np.asarray(self.grad_fn(np.asarray(theta, dtype=float)), dtype=float)


@dataclass(frozen=True)
class ZoConfig:
    """Estimator knobs: sample count, probe radius, inner step, seed."""

    n_s: int
    r: float
    eta_inn: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.n_s, (int, np.integer)) or self.n_s < 1:
            raise ConfigError(f"n_s must be a positive integer, got {self.n_s!r}")
        if not (self.r > 0.0) or not np.isfinite(self.r):
            raise ConfigError(f"probe radius r must be positive and finite, got {self.r!r}")
        if self.eta_inn < 0.0 or not np.isfinite(self.eta_inn):
            raise ConfigError(f"eta_inn must be nonnegative, got {self.eta_inn!r}")
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")


@dataclass(frozen=True)
class GradientEstimate:
    """Estimator output plus its query accounting."""

    g: np.ndarray
    queries_used: int
    failures: int


def sample_sphere(dims: tuple[int, int], r: float, rng: np.random.Generator,
                  n: int | None = None) -> np.ndarray:
    """Directions uniform on the Frobenius sphere of radius ``r``.

    Returns shape ``dims`` for ``n is None``, else ``(n, *dims)``.
    """
    p, q = dims
    if p < 1 or q < 1:
        raise ConfigError(f"dims must be positive, got {dims}")
    if not (r > 0.0) or not np.isfinite(r):
        raise ConfigError(f"radius must be positive and finite, got {r!r}")
    count = 1 if n is None else int(n)
    raw = rng.normal(size=(count, p, q))
    norms = np.linalg.norm(raw.reshape(count, -1), axis=1)
    norms = np.maximum(norms, np.finfo(float).tiny)
    out = r * raw / norms[:, None, None]
    return out[0] if n is None else out


def zo2p(f: TaskFunction, theta: np.ndarray, cfg: ZoConfig,
         rng: np.random.Generator | None = None) -> GradientEstimate:
    """Two-point estimate of the reward gradient at ``theta``.

    Costs exactly ``2 * n_s`` reward queries when no probe fails; every
    failed pair adds 2 queries and one recorded failure.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != tuple(f.dims):
        raise ConfigError(f"theta shape {theta.shape} does not match task dims {f.dims}")
    if rng is None:
        rng = rng_from_seed(cfg.seed)
    d = theta.size
    n_s = int(cfg.n_s)
    max_failures = RETRY_FACTOR * n_s
    acc = np.zeros_like(theta)
    successes = 0
    failures = 0
    queries = 0
    while successes < n_s:
        need = n_s - successes
        vs = sample_sphere(theta.shape, cfg.r, rng, n=need)
        plus = f.eval_many(theta[None, :, :] + vs)
        minus = f.eval_many(theta[None, :, :] - vs)
        queries += 2 * need
        ok = np.isfinite(plus) & np.isfinite(minus)
        n_ok = int(np.count_nonzero(ok))
        failures += need - n_ok
        if failures > max_failures:
            raise ProbeInstabilityError(
                f"{failures} probe pairs left the admissible region "
                f"(budget {max_failures}); try a smaller probe radius than r={cfg.r:g}"
            )
        if n_ok:
            acc += np.einsum("s,sij->ij", plus[ok] - minus[ok], vs[ok])
            successes += n_ok
    g = (d / (2.0 * n_s * cfg.r**2)) * acc
    return GradientEstimate(g=g, queries_used=queries, failures=failures)


def inner_adapted_estimate(f: TaskFunction, theta: np.ndarray,
                           cfg: ZoConfig) -> GradientEstimate:
    """Gradient estimate at the one-step adapted parameter.

    Stage one estimates the gradient at ``theta`` (substream 1); stage two
    re-estimates at ``theta + eta_inn * g1`` (substream 2) and is the value
    returned.  Queries and failures accumulate across both stages, so a clean
    call costs ``4 * n_s`` queries.
    """
    stage1 = zo2p(f, theta, replace(cfg, seed=derive_seed(cfg.seed, 1)))
    adapted = np.asarray(theta, dtype=float) + cfg.eta_inn * stage1.g
    stage2 = zo2p(f, adapted, replace(cfg, seed=derive_seed(cfg.seed, 2)))
    return GradientEstimate(
        g=stage2.g,
        queries_used=stage1.queries_used + stage2.queries_used,
        failures=stage1.failures + stage2.failures,
    )
