"""Meta-training with representative-task selection.

One run has two phases.  The selection phase estimates each pool task's
inner-adapted gradient at the starting parameter, builds the pairwise
distance matrix, and picks a weighted coreset by greedy facility location
(variants: the full pool, an unweighted coreset, or a random subset).  The
training phase then repeats

    theta <- theta + eta_out * (1/M) * sum_{i in S} gamma_i * g_i(theta)

where ``g_i`` is the per-task inner-adapted gradient estimate and the
integer weights ``gamma_i`` sum to the pool size M.  The weighted sum is
accumulated by repeated addition in ascending task order, so when several
tasks produce bitwise-identical gradients the weighted and unweighted
accumulations agree bit for bit.

Every reward query is seeded from ``(master seed, phase, iteration, task)``,
never from the variant being run, so different variants on the same pool see
identical probe noise and their trajectories are directly comparable.

For LQR pools each accepted update is certified: the closed loop of every
pool member is re-checked, and a spectral radius reaching 1 aborts the run
with :class:`~metacore.errors.StabilityViolation` rather than logging garbage
from an infinite-cost region.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .coreset import Coreset, GradientTable, allocate_weights, greedy_select, pairwise_distances
from .errors import ConfigError, InstabilityError, StabilityViolation
from .lqr import spectral_radius
from .rng import SELECT_STREAM, SUBSET_STREAM, TRAIN_STREAM, derive_seed, rng_from_seed
from .tasks import LqrRewardTask
from .zo import TaskFunction, ZoConfig, inner_adapted_estimate

MODES = ("coreset", "full_pool", "unweighted_coreset", "random_subset")
GRAD_MODES = ("zo2p", "oracle")


@dataclass(frozen=True)
class TrainConfig:
    """Everything a training run depends on besides the pool itself."""

    eta_inn: float
    eta_out: float
    n_iters: int
    zo: ZoConfig
    mode: str = "coreset"
    l_size: int | None = None
    grad_mode: str = "zo2p"
    seed: int = 0

    def __post_init__(self):
        if self.eta_inn < 0 or not np.isfinite(self.eta_inn):
            raise ConfigError(f"eta_inn must be nonnegative, got {self.eta_inn!r}")
        if not (self.eta_out > 0) or not np.isfinite(self.eta_out):
            raise ConfigError(f"eta_out must be positive, got {self.eta_out!r}")
        if not isinstance(self.n_iters, (int, np.integer)) or self.n_iters < 1:
            raise ConfigError(f"n_iters must be a positive integer, got {self.n_iters!r}")
        if not isinstance(self.zo, ZoConfig):
            raise ConfigError("zo must be a ZoConfig")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.grad_mode not in GRAD_MODES:
            raise ConfigError(f"grad_mode must be one of {GRAD_MODES}, got {self.grad_mode!r}")
        if self.mode != "full_pool":
            if not isinstance(self.l_size, (int, np.integer)) or self.l_size < 1:
                raise ConfigError(f"mode {self.mode!r} needs a positive l_size, got {self.l_size!r}")
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        # the trainer owns the inner step size; keep the nested config in sync
        object.__setattr__(self, "zo", replace(self.zo, eta_inn=float(self.eta_inn)))


@dataclass(frozen=True)
class MetaState:
    """Trainer state between meta-updates."""

    theta: np.ndarray
    iteration: int
    cum_queries: int
    coreset: Coreset


@dataclass(frozen=True)
class TrainRecord:
    """One accepted meta-update.

    ``grad_norm_sq`` (and ``true_grad_norm_sq`` in oracle mode) describe the
    gradient at the pre-update parameter; ``per_task_gap``, ``theta`` and
    ``all_stable`` describe the post-update state.  For LQR pools the gap is
    ``J_j(theta) - J_j(K_j*)`` per pool task; for reward-only pools it is the
    raw reward value.
    """

    iteration: int
    theta: np.ndarray
    per_task_gap: tuple[float, ...]
    grad_norm_sq: float
    true_grad_norm_sq: float | None
    cum_queries: int
    all_stable: bool


@dataclass(frozen=True)
class TrainResult:
    coreset: Coreset
    selection_queries: int
    records: tuple[TrainRecord, ...]
    theta_final: np.ndarray


def equal_apportionment(total: int, parts: int) -> tuple[int, ...]:
    """Split ``total`` into ``parts`` positive integers, larger shares first."""
    if parts < 1 or total < parts:
        raise ConfigError(f"cannot split {total} into {parts} positive shares")
    base, rem = divmod(total, parts)
    return tuple(base + 1 if i < rem else base for i in range(parts))


def weighted_gradient_sum(grads: Mapping[int, np.ndarray], coreset: Coreset) -> np.ndarray:
    """Integer-weighted gradient sum by repeated addition in index order."""
    first = grads[coreset.indices[0]]
    acc = np.zeros_like(first)
    for i, w in zip(coreset.indices, coreset.weights):
        for _ in range(w):
            acc = acc + grads[i]
    return acc


def _task_gradient(f: TaskFunction, theta: np.ndarray, cfg: TrainConfig,
                   seed: int) -> tuple[np.ndarray, int]:
    """Inner-adapted gradient of one task: estimator queries or oracle calls."""
    if cfg.grad_mode == "oracle":
        try:
            g1 = f.exact_grad(theta)
            g = f.exact_grad(theta + cfg.eta_inn * g1)
        except InstabilityError as exc:
            raise StabilityViolation(
                f"oracle inner step left the stabilizing set: {exc}"
            ) from exc
        return g, 0
    est = inner_adapted_estimate(f, theta, replace(cfg.zo, seed=seed))
    return est.g, est.queries_used


def select_phase(tasks: Sequence[TaskFunction], theta0: np.ndarray,
                 cfg: TrainConfig) -> tuple[Coreset, int]:
    """Choose the training subset and its weights; returns reward-query cost.

    ``full_pool`` selects everything at unit weight for free; the random
    baseline draws indices without estimating anything; coreset variants pay
    one inner-adapted estimate per pool task.
    """
    m = len(tasks)
    if m < 1:
        raise ConfigError("task pool is empty")
    theta0 = np.asarray(theta0, dtype=float)
    if cfg.mode == "full_pool":
        return Coreset(tuple(range(m)), (1,) * m, m), 0
    if cfg.l_size is None or cfg.l_size > m:
        raise ConfigError(f"l_size {cfg.l_size!r} invalid for a pool of {m} tasks")
    l_size = int(cfg.l_size)
    if cfg.mode == "random_subset":
        gen = rng_from_seed(derive_seed(cfg.seed, SUBSET_STREAM))
        picks = sorted(int(i) for i in gen.choice(m, size=l_size, replace=False))
        return Coreset(tuple(picks), equal_apportionment(m, l_size), m), 0
    grads: dict[int, np.ndarray] = {}
    queries = 0
    for j, f in enumerate(tasks):
        g, q = _task_gradient(f, theta0, cfg, derive_seed(cfg.seed, SELECT_STREAM, j))
        grads[j] = g
        queries += q
    dists = pairwise_distances(GradientTable(np.stack([grads[j] for j in range(m)])))
    picks = greedy_select(dists, l_size)
    if cfg.mode == "unweighted_coreset":
        idx = tuple(sorted(picks))
        return Coreset(idx, equal_apportionment(m, l_size), m), queries
    return allocate_weights(dists, picks), queries


def _check_pool_stability(tasks: Sequence[TaskFunction], theta: np.ndarray,
                          iteration: int) -> None:
    """LQR guard: every pool member's closed loop must stay Schur stable."""
    violated = [
        j for j, f in enumerate(tasks)
        if isinstance(f, LqrRewardTask)
        and spectral_radius(f.task.a - f.task.b @ theta) >= 1.0
    ]
    if violated:
        raise StabilityViolation(
            f"meta update at iteration {iteration} destabilizes pool tasks {violated}; "
            "reduce eta_out (or the probe radius) and rerun"
        )


def _pool_gaps(tasks: Sequence[TaskFunction], theta: np.ndarray) -> tuple[float, ...]:
    out = []
    for f in tasks:
        if isinstance(f, LqrRewardTask):
            out.append(float(f.gap(theta)))
        else:
            out.append(float(f.eval(theta)))
    return tuple(out)


def exact_meta_gradient(tasks: Sequence[TaskFunction], theta: np.ndarray,
                        eta_inn: float) -> np.ndarray:
    """Pool-average inner-adapted exact gradient (the estimator's target)."""
    acc = np.zeros_like(np.asarray(theta, dtype=float))
    for f in tasks:
        g1 = f.exact_grad(theta)
        acc = acc + f.exact_grad(theta + eta_inn * g1)
    return acc / len(tasks)


def meta_step(tasks: Sequence[TaskFunction], state: MetaState,
              cfg: TrainConfig) -> tuple[MetaState, TrainRecord]:
    """One weighted meta-update plus its certification and bookkeeping."""
    theta = state.theta
    grads: dict[int, np.ndarray] = {}
    queries = 0
    for i in state.coreset.indices:
        seed_i = derive_seed(cfg.seed, TRAIN_STREAM, state.iteration, i)
        g, q = _task_gradient(tasks[i], theta, cfg, seed_i)
        grads[i] = g
        queries += q
    meta_grad = weighted_gradient_sum(grads, state.coreset) / state.coreset.pool_size
    true_norm_sq = None
    if cfg.grad_mode == "oracle":
        true_norm_sq = float(np.linalg.norm(exact_meta_gradient(tasks, theta, cfg.eta_inn)) ** 2)
    theta_next = theta + cfg.eta_out * meta_grad
    _check_pool_stability(tasks, theta_next, state.iteration)
    record = TrainRecord(
        iteration=state.iteration,
        theta=theta_next.copy(),
        per_task_gap=_pool_gaps(tasks, theta_next),
        grad_norm_sq=float(np.linalg.norm(meta_grad) ** 2),
        true_grad_norm_sq=true_norm_sq,
        cum_queries=state.cum_queries + queries,
        all_stable=True,
    )
    next_state = MetaState(theta=theta_next, iteration=state.iteration + 1,
                           cum_queries=record.cum_queries, coreset=state.coreset)
    return next_state, record


def train(tasks: Sequence[TaskFunction], theta0, cfg: TrainConfig) -> TrainResult:
    """Select once, then run ``n_iters`` certified meta-updates."""
    if not tasks:
        raise ConfigError("task pool is empty")
    theta0 = np.asarray(theta0, dtype=float)
    dims = tuple(tasks[0].dims)
    if any(tuple(f.dims) != dims for f in tasks):
        raise ConfigError("all pool tasks must share parameter dimensions")
    if theta0.shape != dims:
        raise ConfigError(f"theta0 shape {theta0.shape} does not match task dims {dims}")
    if cfg.grad_mode == "oracle" and not all(f.has_exact_grad for f in tasks):
        raise ConfigError("oracle mode requires exact gradients on every task")
    for j, f in enumerate(tasks):
        if isinstance(f, LqrRewardTask):
            if spectral_radius(f.task.a - f.task.b @ theta0) >= 1.0:
                raise StabilityViolation(
                    f"starting parameter does not stabilize pool task {j}"
                )
    coreset, selection_queries = select_phase(tasks, theta0, cfg)
    state = MetaState(theta=theta0, iteration=0,
                      cum_queries=selection_queries, coreset=coreset)
    records = []
    for _ in range(cfg.n_iters):
        state, record = meta_step(tasks, state, cfg)
        records.append(record)
    return TrainResult(coreset=coreset, selection_queries=selection_queries,
                       records=tuple(records), theta_final=state.theta)


def adapt_and_test(theta_meta, unseen_tasks: Sequence[LqrRewardTask],
                   k_steps: int, step_size: float) -> np.ndarray:
    """Exact-gradient fine-tuning from a shared start, one task at a time.

    Returns a ``(len(unseen_tasks), k_steps + 1)`` array of optimality gaps;
    column 0 is the un-adapted gap.

    :raises StabilityViolation: if the start or any adaptation step leaves
        a task's stabilizing set
    """
    if not isinstance(k_steps, (int, np.integer)) or k_steps < 0:
        raise ConfigError(f"k_steps must be a nonnegative integer, got {k_steps!r}")
    if not (step_size > 0) or not np.isfinite(step_size):
        raise ConfigError(f"step_size must be positive, got {step_size!r}")
    theta_meta = np.asarray(theta_meta, dtype=float)
    gaps = np.zeros((len(unseen_tasks), k_steps + 1))
    for t, f in enumerate(unseen_tasks):
        if not isinstance(f, LqrRewardTask):
            raise ConfigError("adapt_and_test expects LQR reward tasks")
        k = theta_meta.copy()
        gap0 = f.gap(k)
        if not np.isfinite(gap0):
            raise StabilityViolation(f"start parameter does not stabilize unseen task {t}")
        gaps[t, 0] = gap0
        for s in range(1, k_steps + 1):
            k = k + step_size * f.exact_grad(k)  # reward ascent = cost descent
            gap = f.gap(k)
            if not np.isfinite(gap):
                raise StabilityViolation(
                    f"adaptation step {s} destabilized unseen task {t}; use a smaller step"
                )
            gaps[t, s] = gap
    return gaps
