"""Task-pool construction for the LQR and synthetic reward families.

LQR pools are built around a random nominal plant: each pool member perturbs
``(A, B, Q, R)`` by a random direction scaled to spectral norm at most half
the per-matrix heterogeneity budget, so any two members differ by at most the
full budget (triangle inequality).  The perturbation directions for a given
seed are fixed independently of the budget, which makes pools at different
heterogeneity levels directly comparable.  Generation re-draws the whole pool
(fresh sub-seed) until the Riccati gain of the nominal stabilizes every
member, giving the training loop a certified stabilizing starting region.

The synthetic family is a heterogeneous collection of concave quadratics with
a shared cosine ripple,

    J_i(theta) = -1/2 <theta - c_i, H_i (theta - c_i)> + alpha cos(<w, theta>),

whose exact gradients are available in closed form; with ``alpha > 0`` the
objectives are non-concave but smooth, which is exactly the regime the
estimator-driven trainer is meant to survive.

LQR tasks enter the trainer wrapped as reward functions, ``reward = -J``, so
that the trainer uniformly maximizes reward; destabilizing gains report
``-inf`` reward, the estimator's inadmissibility sentinel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, GenerationError, PoolFormatError, SolverError
from .lqr import LqrTask, exact_gradient, lqr_cost, lqr_cost_many, riccati_optimal, spectral_radius
from .rng import derive_seed, rng_from_seed
from .zo import TaskFunction

NOMINAL_RHO_CAP = 0.95
R_EIGENVALUE_FLOOR = 0.01
Q_EIGENVALUE_FLOOR = 0.0
GENERATION_ATTEMPTS = 10

# stream tags local to pool generation (trainer tags live in metacore.rng)
_NOMINAL_TAG = 10
_PERTURB_TAG = 11
_FREQ_TAG = 12
_RETRY_TAG = 13


@dataclass(frozen=True)
class PoolSpec:
    """Recipe for an LQR task pool."""

    d1: int = 3
    d2: int = 2
    m: int = 40
    eps_het: tuple[float, float, float, float] = (0.05, 0.05, 0.05, 0.05)
    seed: int = 0

    def __post_init__(self):
        for name, dim in (("d1", self.d1), ("d2", self.d2)):
            if not isinstance(dim, (int, np.integer)) or not 1 <= dim <= 10:
                raise ConfigError(f"{name} must be an integer in [1, 10], got {dim!r}")
        if not isinstance(self.m, (int, np.integer)) or self.m < 1:
            raise ConfigError(f"pool size m must be a positive integer, got {self.m!r}")
        eps = tuple(float(e) for e in self.eps_het)
        if len(eps) != 4 or any(e < 0 or not np.isfinite(e) for e in eps):
            raise ConfigError(
                f"eps_het must be four nonnegative floats (A, B, Q, R), got {self.eps_het!r}"
            )
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        object.__setattr__(self, "eps_het", eps)


@dataclass(frozen=True)
class LqrPool:
    """A generated pool: nominal plant, members, and its provenance."""

    spec: PoolSpec
    nominal: LqrTask
    tasks: tuple[LqrTask, ...]
    nominal_gain: np.ndarray  # Riccati gain of the nominal, stabilizes every member
    root_seed: int  # effective seed after regeneration attempts

    @property
    def m(self) -> int:
        return len(self.tasks)


def _spectral_scaled(raw: np.ndarray, target: float) -> np.ndarray:
    norm = float(np.linalg.norm(raw, 2))
    if norm == 0.0:
        return np.zeros_like(raw)
    return raw * (target / norm)


def _floor_eigenvalues(m: np.ndarray, floor: float) -> np.ndarray:
    vals, vecs = np.linalg.eigh(m)
    if vals.min() >= floor:
        return m  # untouched (bit-wise) when already admissible
    return (vecs * np.maximum(vals, floor)) @ vecs.T


def _draw_nominal(root_seed: int, d1: int, d2: int) -> LqrTask:
    gen = rng_from_seed(derive_seed(root_seed, _NOMINAL_TAG))
    a = gen.normal(size=(d1, d1))
    rho = spectral_radius(a)
    if rho > NOMINAL_RHO_CAP:
        a *= NOMINAL_RHO_CAP / rho
    b = gen.normal(size=(d1, d2))
    return LqrTask(a, b, np.eye(d1), np.eye(d2))


def _draw_member(root_seed: int, index: int, nominal: LqrTask,
                 eps: tuple[float, float, float, float]) -> LqrTask:
    gen = rng_from_seed(derive_seed(root_seed, _PERTURB_TAG, index))
    eps_a, eps_b, eps_q, eps_r = eps
    # directions and magnitudes are always drawn so the stream layout (and
    # hence the directions) is identical across heterogeneity levels
    deltas = []
    for base, budget, symmetric in (
        (nominal.a, eps_a, False),
        (nominal.b, eps_b, False),
        (nominal.q, eps_q, True),
        (nominal.r, eps_r, True),
    ):
        raw = gen.normal(size=base.shape)
        if symmetric:
            raw = 0.5 * (raw + raw.T)
        magnitude = gen.uniform(0.0, 1.0) * 0.5 * budget
        deltas.append(_spectral_scaled(raw, magnitude))
    a = nominal.a + deltas[0]
    b = nominal.b + deltas[1]
    q = _floor_eigenvalues(nominal.q + deltas[2], Q_EIGENVALUE_FLOOR)
    r = _floor_eigenvalues(nominal.r + deltas[3], R_EIGENVALUE_FLOOR)
    return LqrTask(a, b, q, r)


def _pairwise_budget_holds(tasks: tuple[LqrTask, ...],
                           eps: tuple[float, float, float, float]) -> bool:
    mats = [("a", eps[0]), ("b", eps[1]), ("q", eps[2]), ("r", eps[3])]
    slack = 1e-12
    for name, budget in mats:
        for i in range(len(tasks)):
            for j in range(i + 1, len(tasks)):
                gap = np.linalg.norm(getattr(tasks[i], name) - getattr(tasks[j], name), 2)
                if gap > budget + slack:
                    return False
    return True


def generate_lqr_pool(spec: PoolSpec) -> LqrPool:
    """Draw an LQR pool satisfying the heterogeneity and stability contracts.

    Post-conditions: every pair of members is within the per-matrix budget in
    spectral norm, and the Riccati gain of the nominal stabilizes every
    member.  Failing draws are retried with fresh sub-seeds.

    :raises GenerationError: after ``GENERATION_ATTEMPTS`` failed draws
    """
    for attempt in range(GENERATION_ATTEMPTS):
        root = spec.seed if attempt == 0 else derive_seed(spec.seed, _RETRY_TAG, attempt)
        nominal = _draw_nominal(root, spec.d1, spec.d2)
        try:
            gain = riccati_optimal(nominal)
        except SolverError:
            continue
        tasks = tuple(
            _draw_member(root, i, nominal, spec.eps_het) for i in range(spec.m)
        )
        if not _pairwise_budget_holds(tasks, spec.eps_het):
            continue
        if all(spectral_radius(t.a - t.b @ gain) < 1.0 for t in tasks):
            return LqrPool(spec=spec, nominal=nominal, tasks=tasks,
                           nominal_gain=gain, root_seed=root)
    raise GenerationError(
        f"no admissible pool after {GENERATION_ATTEMPTS} draws for spec {spec}; "
        "eps_het may be too aggressive for the nominal plant"
    )


def generate_unseen_tasks(pool: LqrPool, count: int) -> list[LqrTask]:
    """Fresh members of the same pool distribution (held-out indices)."""
    if not isinstance(count, (int, np.integer)) or count < 1:
        raise ConfigError(f"count must be a positive integer, got {count!r}")
    return [
        _draw_member(pool.root_seed, pool.m + i, pool.nominal, pool.spec.eps_het)
        for i in range(count)
    ]


def default_initial_gain(pool: LqrPool, detune: float = 25.0) -> np.ndarray:
    """A deliberately suboptimal but robustly stabilizing starting gain.

    Uses the Riccati gain of the nominal plant with its input cost divided by
    ``detune``: the resulting controller over-actuates, so it stabilizes the
    whole pool with a wide margin while leaving a meaningful optimality gap
    for training to close.

    :raises GenerationError: if the gain fails to stabilize some pool member
    """
    if detune < 1.0 or not np.isfinite(detune):
        raise ConfigError(f"detune factor must be >= 1, got {detune!r}")
    nom = pool.nominal
    cheap = LqrTask(nom.a, nom.b, nom.q, nom.r / detune)
    gain = riccati_optimal(cheap)
    bad = [i for i, t in enumerate(pool.tasks)
           if spectral_radius(t.a - t.b @ gain) >= 1.0]
    if bad:
        raise GenerationError(
            f"initial gain fails to stabilize pool members {bad}; regenerate the pool"
        )
    return gain


@dataclass(frozen=True, kw_only=True, eq=False)
class LqrRewardTask(TaskFunction):
    """An LQR task lifted into the reward convention ``reward = -J``."""

    task: LqrTask
    sigma0: np.ndarray
    k_opt: np.ndarray
    j_opt: float

    def gap(self, k) -> float:
        """Optimality gap ``J(K) - J(K*)`` (``+inf`` for destabilizing K)."""
        return lqr_cost(self.task, k, self.sigma0).value - self.j_opt


def lqr_task_function(task: LqrTask, sigma0) -> LqrRewardTask:
    """Wrap a task as a reward oracle with batched evaluation and exact grads."""
    sigma0 = np.asarray(sigma0, dtype=float)
    k_opt = riccati_optimal(task)
    j_opt = lqr_cost(task, k_opt, sigma0).value
    return LqrRewardTask(
        eval_fn=lambda k: -lqr_cost(task, k, sigma0).value,
        dims=task.gain_shape,
        grad_fn=lambda k: -exact_gradient(task, k, sigma0),
        eval_many_fn=lambda ks: -lqr_cost_many(task, ks, sigma0),
        task=task,
        sigma0=sigma0,
        k_opt=k_opt,
        j_opt=j_opt,
    )


def wrap_pool(pool: LqrPool, sigma0=None) -> list[LqrRewardTask]:
    """Reward-wrap every pool member (default ``Sigma0 = I``)."""
    if sigma0 is None:
        sigma0 = np.eye(pool.spec.d1)
    return [lqr_task_function(t, sigma0) for t in pool.tasks]


# ---------------------------------------------------------------------------
# synthetic family
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticTaskSpec:
    """Recipe for the quadratic-plus-ripple family."""

    dims: tuple[int, int] = (2, 2)
    center_radius: float = 1.0
    curvature_range: tuple[float, float] = (0.5, 1.5)
    alpha: float = 0.5
    freq_scale: float = 1.0

    def __post_init__(self):
        p, q = self.dims
        if not (isinstance(p, (int, np.integer)) and isinstance(q, (int, np.integer))
                and p >= 1 and q >= 1):
            raise ConfigError(f"dims must be positive integers, got {self.dims!r}")
        if self.center_radius < 0 or not np.isfinite(self.center_radius):
            raise ConfigError(f"center_radius must be nonnegative, got {self.center_radius!r}")
        lo, hi = self.curvature_range
        if not (0.0 < lo <= hi) or not np.isfinite(hi):
            raise ConfigError(f"curvature_range must satisfy 0 < lo <= hi, got {self.curvature_range!r}")
        if self.alpha < 0 or not np.isfinite(self.alpha):
            raise ConfigError(f"alpha must be nonnegative, got {self.alpha!r}")
        if self.freq_scale < 0 or not np.isfinite(self.freq_scale):
            raise ConfigError(f"freq_scale must be nonnegative, got {self.freq_scale!r}")
        object.__setattr__(self, "dims", (int(p), int(q)))


def synthetic_task(center, curvature, alpha: float, freq) -> TaskFunction:
    """One member of the synthetic family with closed-form exact gradient.

    ``curvature`` is a symmetric positive-definite matrix acting on the
    flattened parameter; ``freq`` shares the parameter's shape.
    """
    center = np.asarray(center, dtype=float)
    freq = np.asarray(freq, dtype=float)
    h = np.asarray(curvature, dtype=float)
    d = center.size
    if center.ndim != 2 or freq.shape != center.shape:
        raise ConfigError("center and freq must be matrices of the same shape")
    if h.shape != (d, d) or np.max(np.abs(h - h.T)) > 1e-10:
        raise ConfigError(f"curvature must be symmetric of shape ({d}, {d})")
    if np.min(np.linalg.eigvalsh(h)) <= 0.0:
        raise ConfigError("curvature must be positive definite")
    if alpha < 0:
        raise ConfigError(f"alpha must be nonnegative, got {alpha!r}")

    def eval_one(theta):
        z = (theta - center).ravel()
        return float(-0.5 * z @ h @ z + alpha * np.cos(np.sum(freq * theta)))

    def eval_many(thetas):
        z = (thetas - center[None]).reshape(len(thetas), -1)
        quad = -0.5 * np.einsum("si,ij,sj->s", z, h, z)
        return quad + alpha * np.cos(np.einsum("sij,ij->s", thetas, freq))

    def grad(theta):
        z = (theta - center).ravel()
        return (-(h @ z)).reshape(center.shape) - alpha * np.sin(np.sum(freq * theta)) * freq

    return TaskFunction(eval_fn=eval_one, dims=center.shape,
                        grad_fn=grad, eval_many_fn=eval_many)


def generate_synthetic_pool(spec: SyntheticTaskSpec, m: int, seed: int) -> list[TaskFunction]:
    """Draw ``m`` synthetic tasks: centers in a ball, random SPD curvatures,
    one shared ripple frequency."""
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise ConfigError(f"pool size must be a positive integer, got {m!r}")
    p, q = spec.dims
    d = p * q
    freq_gen = rng_from_seed(derive_seed(seed, _FREQ_TAG))
    raw = freq_gen.normal(size=(p, q))
    norm = float(np.linalg.norm(raw))
    freq = (spec.freq_scale / norm) * raw if norm > 0 and spec.freq_scale > 0 else np.zeros((p, q))
    lo, hi = spec.curvature_range
    tasks = []
    for i in range(m):
        gen = rng_from_seed(derive_seed(seed, _PERTURB_TAG, i))
        direction = gen.normal(size=(p, q))
        dnorm = max(float(np.linalg.norm(direction)), np.finfo(float).tiny)
        radius = spec.center_radius * gen.uniform(0.0, 1.0) ** (1.0 / d)
        center = (radius / dnorm) * direction
        basis, _ = np.linalg.qr(gen.normal(size=(d, d)))
        eigs = gen.uniform(lo, hi, size=d)
        curvature = (basis * eigs) @ basis.T
        curvature = 0.5 * (curvature + curvature.T)
        tasks.append(synthetic_task(center, curvature, spec.alpha, freq))
    return tasks


# ---------------------------------------------------------------------------
# pool serialization
# ---------------------------------------------------------------------------

POOL_FORMAT = "metacore-pool-v1"


def _encode_matrix(m: np.ndarray) -> dict:
    return {"shape": list(m.shape), "data": [float(x) for x in m.ravel()]}


def _decode_matrix(doc, name: str) -> np.ndarray:
    try:
        shape = tuple(int(s) for s in doc["shape"])
        data = np.asarray(doc["data"], dtype=float)
        return data.reshape(shape)
    except (KeyError, TypeError, ValueError) as exc:
        raise PoolFormatError(f"malformed matrix entry for {name!r}: {exc}") from exc


def _encode_task(t: LqrTask) -> dict:
    return {"a": _encode_matrix(t.a), "b": _encode_matrix(t.b),
            "q": _encode_matrix(t.q), "r": _encode_matrix(t.r)}


def _decode_task(doc, name: str) -> LqrTask:
    try:
        return LqrTask(*(_decode_matrix(doc[k], f"{name}.{k}") for k in ("a", "b", "q", "r")))
    except KeyError as exc:
        raise PoolFormatError(f"task entry {name!r} is missing field {exc}") from exc
    except ValueError as exc:
        raise PoolFormatError(f"task entry {name!r} is invalid: {exc}") from exc


def pool_to_json(pool: LqrPool) -> dict:
    return {
        "format": POOL_FORMAT,
        "dims": [pool.spec.d1, pool.spec.d2],
        "eps_het": list(pool.spec.eps_het),
        "seed": pool.spec.seed,
        "root_seed": pool.root_seed,
        "nominal": _encode_task(pool.nominal),
        "nominal_gain": _encode_matrix(pool.nominal_gain),
        "tasks": [_encode_task(t) for t in pool.tasks],
    }


def pool_from_json(doc) -> LqrPool:
    if not isinstance(doc, dict) or doc.get("format") != POOL_FORMAT:
        raise PoolFormatError(
            f"unsupported pool document (expected format {POOL_FORMAT!r}, "
            f"got {doc.get('format') if isinstance(doc, dict) else type(doc).__name__!r})"
        )
    try:
        d1, d2 = (int(x) for x in doc["dims"])
        eps = tuple(float(x) for x in doc["eps_het"])
        spec = PoolSpec(d1=d1, d2=d2, m=len(doc["tasks"]), eps_het=eps, seed=int(doc["seed"]))
        nominal = _decode_task(doc["nominal"], "nominal")
        tasks = tuple(_decode_task(t, f"tasks[{i}]") for i, t in enumerate(doc["tasks"]))
        gain = _decode_matrix(doc["nominal_gain"], "nominal_gain")
        return LqrPool(spec=spec, nominal=nominal, tasks=tasks,
                       nominal_gain=gain, root_seed=int(doc["root_seed"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, PoolFormatError):
            raise
        raise PoolFormatError(f"malformed pool document: {exc}") from exc


def save_pool(pool: LqrPool, path) -> None:
    Path(path).write_text(json.dumps(pool_to_json(pool), indent=2) + "\n")


def load_pool(path) -> LqrPool:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise PoolFormatError(f"pool file {path} is not valid JSON: {exc}") from exc
    return pool_from_json(doc)
