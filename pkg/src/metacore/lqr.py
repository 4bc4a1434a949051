"""Discrete-time LQR primitives.

The plant is ``x_{t+1} = A x_t + B u_t`` with static state feedback
``u_t = -K x_t`` and quadratic stage cost ``x'Qx + u'Ru``.  For a stabilizing
gain the infinite-horizon cost starting from ``x_0 ~ N(0, Sigma0)`` is
``J(K) = trace(P Sigma0)`` where ``P`` solves the closed-loop discrete
Lyapunov equation

    A_cl' P A_cl - P + (Q + K'RK) = 0,      A_cl = A - BK.

Everything here is exact linear algebra on small dense matrices: the
Lyapunov equation is solved directly through its Kronecker form, the cost
gradient in ``K`` is the closed-form expression
``2((R + B'PB)K - B'PA) Sigma_K``, and the optimal gain comes from value
iteration on the Riccati map.  A batched cost evaluator is provided so that
zeroth-order probe sweeps do not pay Python-loop overhead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InstabilityError, SolverError

# Controllers whose closed loop is within this margin of the unit circle are
# treated as non-stabilizing: the Lyapunov system becomes numerically singular
# well before rho reaches 1.
STABILITY_MARGIN = 1e-8

_SYM_ATOL = 1e-12
_PSD_EIG_FLOOR = -1e-10


def _as_matrix(name: str, value, shape: tuple[int, int] | None = None) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    if shape is not None and arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    return arr


def _require_symmetric(name: str, arr: np.ndarray) -> np.ndarray:
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got {arr.shape}")
    if np.max(np.abs(arr - arr.T)) > _SYM_ATOL * max(1.0, float(np.max(np.abs(arr)))):
        raise ValueError(f"{name} is not symmetric")
    return 0.5 * (arr + arr.T)


@dataclass(frozen=True)
class LqrTask:
    """One LQR instance ``(A, B, Q, R)``.

    :param a: state matrix, ``d1 x d1``
    :param b: input matrix, ``d1 x d2``
    :param q: state cost, symmetric PSD ``d1 x d1``
    :param r: input cost, symmetric PD ``d2 x d2``
    """

    a: np.ndarray
    b: np.ndarray
    q: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        a = _as_matrix("A", self.a)
        d1 = a.shape[0]
        if a.shape != (d1, d1):
            raise ValueError(f"A must be square, got {a.shape}")
        b = _as_matrix("B", self.b)
        if b.shape[0] != d1:
            raise ValueError(f"B must have {d1} rows, got {b.shape}")
        q = _require_symmetric("Q", _as_matrix("Q", self.q, (d1, d1)))
        r = _require_symmetric("R", _as_matrix("R", self.r, (b.shape[1], b.shape[1])))
        if np.min(np.linalg.eigvalsh(q)) < _PSD_EIG_FLOOR:
            raise ValueError("Q must be positive semidefinite")
        if np.min(np.linalg.eigvalsh(r)) <= 0.0:
            raise ValueError("R must be positive definite")
        for name, val in (("a", a), ("b", b), ("q", q), ("r", r)):
            object.__setattr__(self, name, val)
            val.setflags(write=False)

    @property
    def d1(self) -> int:
        return self.a.shape[0]

    @property
    def d2(self) -> int:
        return self.b.shape[1]

    @property
    def gain_shape(self) -> tuple[int, int]:
        """Shape of a feedback gain for this task."""
        return (self.d2, self.d1)


@dataclass(frozen=True)
class Controller:
    """Static feedback gain ``u = -K x``."""

    k: np.ndarray

    def __post_init__(self):
        k = _as_matrix("K", self.k)
        object.__setattr__(self, "k", k)
        k.setflags(write=False)

    def stabilizes(self, task: LqrTask) -> bool:
        return spectral_radius(task.a - task.b @ self.k) < 1.0


@dataclass(frozen=True)
class CostReport:
    """Outcome of a cost evaluation.

    ``stable`` is False when the closed loop is not (numerically) Schur
    stable; in that case ``value`` is ``+inf`` and the matrix fields are None.
    """

    value: float
    p: np.ndarray | None
    sigma_k: np.ndarray | None
    stable: bool


def spectral_radius(m) -> float:
    """Largest eigenvalue magnitude of a square matrix."""
    arr = _as_matrix("matrix", m)
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"spectral radius needs a square matrix, got {arr.shape}")
    if arr.shape[0] == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(arr))))


def solve_discrete_lyapunov(a_cl, w) -> np.ndarray:
    """Solve ``A_cl' P A_cl - P + W = 0`` for symmetric ``P``.

    Uses the Kronecker linearization ``(I - A_cl' (x) A_cl') vec(P) = vec(W)``,
    which is exact for the small dimensions used here.

    :raises InstabilityError: if ``rho(A_cl) >= 1 - 1e-8``
    :raises SolverError: if the solution fails the residual contract
        ``||A_cl' P A_cl - P + W||_F <= 1e-10 * max(1, ||W||_F)``
    """
    a_arr = _as_matrix("A_cl", a_cl)
    if a_arr.shape[0] != a_arr.shape[1]:
        raise ValueError(f"A_cl must be square, got {a_arr.shape}")
    w_arr = _require_symmetric("W", _as_matrix("W", w, a_arr.shape))
    rho = spectral_radius(a_arr)
    if rho >= 1.0 - STABILITY_MARGIN:
        raise InstabilityError(
            f"Lyapunov solve needs rho(A_cl) < 1 - {STABILITY_MARGIN:g}, got {rho:.6g}"
        )
    n = a_arr.shape[0]
    at = a_arr.T
    system = np.eye(n * n) - np.kron(at, at)
    p = np.linalg.solve(system, w_arr.ravel()).reshape(n, n)
    p = 0.5 * (p + p.T)
    residual = float(np.linalg.norm(at @ p @ a_arr - p + w_arr))
    bound = 1e-10 * max(1.0, float(np.linalg.norm(w_arr)))
    if residual > bound:
        raise SolverError(
            f"Lyapunov residual {residual:.3e} exceeds contract bound {bound:.3e} "
            f"(rho(A_cl) = {rho:.6g})"
        )
    return p


def lqr_cost(task: LqrTask, k, sigma0) -> CostReport:
    """Evaluate ``J(K) = trace(P Sigma0)`` for gain ``k``.

    Also reports the closed-loop state correlation ``Sigma_K`` solving
    ``Sigma_K = Sigma0 + A_cl Sigma_K A_cl'``.  Non-stabilizing gains yield
    an infinite-value report instead of an exception.
    """
    k_arr = _as_matrix("K", k, task.gain_shape)
    s0 = _require_symmetric("Sigma0", _as_matrix("Sigma0", sigma0, (task.d1, task.d1)))
    a_cl = task.a - task.b @ k_arr
    if spectral_radius(a_cl) >= 1.0 - STABILITY_MARGIN:
        return CostReport(value=float("inf"), p=None, sigma_k=None, stable=False)
    w = task.q + k_arr.T @ task.r @ k_arr
    p = solve_discrete_lyapunov(a_cl, w)
    sigma_k = solve_discrete_lyapunov(a_cl.T, s0)
    value = float(np.trace(p @ s0))
    return CostReport(value=value, p=p, sigma_k=sigma_k, stable=True)


def exact_gradient(task: LqrTask, k, sigma0) -> np.ndarray:
    """Closed-form policy gradient ``dJ/dK`` at a stabilizing gain.

    :raises InstabilityError: if ``k`` does not stabilize ``task``
    """
    report = lqr_cost(task, k, sigma0)
    if not report.stable:
        raise InstabilityError("exact_gradient requires a stabilizing gain")
    k_arr = _as_matrix("K", k, task.gain_shape)
    p, sigma_k = report.p, report.sigma_k
    return 2.0 * ((task.r + task.b.T @ p @ task.b) @ k_arr - task.b.T @ p @ task.a) @ sigma_k


def riccati_optimal(task: LqrTask, tol: float = 1e-12, max_iters: int = 100_000) -> np.ndarray:
    """Optimal gain ``K*`` by value iteration on the Riccati map.

    Iterates ``P <- Q + A'PA - A'PB (R + B'PB)^-1 B'PA`` from ``P = Q`` until
    the successive change drops below ``tol``, then returns
    ``K* = (R + B'PB)^-1 B'PA``.

    :raises SolverError: on divergence or failure to converge within
        ``max_iters`` (e.g. a non-stabilizable pair)
    """
    a, b, q, r = task.a, task.b, task.q, task.r
    p = q.copy()
    for _ in range(max_iters):
        bpb = r + b.T @ p @ b
        bpa = b.T @ p @ a
        p_next = q + a.T @ p @ a - bpa.T @ np.linalg.solve(bpb, bpa)
        p_next = 0.5 * (p_next + p_next.T)
        change = float(np.linalg.norm(p_next - p))
        p = p_next
        if not np.isfinite(change) or float(np.linalg.norm(p)) > 1e12:
            raise SolverError("Riccati value iteration diverged; pair may be non-stabilizable")
        if change <= tol:
            return np.linalg.solve(r + b.T @ p @ b, b.T @ p @ a)
    raise SolverError(
        f"Riccati value iteration did not converge within {max_iters} iterations"
    )


def lqr_cost_many(task: LqrTask, ks: np.ndarray, sigma0, chunk: int = 32_768) -> np.ndarray:
    """Vectorized ``J(K)`` over a stack of gains.

    ``ks`` has shape ``(batch, d2, d1)``; returns a ``(batch,)`` value array
    with ``+inf`` at non-stabilizing entries.  Matches :func:`lqr_cost` on
    each slice (same Kronecker solve, just batched).
    """
    ks = np.asarray(ks, dtype=float)
    if ks.ndim != 3 or ks.shape[1:] != task.gain_shape:
        raise ValueError(f"ks must have shape (batch, {task.d2}, {task.d1}), got {ks.shape}")
    s0 = _require_symmetric("Sigma0", _as_matrix("Sigma0", sigma0, (task.d1, task.d1)))
    out = np.full(ks.shape[0], np.inf)
    for start in range(0, ks.shape[0], chunk):
        block = ks[start : start + chunk]
        out[start : start + chunk] = _cost_block(task, block, s0)
    return out


def _cost_block(task: LqrTask, ks: np.ndarray, s0: np.ndarray) -> np.ndarray:
    n = task.d1
    a_cl = task.a[None, :, :] - np.einsum("ik,bkj->bij", task.b, ks)
    with np.errstate(invalid="ignore"):
        rho = np.max(np.abs(np.linalg.eigvals(a_cl)), axis=1)
    values = np.full(ks.shape[0], np.inf)
    stable = rho < 1.0 - STABILITY_MARGIN
    if not np.any(stable):
        return values
    a_s = a_cl[stable]
    k_s = ks[stable]
    w = task.q[None] + np.einsum("bki,kl,blj->bij", k_s, task.r, k_s)
    # (I - A_cl' (x) A_cl') for each slice; kron[(i,j),(k,l)] = A[k,i] A[l,j].
    kron = np.einsum("bki,blj->bijkl", a_s, a_s).reshape(a_s.shape[0], n * n, n * n)
    system = np.eye(n * n)[None] - kron
    vec_p = np.linalg.solve(system, w.reshape(-1, n * n, 1))[..., 0]
    values[stable] = vec_p @ s0.ravel()
    return values
