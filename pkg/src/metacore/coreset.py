"""Representative-task selection by facility location on gradient space.

Given one gradient matrix per pool task, the pool is summarized by the
pairwise spectral-norm distance matrix ``D[j, i] = ||g_j - g_i||_2``.  A
subset ``S`` is scored by its residual

    resid(S) = sum_j min_{i in S} D[j, i],

the total distance of every task to its nearest selected representative.
Minimizing the residual over ``|S| = L`` is submodular maximization of the
complementary coverage objective, so the classic greedy — seed with the
1-medoid, then repeatedly add the candidate with the largest residual
reduction — carries the usual ``1 - 1/e`` approximation guarantee.  For the
guarantee bookkeeping the empty-set baseline assigns every task to its
farthest candidate (a phantom facility), which leaves greedy's picks
unchanged while making the coverage objective zero at the empty set.

Ties anywhere break toward the lowest task index.  Each selected task is
finally weighted by how many pool tasks it is the nearest representative of,
so the weights always sum to the pool size.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from .errors import ConfigError

BRUTE_FORCE_CAP = 1_000_000  # max number of subsets the enumerator will visit


@dataclass(frozen=True)
class GradientTable:
    """Per-task gradient matrices stacked as ``(M, p, q)``."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 3 or arr.shape[0] < 1:
            raise ValueError(f"gradient table must be (M, p, q) with M >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("gradient table contains non-finite entries")
        object.__setattr__(self, "values", arr)
        arr.setflags(write=False)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def dims(self) -> tuple[int, int]:
        return self.values.shape[1:]


@dataclass(frozen=True)
class Coreset:
    """Selected task indices (ascending) with positive integer weights.

    The weights count nearest-representative assignments over the whole pool,
    so ``sum(weights) == pool_size``.
    """

    indices: tuple[int, ...]
    weights: tuple[int, ...]
    pool_size: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        wts = tuple(int(w) for w in self.weights)
        if len(idx) != len(wts) or not idx:
            raise ValueError("indices and weights must be equally sized and non-empty")
        if any(i < 0 or i >= self.pool_size for i in idx):
            raise ValueError(f"indices must lie in [0, {self.pool_size})")
        if len(set(idx)) != len(idx) or list(idx) != sorted(idx):
            raise ValueError("indices must be distinct and ascending")
        if any(w <= 0 for w in wts):
            raise ValueError("weights must be positive")
        if sum(wts) != self.pool_size:
            raise ValueError(f"weights must sum to the pool size {self.pool_size}, got {sum(wts)}")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "weights", wts)

    @property
    def size(self) -> int:
        return len(self.indices)


def _check_dists(dists) -> np.ndarray:
    arr = np.asarray(dists, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"distance matrix must be square, got {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
        raise ValueError("distance matrix must be finite and nonnegative")
    return arr


def pairwise_distances(table: GradientTable) -> np.ndarray:
    """Spectral-norm distance matrix between all gradient pairs."""
    g = table.values
    m = table.m
    out = np.zeros((m, m))
    iu, ju = np.triu_indices(m, k=1)
    if iu.size:
        diffs = g[iu] - g[ju]
        s = np.linalg.svd(diffs, compute_uv=False)[:, 0]
        out[iu, ju] = s
        out[ju, iu] = s
    return out


def facility_residual(dists, indices) -> float:
    """Total nearest-representative distance for a selected index set."""
    arr = _check_dists(dists)
    idx = list(indices)
    if not idx:
        raise ValueError("facility residual needs at least one selected index")
    return float(arr[:, idx].min(axis=1).sum())


def empty_baseline_residual(dists) -> float:
    """Residual of the phantom empty-set baseline (farthest-candidate assignment)."""
    arr = _check_dists(dists)
    return float(arr.max(axis=1).sum())


def greedy_select(dists, l_size: int) -> list[int]:
    """Greedy facility-location selection of ``l_size`` distinct indices.

    Returns the picks in selection order: the 1-medoid first, then whichever
    candidate most reduces the residual, ties to the lowest index.
    """
    arr = _check_dists(dists)
    m = arr.shape[0]
    if not isinstance(l_size, (int, np.integer)) or not 1 <= l_size <= m:
        raise ConfigError(f"coreset size must satisfy 1 <= L <= {m}, got {l_size!r}")
    nearest = np.full(m, np.inf)
    chosen: list[int] = []
    for _ in range(int(l_size)):
        candidate_nearest = np.minimum(nearest[:, None], arr)
        residuals = candidate_nearest.sum(axis=0)
        residuals[chosen] = np.inf  # keep picks distinct
        pick = int(np.argmin(residuals))  # argmin takes the lowest index on ties
        chosen.append(pick)
        nearest = candidate_nearest[:, pick]
    return chosen


def allocate_weights(dists, indices) -> Coreset:
    """Weight selected indices by nearest-representative counts.

    Every pool task is assigned to its nearest selected index (lowest index
    on ties).  Representatives that attract no task — possible only in
    degenerate all-tie configurations — are dropped, keeping the weight
    vector positive; the weights always sum to the pool size.
    """
    arr = _check_dists(dists)
    idx = sorted(int(i) for i in indices)
    if not idx or len(set(idx)) != len(idx):
        raise ValueError("selected indices must be non-empty and distinct")
    if idx[0] < 0 or idx[-1] >= arr.shape[0]:
        raise ValueError(f"selected indices must lie in [0, {arr.shape[0]})")
    nearest_pos = np.argmin(arr[:, idx], axis=1)  # first occurrence -> lowest index
    counts = np.bincount(nearest_pos, minlength=len(idx))
    keep = counts > 0
    return Coreset(
        indices=tuple(i for i, k in zip(idx, keep) if k),
        weights=tuple(int(c) for c in counts[keep]),
        pool_size=arr.shape[0],
    )


def brute_force_select(dists, l_size: int) -> tuple[tuple[int, ...], float]:
    """Exact minimum-residual subset by enumeration (small pools only).

    Ties resolve to the lexicographically smallest subset.  Refuses problems
    with more than ``BRUTE_FORCE_CAP`` candidate subsets.
    """
    arr = _check_dists(dists)
    m = arr.shape[0]
    if not isinstance(l_size, (int, np.integer)) or not 1 <= l_size <= m:
        raise ConfigError(f"subset size must satisfy 1 <= L <= {m}, got {l_size!r}")
    if comb(m, int(l_size)) > BRUTE_FORCE_CAP:
        raise ConfigError(
            f"enumeration over C({m}, {l_size}) subsets exceeds the cap {BRUTE_FORCE_CAP}"
        )
    best_subset: tuple[int, ...] | None = None
    best_resid = np.inf
    for subset in combinations(range(m), int(l_size)):
        resid = float(arr[:, subset].min(axis=1).sum())
        if resid < best_resid:
            best_resid = resid
            best_subset = subset
    assert best_subset is not None
    return best_subset, best_resid
