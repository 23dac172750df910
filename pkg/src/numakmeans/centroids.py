"""Centroid state, accumulators, initialization, and the deterministic merge."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distance import block_distances, rowwise_distances
from .matrix import check_matrix

INIT_METHODS = ("forgy", "random-partition", "kmeanspp", "given")


@dataclass
class CentroidSet:
    """Current and previous centroid positions plus per-centroid drift.

    ``drift[j]`` is the distance centroid j moved in the last update; it is
    what the pruning bounds are inflated by.
    """

    means: np.ndarray       # (k, d)
    prev_means: np.ndarray  # (k, d)
    counts: np.ndarray      # (k,) int64 members after the last finalize
    drift: np.ndarray       # (k,) float64

    @property
    def k(self) -> int:
        return self.means.shape[0]

    @property
    def d(self) -> int:
        return self.means.shape[1]

    @classmethod
    def from_means(cls, means: np.ndarray) -> "CentroidSet":
        means = np.ascontiguousarray(means, dtype=np.float64)
        if means.ndim != 2:
            raise ValueError("centroid means must be a (k, d) array")
        if not np.isfinite(means).all():
            raise ValueError("centroid means must be finite")
        k = means.shape[0]
        return cls(
            means=means.copy(),
            prev_means=means.copy(),
            counts=np.zeros(k, dtype=np.int64),
            drift=np.zeros(k, dtype=np.float64),
        )

    def state_bytes(self) -> int:
        return self.means.nbytes + self.prev_means.nbytes + self.counts.nbytes + self.drift.nbytes


@dataclass
class Accumulator:
    """Per-owner running sums used to rebuild centroids.

    ``owner`` fixes the position of this accumulator in the deterministic
    pairwise merge.  In full passes the fields hold plain totals; pruned
    iterations use the same structure for signed reassignment deltas, in
    which case counts may be negative.
    """

    sums: np.ndarray    # (k, d)
    counts: np.ndarray  # (k,) int64
    sq: np.ndarray      # (k,) per-cluster sums of squared row norms
    owner: int = 0

    @classmethod
    def zeros(cls, k: int, d: int, owner: int = 0) -> "Accumulator":
        return cls(
            sums=np.zeros((k, d), dtype=np.float64),
            counts=np.zeros(k, dtype=np.int64),
            sq=np.zeros(k, dtype=np.float64),
            owner=owner,
        )

    def add_(self, other: "Accumulator") -> None:
        self.sums += other.sums
        self.counts += other.counts
        self.sq += other.sq

    def state_bytes(self) -> int:
        return self.sums.nbytes + self.counts.nbytes + self.sq.nbytes


def merge_accumulators(accs: list[Accumulator]) -> Accumulator:
    """Pairwise tree reduction of accumulators, ordered by ascending owner.

    Each round adds accumulator 2i+1 into 2i; an odd trailing accumulator is
    carried to the next round.  The fixed pairing makes the floating-point
    summation order, and therefore the result, reproducible for a given set
    of owners.  Mutates the inputs.
    """
    if not accs:
        raise ValueError("cannot merge an empty accumulator list")
    level = sorted(accs, key=lambda a: a.owner)
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level) - 1, 2):
            level[i].add_(level[i + 1])
            nxt.append(level[i])
        if len(level) % 2 == 1:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def finalize_centroids(merged: Accumulator, prev: CentroidSet) -> CentroidSet:
    """Turn merged totals into the next centroid set.

    Empty clusters keep their previous position (drift 0); drift is the
    distance each centroid moved.
    """
    k, d = merged.sums.shape
    means = np.empty((k, d), dtype=np.float64)
    occupied = merged.counts > 0
    means[occupied] = merged.sums[occupied] / merged.counts[occupied, None]
    means[~occupied] = prev.means[~occupied]
    drift = rowwise_distances(means, prev.means)
    drift[~occupied] = 0.0
    return CentroidSet(
        means=means,
        prev_means=prev.means.copy(),
        counts=merged.counts.copy(),
        drift=drift,
    )


def init_centroids(m: np.ndarray, k: int, method: str = "forgy", seed: int = 0,
                   initial: np.ndarray | None = None) -> CentroidSet:
    """Seeded initial centroids.

    forgy samples k distinct rows; random-partition splits a seeded
    permutation of the rows into k balanced groups and uses group means;
    kmeanspp applies the usual squared-distance weighting; given takes
    caller-supplied (k, d) values.
    """
    m = check_matrix(m)
    n, d = m.shape
    if method not in INIT_METHODS:
        raise ValueError(f"unknown init method {method!r}")
    if k < 1:
        raise ValueError("k must be >= 1")

    if method == "given":
        if initial is None:
            raise ValueError("init method 'given' requires initial centroids")
        initial = np.ascontiguousarray(initial, dtype=np.float64)
        if initial.shape != (k, d):
            raise ValueError(f"initial centroids must be ({k}, {d}), got {initial.shape}")
        if not np.isfinite(initial).all():
            raise ValueError("initial centroids must be finite")
        return CentroidSet.from_means(initial)

    rng = np.random.default_rng(seed)
    if method == "forgy":
        if k > n:
            raise ValueError(f"forgy needs k <= n (k={k}, n={n})")
        rows = rng.choice(n, size=k, replace=False)
        return CentroidSet.from_means(m[np.sort(rows)])

    if method == "random-partition":
        order = rng.permutation(n)
        groups = np.array_split(order, k)
        means = np.empty((k, d), dtype=np.float64)
        for j, g in enumerate(groups):
            if g.size == 0:
                means[j] = m.mean(axis=0)
            else:
                means[j] = m[np.sort(g)].mean(axis=0)
        return CentroidSet.from_means(means)

    # kmeanspp
    if k > n:
        raise ValueError(f"kmeanspp needs k <= n (k={k}, n={n})")
    chosen = [int(rng.integers(n))]
    d2 = block_distances(m, m[chosen[-1]][None, :])[:, 0] ** 2
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        chosen.append(idx)
        cand = block_distances(m, m[idx][None, :])[:, 0] ** 2
        np.minimum(d2, cand, out=d2)
    return CentroidSet.from_means(m[chosen])
