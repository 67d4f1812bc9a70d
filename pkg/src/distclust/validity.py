"""Cluster validation: external agreement scores and internal indices.

External scores compare a partition with known class labels (accuracy by
optimal cluster-to-class assignment, adjusted Rand index). Internal indices
(Calinski-Harabasz, silhouette, Davies-Bouldin*) score a partition from a
geometry alone and drive the choice of K.

A geometry provides pairwise distances plus distances involving cluster
centroids. Under MMD geometry every centroid quantity is evaluated through
Gram algebra; under Wasserstein geometry centroids are mixture means whose
quantile functions are obtained numerically.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InputError
from .gram import GramMatrix, mmd_matrix
from .kmeans import Partition
from .wasserstein import pooled_quantiles, quantile_levels, quantile_matrix


class GramGeometry:
    """MMD geometry backed by a Gram matrix."""

    def __init__(self, gram: GramMatrix):
        self.gram = gram
        self.n = gram.n
        self._pairwise = None

    def pairwise(self) -> np.ndarray:
        if self._pairwise is None:
            self._pairwise = mmd_matrix(self.gram)
        return self._pairwise

    def point_to_centroid(self, members) -> np.ndarray:
        members = np.asarray(members, dtype=int)
        k = self.gram.values
        within = k[np.ix_(members, members)].mean()
        sq = np.diag(k) - 2.0 * k[:, members].mean(axis=1) + within
        return np.sqrt(np.maximum(sq, 0.0))

    def centroid_to_centroid(self, members_a, members_b) -> float:
        a = np.asarray(members_a, dtype=int)
        b = np.asarray(members_b, dtype=int)
        k = self.gram.values
        sq = (k[np.ix_(a, a)].mean() + k[np.ix_(b, b)].mean()
              - 2.0 * k[np.ix_(a, b)].mean())
        return float(np.sqrt(max(sq, 0.0)))


class WassersteinGeometry:
    """W_alpha geometry over univariate records with mixture-mean centroids."""

    def __init__(self, records, alpha: float = 2.0, grid: int = 1024):
        self.records = list(records)
        self.alpha = float(alpha)
        self.grid = grid
        self.qs = quantile_levels(grid)
        self.q = quantile_matrix(self.records, grid)
        self.n = self.q.shape[0]
        self._pairwise = None

    def _dist_rows_to(self, centroid_q: np.ndarray) -> np.ndarray:
        return np.mean(np.abs(self.q - centroid_q[None, :]) ** self.alpha,
                       axis=1) ** (1.0 / self.alpha)

    def pairwise(self) -> np.ndarray:
        if self._pairwise is None:
            from .wasserstein import pairwise_wasserstein
            self._pairwise = pairwise_wasserstein(self.records, self.alpha, self.grid)
        return self._pairwise

    def _centroid_q(self, members) -> np.ndarray:
        recs = [self.records[i] for i in members]
        return pooled_quantiles(recs, self.qs)

    def point_to_centroid(self, members) -> np.ndarray:
        return self._dist_rows_to(self._centroid_q(members))

    def centroid_to_centroid(self, members_a, members_b) -> float:
        qa = self._centroid_q(members_a)
        qb = self._centroid_q(members_b)
        return float(np.mean(np.abs(qa - qb) ** self.alpha) ** (1.0 / self.alpha))


class MatrixGeometry:
    """Geometry from a precomputed distance matrix plus centroid callbacks."""

    def __init__(self, pairwise: np.ndarray, point_to_centroid, centroid_to_centroid):
        d = np.asarray(pairwise, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise InputError("pairwise distance matrix must be square")
        if not np.allclose(d, d.T) or np.any(np.diag(d) != 0.0) or np.any(d < 0.0):
            raise InputError("pairwise matrix must be symmetric, nonnegative, zero-diagonal")
        self._d = d
        self.n = d.shape[0]
        self._p2c = point_to_centroid
        self._c2c = centroid_to_centroid

    def pairwise(self) -> np.ndarray:
        return self._d

    def point_to_centroid(self, members) -> np.ndarray:
        return self._p2c(members)

    def centroid_to_centroid(self, members_a, members_b) -> float:
        return self._c2c(members_a, members_b)


# ---------------------------------------------------------------------------
# External agreement.


def _as_labels(x) -> np.ndarray:
    if isinstance(x, Partition):
        return np.asarray(x.assignments)
    arr = np.asarray(x)
    _, codes = np.unique(arr, return_inverse=True)
    return codes


def contingency_table(pred, truth) -> np.ndarray:
    a = _as_labels(pred)
    b = _as_labels(truth)
    if a.shape != b.shape:
        raise InputError(f"label length mismatch: {a.shape} vs {b.shape}")
    ka, kb = a.max() + 1, b.max() + 1
    table = np.zeros((ka, kb), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    return table


def accuracy(pred, truth) -> float:
    """Best classification rate over injective cluster-to-class mappings."""
    table = contingency_table(pred, truth)
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum() / table.sum())


def adjusted_rand_index(pred, truth) -> float:
    """Hubert-Arabie chance-corrected pair-counting agreement."""
    table = contingency_table(pred, truth).astype(float)
    n = table.sum()

    def choose2(x):
        return x * (x - 1.0) / 2.0

    sum_ij = choose2(table).sum()
    sum_a = choose2(table.sum(axis=1)).sum()
    sum_b = choose2(table.sum(axis=0)).sum()
    total = choose2(n)
    expected = sum_a * sum_b / total
    denom = 0.5 * (sum_a + sum_b) - expected
    if denom == 0.0:
        return 0.0
    return float((sum_ij - expected) / denom)


# ---------------------------------------------------------------------------
# Internal indices.


def _cluster_members(part: Partition):
    return [part.members(j) for j in range(part.n_clusters)]


def calinski_harabasz(geo, part: Partition) -> float:
    """Between/within dispersion ratio, scaled by (n-K)/(K-1). Higher is better."""
    n, k = geo.n, part.n_clusters
    if k < 2 or n <= k:
        raise InputError(f"Calinski-Harabasz needs 2 <= K < n, got K={k}, n={n}")
    everyone = np.arange(n)
    between = 0.0
    within = 0.0
    for members in _cluster_members(part):
        between += members.size * geo.centroid_to_centroid(members, everyone) ** 2
        within += float(np.sum(geo.point_to_centroid(members)[members] ** 2))
    if within == 0.0:
        return float("inf")
    return float((between / within) * (n - k) / (k - 1))


def silhouette(geo, part: Partition) -> float:
    """Mean silhouette width; singleton clusters contribute zero."""
    if part.n_clusters < 2:
        raise InputError("silhouette needs at least 2 clusters")
    d = geo.pairwise()
    n = geo.n
    members = _cluster_members(part)
    sizes = np.array([m.size for m in members])
    # Mean distance from every point to every cluster.
    sums = np.stack([d[:, m].sum(axis=1) for m in members], axis=1)
    scores = np.zeros(n)
    for j, m in enumerate(members):
        if m.size < 2:
            continue  # silhouette of a singleton-cluster point is 0
        a = sums[m, j] / (m.size - 1)
        other = np.delete(sums[m] / sizes[None, :], j, axis=1)
        b = other.min(axis=1)
        denom = np.maximum(a, b)
        good = denom > 0
        scores[m[good]] = (b[good] - a[good]) / denom[good]
    return float(scores.mean())


def davies_bouldin_star(geo, part: Partition) -> float:
    """Dispersion-over-separation index; lower is better."""
    k = part.n_clusters
    if k < 2:
        raise InputError("Davies-Bouldin* needs at least 2 clusters")
    members = _cluster_members(part)
    scatter = np.array([
        float(np.mean(geo.point_to_centroid(m)[m])) for m in members
    ])
    centroid_d = np.zeros((k, k))
    for j in range(k):
        for l in range(j + 1, k):
            centroid_d[j, l] = centroid_d[l, j] = geo.centroid_to_centroid(
                members[j], members[l])
    total = 0.0
    for j in range(k):
        others = [l for l in range(k) if l != j]
        numer = max(scatter[j] + scatter[l] for l in others)
        denom = max(centroid_d[j, l] for l in others)
        if denom == 0.0:
            return float("inf")
        total += numer / denom
    return float(total / k)


CRITERIA = {
    "ch": (calinski_harabasz, 1),
    "silhouette": (silhouette, 1),
    "dbstar": (davies_bouldin_star, -1),
}


def select_k(geo, runner, k_range, criterion: str):
    """Choose K by an internal index.

    ``runner`` maps K to a Partition. Returns (chosen K, {K: score}).
    CH and silhouette are maximized, DB* minimized; ties go to the
    smaller K.
    """
    crit = criterion.lower()
    if crit not in CRITERIA:
        raise InputError(f"unknown criterion {criterion!r}; pick one of {sorted(CRITERIA)}")
    index_fn, sign = CRITERIA[crit]
    scores = {}
    best_k, best_val = None, None
    for k in sorted(k_range):
        part = runner(k)
        val = index_fn(geo, part)
        scores[k] = val
        oriented = sign * val
        if best_val is None or oriented > best_val:
            best_k, best_val = k, oriented
    return best_k, scores
