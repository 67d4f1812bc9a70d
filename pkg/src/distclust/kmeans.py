"""Lloyd-style K-means over distributional data.

Two geometries share one iteration engine:

* kernel K-means on a precomputed Gram matrix, where centroids exist only
  implicitly as cluster-mean embeddings and every distance is a quadratic
  form in Gram entries;
* Wasserstein K-means on quantile vectors, with centroids either as
  pointwise quantile averages (the univariate W2 Frechet mean) or as
  mixture means of the member records.

Each run draws K distinct records as initial representatives, alternates
assignment and implicit centroid updates until the assignment is a fixed
point, and keeps the restart with the lowest within-cluster sum of squares.
Restart r uses an independent stream seeded by (seed, r), so nested restart
counts reuse earlier streams. Ties in the assignment step go to the lowest
cluster id; ties between restarts keep the earliest restart.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .distributions import as_record
from .errors import InputError
from .gram import GramMatrix, centroid_dist_sq_all
from .wasserstein import pooled_quantiles, quantile_levels, quantile_matrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Partition:
    """Clustering result with per-run diagnostics."""

    assignments: np.ndarray
    n_clusters: int
    wcss: float
    n_iterations: int
    seed: int
    wcss_trace: tuple
    converged: bool = True

    def __post_init__(self):
        a = np.asarray(self.assignments, dtype=int)
        a.setflags(write=False)
        object.__setattr__(self, "assignments", a)
        object.__setattr__(self, "wcss_trace", tuple(float(w) for w in self.wcss_trace))

    @property
    def n(self) -> int:
        return self.assignments.shape[0]

    def members(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == j)

    def to_json(self) -> dict:
        return {
            "assignments": self.assignments.tolist(),
            "K": self.n_clusters,
            "wcss": self.wcss,
            "n_iterations": self.n_iterations,
            "seed": self.seed,
            "wcss_trace": list(self.wcss_trace),
            "converged": self.converged,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Partition":
        return cls(np.asarray(d["assignments"], dtype=int), d["K"], d["wcss"],
                   d["n_iterations"], d["seed"], tuple(d["wcss_trace"]),
                   d.get("converged", True))


class _GramBackend:
    """Distance oracle for kernel K-means: everything from the Gram array."""

    def __init__(self, values: np.ndarray):
        self.values = values
        self.n = values.shape[0]

    def init_dists(self, idx: np.ndarray) -> np.ndarray:
        k = self.values
        d = np.diag(k)
        out = d[:, None] - 2.0 * k[:, idx] + d[idx][None, :]
        return np.maximum(out, 0.0)

    def assign_dists(self, assign: np.ndarray, n_clusters: int) -> np.ndarray:
        return centroid_dist_sq_all(self.values, assign, n_clusters)


class _QuantileBackend:
    """Distance oracle for W2 K-means with pointwise quantile-average centroids."""

    def __init__(self, q: np.ndarray):
        self.q = q
        self.n, self.g = q.shape
        self._sq = np.einsum("ij,ij->i", q, q) / self.g

    def _dists_to_rows(self, rows: np.ndarray) -> np.ndarray:
        c2 = np.einsum("ij,ij->i", rows, rows) / self.g
        d2 = self._sq[:, None] + c2[None, :] - 2.0 * (self.q @ rows.T) / self.g
        return np.maximum(d2, 0.0)

    def init_dists(self, idx: np.ndarray) -> np.ndarray:
        return self._dists_to_rows(self.q[idx])

    def assign_dists(self, assign: np.ndarray, n_clusters: int) -> np.ndarray:
        out = np.full((self.n, n_clusters), np.inf)
        alive = np.unique(assign)
        centroids = np.stack([self.q[assign == j].mean(axis=0) for j in alive])
        out[:, alive] = self._dists_to_rows(centroids)
        return out


class _MixtureMeanBackend:
    """W2 K-means variant whose centroids are mixture means of the members."""

    def __init__(self, records, grid: int):
        self.records = records
        self.qs = quantile_levels(grid)
        self.q = quantile_matrix(records, grid)
        self.n, self.g = self.q.shape

    def _dists_to_rows(self, rows: np.ndarray) -> np.ndarray:
        d2 = np.mean((self.q[:, None, :] - rows[None, :, :]) ** 2, axis=2)
        return d2

    def init_dists(self, idx: np.ndarray) -> np.ndarray:
        return self._dists_to_rows(self.q[idx])

    def assign_dists(self, assign: np.ndarray, n_clusters: int) -> np.ndarray:
        out = np.full((self.n, n_clusters), np.inf)
        for j in np.unique(assign):
            members = [self.records[i] for i in np.flatnonzero(assign == j)]
            centroid_q = pooled_quantiles(members, self.qs)
            out[:, j] = np.mean((self.q - centroid_q[None, :]) ** 2, axis=1)
        return out


def _repair_empty(assign: np.ndarray, n_clusters: int, backend) -> np.ndarray:
    """Move the farthest-from-centroid point into each empty cluster."""
    assign = assign.copy()
    while True:
        counts = np.bincount(assign, minlength=n_clusters)
        empties = np.flatnonzero(counts == 0)
        if empties.size == 0:
            return assign
        dists = backend.assign_dists(assign, n_clusters)
        d_own = dists[np.arange(assign.shape[0]), assign]
        d_own = np.where(counts[assign] == 1, -np.inf, d_own)  # keep donors nonempty
        donor = int(np.argmax(d_own))
        assign[donor] = empties[0]


def _pick_initial(backend, n_clusters: int, rng: np.random.Generator, init: str) -> np.ndarray:
    if init == "sample":
        return rng.choice(backend.n, size=n_clusters, replace=False)
    if init == "kmeans++":
        idx = [int(rng.integers(backend.n))]
        for _ in range(n_clusters - 1):
            d = backend.init_dists(np.asarray(idx)).min(axis=1)
            total = d.sum()
            if total <= 0:
                remaining = np.setdiff1d(np.arange(backend.n), idx)
                idx.append(int(rng.choice(remaining)))
                continue
            idx.append(int(rng.choice(backend.n, p=d / total)))
        return np.asarray(idx)
    raise InputError(f"unknown initialization {init!r}")


def _lloyd_once(backend, n_clusters: int, rng: np.random.Generator,
                max_iter: int, init: str):
    idx = _pick_initial(backend, n_clusters, rng, init)
    assign = np.argmin(backend.init_dists(idx), axis=1)
    assign = _repair_empty(assign, n_clusters, backend)
    dists = backend.assign_dists(assign, n_clusters)
    trace = []
    converged = False
    for _ in range(max_iter):
        new_assign = np.argmin(dists, axis=1)
        new_assign = _repair_empty(new_assign, n_clusters, backend)
        new_dists = backend.assign_dists(new_assign, n_clusters)
        wcss = float(new_dists[np.arange(backend.n), new_assign].sum())
        trace.append(wcss)
        if np.array_equal(new_assign, assign):
            converged = True
            break
        assign, dists = new_assign, new_dists
    return assign, trace, converged


def _best_of_restarts(backend, n_clusters, restarts, seed, max_iter, init):
    if not (1 <= n_clusters <= backend.n):
        raise InputError(f"need 1 <= K <= n, got K={n_clusters}, n={backend.n}")
    if restarts < 1 or max_iter < 1:
        raise InputError("restarts and max_iter must be >= 1")
    best = None
    for r in range(restarts):
        rng = np.random.default_rng(np.random.SeedSequence((seed, r)))
        assign, trace, converged = _lloyd_once(backend, n_clusters, rng, max_iter, init)
        if not converged:
            logger.warning("K-means restart %d did not converge in %d sweeps", r, max_iter)
        wcss = trace[-1]
        if best is None or wcss < best[1]:
            best = (assign, wcss, trace, converged)
    assign, wcss, trace, converged = best
    return Partition(assign, n_clusters, wcss, len(trace), seed, tuple(trace), converged)


def kernel_kmeans(gram: GramMatrix, n_clusters: int, restarts: int = 10,
                  seed: int = 0, max_iter: int = 100, init: str = "sample") -> Partition:
    """K-means on the embedded sample described by a Gram matrix.

    Estimated-mode Grams are accepted; squared distances are clamped at
    zero, which keeps the objective nonnegative.
    """
    return _best_of_restarts(_GramBackend(gram.values), n_clusters, restarts,
                             seed, max_iter, init)


def wasserstein_kmeans(records, n_clusters: int, restarts: int = 10, seed: int = 0,
                       max_iter: int = 100, centroid_mode: str = "quantile_mean",
                       grid: int = 1024, init: str = "sample") -> Partition:
    """K-means under the W2 metric for univariate records.

    ``centroid_mode`` selects how centroids are updated: ``quantile_mean``
    averages member quantile functions pointwise (the W2 Frechet mean);
    ``mixture_mean`` uses the mixture of the member distributions.
    """
    records = [as_record(r) for r in records]
    if any(r.p != 1 for r in records):
        raise InputError("Wasserstein K-means requires univariate records")
    if centroid_mode == "quantile_mean":
        backend = _QuantileBackend(quantile_matrix(records, grid))
    elif centroid_mode == "mixture_mean":
        backend = _MixtureMeanBackend(records, grid)
    else:
        raise InputError(f"unknown centroid mode {centroid_mode!r}")
    return _best_of_restarts(backend, n_clusters, restarts, seed, max_iter, init)


def wcss_of(backend_values, partition: Partition) -> float:
    """Recompute the objective of a partition over a Gram array (test hook)."""
    dists = centroid_dist_sq_all(backend_values, partition.assignments, partition.n_clusters)
    return float(dists[np.arange(partition.n), partition.assignments].sum())
