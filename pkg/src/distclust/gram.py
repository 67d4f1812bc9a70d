"""Gram matrices of RKHS inner products between embedded distributions.

Two construction modes:

* exact       -- univariate uniform mixtures; the double integral of the
                 kernel against each pair of mixtures. Computed analytically
                 (closed-form antiderivatives exist for every supported
                 family) or by composite Gauss-Legendre quadrature.
* estimated   -- empirical samples; the unbiased estimator whose diagonal
                 is a U-statistic (same-index terms excluded). The diagonal
                 makes the matrix not necessarily positive semidefinite.

Distances derived from a Gram matrix (MMD, distance to an implicit cluster
centroid) live here as well: centroids are never materialized, every
quantity is a quadratic form in Gram entries.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .distributions import DistributionRecord, EmpiricalDistribution, as_record
from .errors import InputError
from .kernels import KernelSpec, kernel_matrix

_SQRT_HALF_PI = np.sqrt(np.pi / 2.0)


@dataclass(frozen=True)
class GramMatrix:
    """Symmetric n x n matrix of RKHS inner products, with provenance."""

    values: np.ndarray
    mode: str  # "exact" or "estimated"
    kernel: KernelSpec

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise InputError(f"Gram matrix must be square, got shape {v.shape}")
        v = 0.5 * (v + v.T)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.mode not in ("exact", "estimated"):
            raise InputError(f"unknown Gram mode {self.mode!r}")

    @property
    def n(self) -> int:
        return self.values.shape[0]


# ---------------------------------------------------------------------------
# Closed-form building blocks.
#
# For a term phi(x - y), the double integral over [p,q] x [r,t] equals
# H(q-r) - H(p-r) - H(q-t) + H(p-t) where H'' = phi and H(0) = 0, H even.


def _h_gauss(u: np.ndarray, sigma: float) -> np.ndarray:
    z = u / (sigma * np.sqrt(2.0))
    return sigma * _SQRT_HALF_PI * u * erf(z) + sigma**2 * (np.exp(-(u * u) / (2 * sigma**2)) - 1.0)


def _h_laplace(u: np.ndarray, sigma: float) -> np.ndarray:
    au = np.abs(u)
    return sigma * au + sigma**2 * (np.exp(-au / sigma) - 1.0)


def _h_power(u: np.ndarray, s: float) -> np.ndarray:
    return np.abs(u) ** (s + 2.0) / ((s + 1.0) * (s + 2.0))


def _rect_mean(h, p, q, r, t):
    """Mean of phi(x - y) over [p,q] x [r,t] given the second antiderivative."""
    return (h(q - r) - h(p - r) - h(q - t) + h(p - t)) / ((q - p) * (t - r))


def _abs_moment(a: np.ndarray, b: np.ndarray, s: float) -> np.ndarray:
    """E|X|^s for X uniform on (a, b)."""
    hi = np.sign(b) * np.abs(b) ** (s + 1.0)
    lo = np.sign(a) * np.abs(a) ** (s + 1.0)
    return (hi - lo) / ((s + 1.0) * (b - a))


def _component_arrays(mixtures):
    """Flatten mixtures into component arrays plus an (n, M) weight matrix."""
    weights, lows, highs, owner = [], [], [], []
    for i, m in enumerate(mixtures):
        for w, a, b in m.components:
            weights.append(w)
            lows.append(a)
            highs.append(b)
            owner.append(i)
    n, m_total = len(mixtures), len(owner)
    wmat = np.zeros((n, m_total))
    wmat[owner, np.arange(m_total)] = weights
    return np.array(lows), np.array(highs), wmat


def _unwrap_mixtures(sample):
    mixtures = []
    for rec in sample:
        rec = as_record(rec)
        if not rec.is_analytic:
            raise InputError("exact Gram mode requires analytic uniform-mixture records")
        mixtures.append(rec.payload)
    return mixtures


def _component_pair_means(kernel: KernelSpec, lows, highs) -> np.ndarray:
    """E[k(X, Y)] for every ordered pair of uniform components, closed form."""
    p, q = lows[:, None], highs[:, None]
    r, t = lows[None, :], highs[None, :]
    fam = kernel.family
    if fam == "gaussian":
        return _rect_mean(lambda u: _h_gauss(u, kernel.sigma), p, q, r, t)
    if fam == "laplace":
        return _rect_mean(lambda u: _h_laplace(u, kernel.sigma), p, q, r, t)
    if fam == "mg":
        smooth = _rect_mean(lambda u: _h_gauss(u, 1.0), p, q, r, t)
        mom = _abs_moment(lows, highs, kernel.alpha)
        return smooth + mom[:, None] * mom[None, :]
    # energy
    s = 2.0 * kernel.alpha
    mom = _abs_moment(lows, highs, s)
    cross = _rect_mean(lambda u: _h_power(u, s), p, q, r, t)
    return mom[:, None] + mom[None, :] - cross


def gram_exact(sample, kernel: KernelSpec, nodes: int | None = None) -> GramMatrix:
    """Exact Gram matrix for univariate uniform-mixture records.

    The default evaluates the component-pair double integrals in closed
    form. Passing ``nodes`` switches to tensorized composite Gauss-Legendre
    with that many nodes per component axis (useful as an independent
    cross-check; spectrally accurate for the smooth families).
    """
    mixtures = _unwrap_mixtures(sample)
    if kernel.is_auto:
        kernel = kernel.resolved([DistributionRecord(m) for m in mixtures])
    lows, highs, wmat = _component_arrays(mixtures)
    if nodes is None:
        pair = _component_pair_means(kernel, lows, highs)
    else:
        pair = _component_pair_means_gl(kernel, lows, highs, nodes)
    return GramMatrix(wmat @ pair @ wmat.T, "exact", kernel)


def _component_pair_means_gl(kernel: KernelSpec, lows, highs, nodes: int) -> np.ndarray:
    """Gauss-Legendre tensor rule per component-pair rectangle."""
    if nodes < 2:
        raise InputError(f"need at least 2 quadrature nodes, got {nodes}")
    x01, w01 = np.polynomial.legendre.leggauss(nodes)
    x01 = 0.5 * (x01 + 1.0)
    w01 = 0.5 * w01
    pts = lows[:, None] + (highs - lows)[:, None] * x01[None, :]  # (M, G)
    m_comp = len(lows)
    flat = pts.reshape(-1, 1)
    out = np.empty((m_comp, m_comp))
    # Chunk rows to bound the (chunk*G, M*G) kernel block.
    chunk = max(1, int(2e7 // (m_comp * nodes * nodes)))
    for start in range(0, m_comp, chunk):
        stop = min(start + chunk, m_comp)
        blk = kernel_matrix(kernel, pts[start:stop].reshape(-1, 1), flat)
        blk = blk.reshape(stop - start, nodes, m_comp, nodes)
        out[start:stop] = np.einsum("g,cgmh,h->cm", w01, blk, w01, optimize=True)
    return out


# ---------------------------------------------------------------------------
# Estimated mode (empirical records).


def _check_empirical(sample) -> list[EmpiricalDistribution]:
    dists = []
    p = None
    for rec in sample:
        rec = as_record(rec)
        if rec.is_analytic:
            raise InputError("estimated Gram mode requires empirical records")
        d = rec.payload
        if d.n < 2:
            raise InputError("estimated Gram needs N_i >= 2 (U-statistic diagonal)")
        if p is None:
            p = d.p
        elif d.p != p:
            raise InputError(f"records mix dimensions {p} and {d.p}")
        dists.append(d)
    if not dists:
        raise InputError("empty sample")
    return dists


def _tdiff_transform(kernel: KernelSpec):
    """Transform of squared distances for the |x-y| dependent kernel term.

    Returns (transform, value at x == y). The transform writes into a
    caller-provided scratch buffer and leaves its input intact, so several
    kernels can share one squared-distance block. The norm-product parts of
    mg/energy kernels are accumulated separately in closed form.
    """
    fam = kernel.family
    if fam == "gaussian":
        scale = -1.0 / (2.0 * kernel.sigma**2)

        def tf(d2, out):
            np.multiply(d2, scale, out=out)
            return np.exp(out, out=out)

        return tf, 1.0
    if fam == "laplace":
        scale = -1.0 / kernel.sigma

        def tf(d2, out):
            np.sqrt(d2, out=out)
            out *= scale
            return np.exp(out, out=out)

        return tf, 1.0
    if fam == "mg":
        def tf(d2, out):
            np.multiply(d2, -0.5, out=out)
            return np.exp(out, out=out)

        return tf, 1.0
    # energy: the subtracted ||x-y||^(2 alpha) term
    two_alpha = 2.0 * kernel.alpha

    def tf(d2, out):
        np.sqrt(d2, out=out)
        if two_alpha == 1.0:
            return out
        if two_alpha == 0.5:
            return np.sqrt(out, out=out)
        if two_alpha == 1.5:
            out *= np.sqrt(out)
            return out
        out **= two_alpha
        return out

    return tf, 0.0


def _augmented(obs):
    """Factor pairwise squared distances into one matrix product.

    With rows A = [|x|^2, -2x, 1] and columns B = [1, y, |y|^2], the block
    A @ B.T equals |x|^2 + |y|^2 - 2 x.y elementwise.
    """
    sq = [np.einsum("ij,ij->i", o, o) for o in obs]
    ones = [np.ones((o.shape[0], 1)) for o in obs]
    rows = [np.hstack([s[:, None], -2.0 * o, e]) for o, s, e in zip(obs, sq, ones)]
    cols = [np.hstack([e, o, s[:, None]]) for o, s, e in zip(obs, sq, ones)]
    return rows, cols


def _row_sums(obs, i, transforms, aug=None):
    """Sum of each transform over all observation pairs (record i, record l >= i).

    One record pair at a time keeps the working block cache-resident.
    """
    rows_aug, cols_aug = _augmented(obs) if aug is None else aug
    a_i = rows_aug[i]
    n = len(obs)
    rows = [np.empty(n - i) for _ in transforms]
    scratch = None
    for l in range(i, n):
        d2 = a_i @ cols_aug[l].T
        np.maximum(d2, 0.0, out=d2)
        if scratch is None or scratch.shape != d2.shape:
            scratch = np.empty_like(d2)
        for k, tf in enumerate(transforms):
            rows[k][l - i] = float(tf(d2, scratch).sum())
    return rows


_WORKER_STATE: dict = {}


def _init_pair_worker(obs_list, transforms):
    _WORKER_STATE["obs"] = obs_list
    _WORKER_STATE["transforms"] = transforms
    _WORKER_STATE["aug"] = _augmented(obs_list)


def _pair_row_sums(i: int) -> list[np.ndarray]:
    return _row_sums(_WORKER_STATE["obs"], i, _WORKER_STATE["transforms"],
                     _WORKER_STATE["aug"])


def _tdiff_sums(dists, transforms, jobs=1):
    """Full double sums S_kil = sum_{j,l} phi_k(X_ij - X_ll), one matrix per transform."""
    obs = [d.observations for d in dists]
    n = len(obs)
    mats = [np.zeros((n, n)) for _ in transforms]
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_pair_worker,
                                 initargs=(obs, transforms)) as pool:
            results = list(pool.map(_pair_row_sums, range(n)))
    else:
        aug = _augmented(obs)
        results = [_row_sums(obs, i, transforms, aug) for i in range(n)]
    for i, rows in enumerate(results):
        for k in range(len(transforms)):
            mats[k][i, i:] = rows[k]
            mats[k][i:, i] = rows[k]
    return mats


def _assemble_estimated(kernel, dists, tdiff_sum):
    """Combine the |x-y| sums with norm moments into the unbiased estimator."""
    sizes = np.array([d.n for d in dists], dtype=float)
    fam = kernel.family
    if fam in ("gaussian", "laplace"):
        full = tdiff_sum
        trace = sizes.copy()  # k(x, x) = 1
    elif fam == "mg":
        s_a = np.array([np.sum(np.linalg.norm(d.observations, axis=1) ** kernel.alpha)
                        for d in dists])
        s_2a = np.array([np.sum(np.linalg.norm(d.observations, axis=1) ** (2 * kernel.alpha))
                         for d in dists])
        full = tdiff_sum + s_a[:, None] * s_a[None, :]
        trace = sizes + s_2a
    else:  # energy
        two_alpha = 2.0 * kernel.alpha
        s = np.array([np.sum(np.linalg.norm(d.observations, axis=1) ** two_alpha)
                      for d in dists])
        full = s[:, None] * sizes[None, :] + sizes[:, None] * s[None, :] - tdiff_sum
        trace = 2.0 * s
    denom = sizes[:, None] * sizes[None, :]
    vals = full / denom
    diag = (np.diag(full) - trace) / (sizes * (sizes - 1.0))
    np.fill_diagonal(vals, diag)
    return vals


def gram_estimated(sample, kernel: KernelSpec, jobs: int = 1) -> GramMatrix:
    """Unbiased Gram estimate from empirical records (no subsampling).

    Finite inputs always produce finite sums, but the unbounded mg/energy
    kernels inflate the estimator variance on heavy-tailed samples.
    """
    dists = _check_empirical(sample)
    if kernel.is_auto:
        kernel = kernel.resolved([DistributionRecord(d) for d in dists])
    tf, _ = _tdiff_transform(kernel)
    (tsum,) = _tdiff_sums(dists, [tf], jobs=jobs)
    return GramMatrix(_assemble_estimated(kernel, dists, tsum), "estimated", kernel)


def gram_estimated_batch(sample, kernels, jobs: int = 1) -> list[GramMatrix]:
    """Estimated Grams for several kernels over one pass of the data.

    Kernels whose |x-y| term coincides (the two mg variants, for instance)
    share the expensive double sum.
    """
    dists = _check_empirical(sample)
    records = [DistributionRecord(d) for d in dists]
    resolved = [k.resolved(records) for k in kernels]
    keys, transforms, owner = [], [], []
    for k in resolved:
        key = ("exp_half",) if k.family == "mg" else (k.family, k.sigma, k.alpha)
        if key not in keys:
            keys.append(key)
            transforms.append(_tdiff_transform(k)[0])
        owner.append(keys.index(key))
    sums = _tdiff_sums(dists, transforms, jobs=jobs)
    return [
        GramMatrix(_assemble_estimated(k, dists, sums[owner[idx]]), "estimated", k)
        for idx, k in enumerate(resolved)
    ]


# ---------------------------------------------------------------------------
# Distances in the embedding space.


def mmd_squared(g: GramMatrix, i: int, l: int) -> float:
    """Raw squared MMD between records i and l (may be negative in estimated mode)."""
    k = g.values
    n = g.n
    if not (0 <= i < n and 0 <= l < n):
        raise InputError(f"index out of range for n={n}: ({i}, {l})")
    return float(k[i, i] + k[l, l] - 2.0 * k[i, l])


def mmd_dist(g: GramMatrix, i: int, l: int) -> float:
    """MMD distance; negative squared values are clamped to zero."""
    return float(np.sqrt(max(mmd_squared(g, i, l), 0.0)))


def mmd_matrix(g: GramMatrix) -> np.ndarray:
    """All pairwise MMD distances (clamped), zero diagonal."""
    d = np.diag(g.values)
    sq = d[:, None] + d[None, :] - 2.0 * g.values
    np.maximum(sq, 0.0, out=sq)
    np.fill_diagonal(sq, 0.0)
    return np.sqrt(sq)


def dist_sq_to_centroid(g: GramMatrix, i: int, members) -> float:
    """Squared distance from record i to the mean embedding of ``members``.

    Expands to K_ii - (2/|C|) sum_l K_il + (1/|C|^2) sum_lm K_lm; clamped
    at zero so estimated-mode Grams still yield a usable objective.
    """
    members = np.asarray(list(members), dtype=int)
    if members.size == 0:
        raise InputError("centroid of an empty member set is undefined")
    k = g.values
    val = (
        k[i, i]
        - 2.0 * k[i, members].mean()
        + k[np.ix_(members, members)].mean()
    )
    return float(max(val, 0.0))


def centroid_dist_sq_all(values: np.ndarray, assign: np.ndarray, n_clusters: int) -> np.ndarray:
    """Squared distances of every record to every cluster-mean embedding.

    ``values`` is the raw Gram array; clusters are given by an assignment
    vector. Returns an (n, K) array, clamped at zero. Empty clusters get
    +inf columns so callers can detect them.
    """
    n = values.shape[0]
    onehot = np.zeros((n, n_clusters))
    onehot[np.arange(n), assign] = 1.0
    counts = onehot.sum(axis=0)
    out = np.full((n, n_clusters), np.inf)
    alive = counts > 0
    cross = values @ onehot[:, alive]  # (n, K_alive)
    cross /= counts[alive]
    within = np.einsum("ij,ik,jk->k", values, onehot[:, alive], onehot[:, alive], optimize=True)
    within /= counts[alive] ** 2
    out[:, alive] = np.diag(values)[:, None] - 2.0 * cross + within[None, :]
    np.maximum(out, 0.0, out=out)
    return out


def total_scatter(g: GramMatrix) -> float:
    """WCSS of the single-cluster partition: sum K_ii - (1/n) sum_il K_il."""
    return float(np.trace(g.values) - g.values.sum() / g.n)
