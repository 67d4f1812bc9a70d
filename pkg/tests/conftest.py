"""Shared fixtures and independent oracles used across the test suite."""

import itertools

import numpy as np
import pytest

from distclust.distributions import DistributionRecord, UniformMixture, mixture_cdf, uniform
from distclust.gram import GramMatrix, gram_exact
from distclust.kernels import KernelSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)


def random_mixture(rng, max_components=3, lo=-5.0, hi=5.0, max_width=6.0) -> UniformMixture:
    ncomp = int(rng.integers(1, max_components + 1))
    w = rng.random(ncomp)
    w /= w.sum()
    comps = []
    for i in range(ncomp):
        a = rng.uniform(lo, hi)
        b = a + rng.uniform(0.1, max_width)
        comps.append((w[i], a, b))
    return UniformMixture(tuple(comps))


def cdf_l2_squared(m1: UniformMixture, m2: UniformMixture) -> float:
    """Exact integral of (F1 - F2)^2 dt by per-segment Simpson.

    Both CDFs are piecewise linear, so the integrand is piecewise quadratic
    and Simpson's rule is exact on each segment between breakpoints.
    """
    bps = np.unique(np.concatenate([m1.lows, m1.highs, m2.lows, m2.highs]))
    total = 0.0
    for a, b in zip(bps[:-1], bps[1:]):
        xs = np.array([a, 0.5 * (a + b), b])
        d = (np.asarray(mixture_cdf(m1, xs)) - np.asarray(mixture_cdf(m2, xs))) ** 2
        total += (b - a) / 6.0 * (d[0] + 4.0 * d[1] + d[2])
    return float(total)


def centroid_dist_sq_bruteforce(values: np.ndarray, i: int, members) -> float:
    """Triple-loop expansion of || mu_i - mean(mu_members) ||^2."""
    members = list(members)
    c = len(members)
    acc = values[i, i]
    for l in members:
        acc -= 2.0 / c * values[i, l]
    for l in members:
        for m in members:
            acc += values[l, m] / c**2
    return float(acc)


def all_assignments(n: int, k: int):
    """Every surjective assignment of n items to k labeled clusters."""
    for assign in itertools.product(range(k), repeat=n):
        if len(set(assign)) == k:
            yield np.asarray(assign)


def brute_force_best_wcss(values: np.ndarray, k: int) -> float:
    from distclust.gram import centroid_dist_sq_all

    n = values.shape[0]
    best = np.inf
    for assign in all_assignments(n, k):
        d = centroid_dist_sq_all(values, assign, k)
        wcss = float(d[np.arange(n), assign].sum())
        best = min(best, wcss)
    return best


def pair_counting_ari(a, b) -> float:
    """ARI by explicit enumeration of all item pairs."""
    a = np.asarray(a)
    b = np.asarray(b)
    n = len(a)
    ss = sd = ds = dd = 0
    for i in range(n):
        for j in range(i + 1, n):
            same_a = a[i] == a[j]
            same_b = b[i] == b[j]
            if same_a and same_b:
                ss += 1
            elif same_a:
                sd += 1
            elif same_b:
                ds += 1
            else:
                dd += 1
    total = ss + sd + ds + dd
    expected = (ss + sd) * (ss + ds) / total
    maxi = 0.5 * ((ss + sd) + (ss + ds))
    if maxi == expected:
        return 0.0
    return (ss - expected) / (maxi - expected)


def two_group_records(rng, spread=0.25, per_group=5):
    """Well-separated toy set: unit-width uniforms near 0 and near 10."""
    records = []
    for _ in range(per_group):
        c = rng.normal(0.0, spread)
        records.append(DistributionRecord(uniform(c, c + 1.0), label="low"))
    for _ in range(per_group):
        c = rng.normal(10.0, spread)
        records.append(DistributionRecord(uniform(c, c + 1.0), label="high"))
    return records


def two_group_gram(rng, **kwargs) -> tuple[GramMatrix, list]:
    records = two_group_records(rng, **kwargs)
    return gram_exact(records, KernelSpec("gaussian", sigma=1.0)), records
