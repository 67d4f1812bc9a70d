import numpy as np
import pytest

from conftest import (brute_force_best_wcss, random_mixture, two_group_gram,
                      two_group_records)
from distclust.distributions import DistributionRecord, uniform
from distclust.errors import InputError
from distclust.gram import GramMatrix, gram_exact, total_scatter
from distclust.kernels import KernelSpec
from distclust.kmeans import Partition, kernel_kmeans, wasserstein_kmeans, wcss_of
from distclust.validity import accuracy

GAUSS = KernelSpec("gaussian", sigma=1.0)


def test_single_cluster_wcss_is_total_scatter(rng):
    g = gram_exact([random_mixture(rng) for _ in range(7)], GAUSS)
    part = kernel_kmeans(g, 1, restarts=3, seed=0)
    assert part.wcss == pytest.approx(total_scatter(g), abs=1e-9)


def test_all_singletons_zero_wcss(rng):
    g = gram_exact([random_mixture(rng) for _ in range(5)], GAUSS)
    part = kernel_kmeans(g, 5, restarts=5, seed=1)
    assert part.wcss == pytest.approx(0.0, abs=1e-9)
    assert sorted(part.assignments) == list(range(5))


def test_two_groups_recovered_any_seed(rng):
    g, records = two_group_gram(rng)
    truth = [r.label for r in records]
    for seed in range(5):
        part = kernel_kmeans(g, 2, restarts=10, seed=seed)
        assert accuracy(part, truth) == 1.0
        assert part.wcss == pytest.approx(brute_force_best_wcss(g.values, 2), abs=1e-9)


def test_partition_invariants(rng):
    g = gram_exact([random_mixture(rng) for _ in range(12)], GAUSS)
    part = kernel_kmeans(g, 3, restarts=8, seed=3)
    counts = np.bincount(part.assignments, minlength=3)
    assert counts.min() >= 1
    assert part.wcss == pytest.approx(wcss_of(g.values, part), abs=1e-9)
    assert part.n_iterations == len(part.wcss_trace)


def test_wcss_trace_nonincreasing(rng):
    for trial in range(10):
        g = gram_exact([random_mixture(rng) for _ in range(15)], GAUSS)
        part = kernel_kmeans(g, 3, restarts=4, seed=trial)
        trace = np.asarray(part.wcss_trace)
        assert np.all(np.diff(trace) <= 1e-9)


def test_determinism(rng):
    g = gram_exact([random_mixture(rng) for _ in range(10)], GAUSS)
    a = kernel_kmeans(g, 3, restarts=7, seed=99)
    b = kernel_kmeans(g, 3, restarts=7, seed=99)
    assert np.array_equal(a.assignments, b.assignments)
    assert a.wcss == b.wcss
    assert a.wcss_trace == b.wcss_trace


def test_restart_dominance_nested(rng):
    g = gram_exact([random_mixture(rng) for _ in range(14)], GAUSS)
    prev = np.inf
    for restarts in range(1, 9):
        part = kernel_kmeans(g, 4, restarts=restarts, seed=5)
        assert part.wcss <= prev + 1e-12
        prev = part.wcss


def test_small_instance_optimality(rng):
    hits = 0
    for trial in range(20):
        g = gram_exact([random_mixture(rng) for _ in range(6)], GAUSS)
        part = kernel_kmeans(g, 2, restarts=20, seed=trial)
        if part.wcss <= brute_force_best_wcss(g.values, 2) + 1e-9:
            hits += 1
    assert hits >= 18


def test_empty_cluster_repair_keeps_k():
    # Identical records force assignment ties; repair must keep K clusters.
    records = [uniform(0, 1)] * 6
    g = gram_exact(records, GAUSS)
    part = kernel_kmeans(g, 3, restarts=4, seed=0)
    assert len(np.unique(part.assignments)) == 3


def test_estimated_mode_accepted(rng):
    values = np.array([[1.0 - 1e-9, 1.0], [1.0, 1.0 - 1e-9]])
    g = GramMatrix(values, "estimated", GAUSS)
    part = kernel_kmeans(g, 2, restarts=2, seed=0)
    assert part.wcss >= 0.0


def test_k_out_of_range(rng):
    g = gram_exact([random_mixture(rng) for _ in range(3)], GAUSS)
    with pytest.raises(InputError):
        kernel_kmeans(g, 4, restarts=1, seed=0)
    with pytest.raises(InputError):
        kernel_kmeans(g, 0, restarts=1, seed=0)


def test_kmeanspp_initialization(rng):
    g, records = two_group_gram(rng)
    part = kernel_kmeans(g, 2, restarts=3, seed=0, init="kmeans++")
    assert accuracy(part, [r.label for r in records]) == 1.0


def test_partition_json_round_trip(rng):
    g = gram_exact([random_mixture(rng) for _ in range(6)], GAUSS)
    part = kernel_kmeans(g, 2, restarts=3, seed=11)
    clone = Partition.from_json(part.to_json())
    assert np.array_equal(clone.assignments, part.assignments)
    assert clone.wcss == part.wcss and clone.seed == part.seed


# -- Wasserstein variant -------------------------------------------------------


def test_w2_two_groups(rng):
    records = two_group_records(rng)
    truth = [r.label for r in records]
    for mode in ("quantile_mean", "mixture_mean"):
        part = wasserstein_kmeans(records, 2, restarts=5, seed=2, centroid_mode=mode)
        assert accuracy(part, truth) == 1.0


def test_w2_single_cluster_centroid_is_quantile_average(rng):
    records = [DistributionRecord(random_mixture(rng)) for _ in range(6)]
    part = wasserstein_kmeans(records, 1, restarts=1, seed=0, grid=256)
    from distclust.wasserstein import quantile_matrix
    q = quantile_matrix(records, 256)
    centroid = q.mean(axis=0)
    expected = float(np.mean((q - centroid) ** 2, axis=1).sum())
    assert part.wcss == pytest.approx(expected, rel=1e-12)


def test_w2_determinism(rng):
    records = [DistributionRecord(random_mixture(rng)) for _ in range(8)]
    a = wasserstein_kmeans(records, 2, restarts=4, seed=7)
    b = wasserstein_kmeans(records, 2, restarts=4, seed=7)
    assert np.array_equal(a.assignments, b.assignments) and a.wcss == b.wcss


def test_w2_rejects_multivariate(rng):
    from distclust.distributions import EmpiricalDistribution
    recs = [DistributionRecord(EmpiricalDistribution(rng.normal(size=(5, 2))))]
    with pytest.raises(InputError):
        wasserstein_kmeans(recs, 1, restarts=1, seed=0)


def test_w2_trace_nonincreasing(rng):
    records = [DistributionRecord(random_mixture(rng)) for _ in range(12)]
    part = wasserstein_kmeans(records, 3, restarts=4, seed=1)
    assert np.all(np.diff(np.asarray(part.wcss_trace)) <= 1e-9)
