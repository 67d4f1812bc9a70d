"""Seeded generators for the Monte Carlo experiments.

Three model families:

* a univariate two-class model of uniform mixtures controlled by a merging
  parameter lambda in [0, 1] (class 2 interpolates towards class 1 as
  lambda grows), with two preset variations that move the second class;
* a bivariate three-class model whose per-object Pearson marginals are
  drawn from preset normal hyperpriors, components independent;
* a bivariate two-class model where both classes share the marginal
  hyperpriors and differ only through a Gaussian copula correlation of
  +0.9 versus -0.9.

Every generator is a pure function of (config, generator state).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .distributions import DistributionRecord, EmpiricalDistribution, mix, uniform
from .errors import GenerationError, InputError
from .pearson import PearsonDistribution, PearsonParams, sample_pearson

__all__ = [
    "UnivariateModelConfig", "BivariateModelConfig", "PearsonParams",
    "sample_pearson", "generate_univariate", "generate_bivariate_independent",
    "generate_bivariate_dependent", "TABLE_INDEPENDENT", "TABLE_DEPENDENT",
    "UNIVARIATE_VARIATIONS",
]

# Preset (C0, D0) overrides for the univariate model.
UNIVARIATE_VARIATIONS = {
    "default": (805.0, 1004.0),
    "variation1": (100.0, 600.0),
    "variation2": (200.0, 600.0),
}


@dataclass(frozen=True)
class UnivariateModelConfig:
    """Two balanced classes of uniform mixtures with merging parameter lambda."""

    merge_lambda: float
    n: int = 100
    c0: float = 805.0
    d0: float = 1004.0

    def __post_init__(self):
        if not 0.0 <= self.merge_lambda <= 1.0:
            raise InputError(f"lambda must lie in [0, 1], got {self.merge_lambda}")
        if self.n < 2 or self.n % 2:
            raise InputError(f"n must be even and >= 2, got {self.n}")

    @classmethod
    def variation(cls, name: str, merge_lambda: float, n: int = 100) -> "UnivariateModelConfig":
        if name not in UNIVARIATE_VARIATIONS:
            raise InputError(f"unknown variation {name!r}")
        c0, d0 = UNIVARIATE_VARIATIONS[name]
        return cls(merge_lambda, n=n, c0=c0, d0=d0)


def generate_univariate(config: UnivariateModelConfig,
                        rng: np.random.Generator) -> list[DistributionRecord]:
    """One replication of the univariate model.

    Four offsets are drawn once from U(0, 4) and shared by all mixtures of
    the replication. For i = 1..n/2, class 1 is U(4(i-1)+l1, 195+5i+l2) and
    class 2 mixes that with U(C0-5i-l3, D0-4i-l4) using weight lambda on
    the class-1 component.
    """
    l1, l2, l3, l4 = rng.uniform(0.0, 4.0, size=4)
    lam = config.merge_lambda
    records = []
    half = config.n // 2
    first, second = [], []
    for i in range(1, half + 1):
        a, b = 4.0 * (i - 1) + l1, 195.0 + 5.0 * i + l2
        c, d = config.c0 - 5.0 * i - l3, config.d0 - 4.0 * i - l4
        if not a < b:
            raise GenerationError(f"class-1 interval empty at i={i}: [{a}, {b}]", index=i)
        if not c < d:
            raise GenerationError(f"class-2 interval empty at i={i}: [{c}, {d}]", index=i)
        first.append(uniform(a, b))
        second.append(mix((lam, uniform(a, b)), (1.0 - lam, uniform(c, d))))
    for m in first:
        records.append(DistributionRecord(m, label="class1"))
    for m in second:
        records.append(DistributionRecord(m, label="class2"))
    return records


# ---------------------------------------------------------------------------
# Bivariate Pearson models.


@dataclass(frozen=True)
class ParameterPrior:
    """Normal hyperpriors (center, sd) for the four Pearson moments of one variable."""

    mean: tuple[float, float]
    std_dev: tuple[float, float]
    skewness: tuple[float, float]
    kurtosis: tuple[float, float]

    def draw(self, rng: np.random.Generator) -> PearsonParams:
        return PearsonParams(
            mean=rng.normal(*self.mean),
            std_dev=rng.normal(*self.std_dev),
            skewness=rng.normal(*self.skewness),
            kurtosis=rng.normal(*self.kurtosis),
        )


# Hyperpriors of the independent-component model: three clusters, two variables.
TABLE_INDEPENDENT = (
    (ParameterPrior((-4.8, 6.0), (12.0, 1.2), (-0.05, 0.1), (3.10, 0.1)),
     ParameterPrior((17.0, 12.0), (6.0, 0.6), (0.00, 0.1), (2.95, 0.1))),
    (ParameterPrior((-4.8, 6.0), (9.0, 1.2), (0.00, 0.1), (3.00, 0.1)),
     ParameterPrior((-17.0, 12.0), (4.6, 0.6), (0.00, 0.1), (3.00, 0.1))),
    (ParameterPrior((10.0, 6.0), (6.0, 1.2), (0.10, 0.1), (2.95, 0.1)),
     ParameterPrior((0.0, 12.0), (3.3, 0.6), (-0.1, 0.1), (3.10, 0.1))),
)

# Hyperpriors of the dependence model: both clusters share the marginals.
TABLE_DEPENDENT = (
    (ParameterPrior((-4.8, 0.5), (12.0, 1.2), (-0.05, 0.1), (3.10, 0.1)),
     ParameterPrior((17.0, 1.0), (6.0, 0.6), (0.00, 0.1), (2.95, 0.1))),
    (ParameterPrior((-4.8, 0.5), (12.0, 1.2), (-0.05, 0.1), (3.10, 0.1)),
     ParameterPrior((17.0, 1.0), (6.0, 0.6), (0.00, 0.1), (2.95, 0.1))),
)


@dataclass(frozen=True)
class BivariateModelConfig:
    """Bivariate Pearson model: per-cluster hyperpriors plus optional copula."""

    cluster_priors: tuple = TABLE_INDEPENDENT
    correlation: float | None = None  # +rho for cluster 1, -rho for cluster 2
    n_per_cluster: int = 50
    n_obs: int = 1000
    max_redraws: int = 100

    def __post_init__(self):
        if self.correlation is not None and not abs(self.correlation) < 1:
            raise InputError(f"|correlation| must be < 1, got {self.correlation}")
        if self.n_per_cluster < 1 or self.n_obs < 2:
            raise InputError("need n_per_cluster >= 1 and n_obs >= 2")

    @classmethod
    def independent(cls, n_per_cluster: int = 50, n_obs: int = 1000) -> "BivariateModelConfig":
        return cls(TABLE_INDEPENDENT, None, n_per_cluster, n_obs)

    @classmethod
    def dependent(cls, rho: float = 0.9, n_per_cluster: int = 50,
                  n_obs: int = 1000) -> "BivariateModelConfig":
        return cls(TABLE_DEPENDENT, rho, n_per_cluster, n_obs)


def _draw_marginals(priors, rng, max_redraws, where):
    """Draw feasible Pearson members for every variable, redrawing on failure."""
    members = []
    for var_idx, prior in enumerate(priors):
        for attempt in range(max_redraws + 1):
            try:
                members.append(PearsonDistribution(prior.draw(rng)))
                break
            except InputError:
                if attempt == max_redraws:
                    raise GenerationError(
                        f"no feasible Pearson parameters after {max_redraws} redraws "
                        f"({where}, variable {var_idx + 1})", index=where)
    return members


def generate_bivariate_independent(config: BivariateModelConfig,
                                   rng: np.random.Generator) -> list[DistributionRecord]:
    """Labeled empirical records with independent Pearson components."""
    records = []
    for j, priors in enumerate(config.cluster_priors, start=1):
        for obj in range(config.n_per_cluster):
            members = _draw_marginals(priors, rng, config.max_redraws,
                                      where=f"cluster {j} object {obj}")
            cols = [m.rvs(config.n_obs, rng) for m in members]
            records.append(DistributionRecord(
                EmpiricalDistribution(np.column_stack(cols)), label=f"cluster{j}"))
    return records


def generate_bivariate_dependent(config: BivariateModelConfig,
                                 rng: np.random.Generator) -> list[DistributionRecord]:
    """Labeled empirical records coupled by a Gaussian copula.

    Cluster 1 uses correlation +rho, cluster 2 uses -rho; the marginals are
    imposed by pushing each normal coordinate through Phi and then the
    object's Pearson quantile function.
    """
    if config.correlation is None:
        raise InputError("dependent model needs a correlation")
    rho = config.correlation
    records = []
    for j, priors in enumerate(config.cluster_priors, start=1):
        sign = 1.0 if j == 1 else -1.0
        cov = np.array([[1.0, sign * rho], [sign * rho, 1.0]])
        chol = np.linalg.cholesky(cov)
        for obj in range(config.n_per_cluster):
            members = _draw_marginals(priors, rng, config.max_redraws,
                                      where=f"cluster {j} object {obj}")
            z = rng.standard_normal((config.n_obs, len(members))) @ chol.T
            # Guard against Phi underflowing to exactly 0 or 1 in extreme tails.
            u = np.clip(ndtr(z), 1e-15, 1.0 - 1e-15)
            cols = [m.ppf(u[:, idx]) for idx, m in enumerate(members)]
            records.append(DistributionRecord(
                EmpiricalDistribution(np.column_stack(cols)), label=f"cluster{j}"))
    return records
