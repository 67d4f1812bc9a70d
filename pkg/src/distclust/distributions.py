"""Distributional data: empirical samples and analytic uniform mixtures.

A distributional datum is one probability distribution, represented either
by an N x p matrix of i.i.d. observations or by a univariate mixture of
uniform components. Records are immutable; sampling mutates only the
caller-owned generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class EmpiricalDistribution:
    """i.i.d. sample from an unknown distribution, rows are observations."""

    observations: np.ndarray

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=float)
        if obs.ndim == 1:
            obs = obs[:, None]
        if obs.ndim != 2 or obs.shape[0] < 1 or obs.shape[1] < 1:
            raise InputError(f"observations must be N x p with N, p >= 1, got shape {obs.shape}")
        if not np.all(np.isfinite(obs)):
            raise InputError("observations contain non-finite values")
        obs.setflags(write=False)
        object.__setattr__(self, "observations", obs)

    @property
    def n(self) -> int:
        return self.observations.shape[0]

    @property
    def p(self) -> int:
        return self.observations.shape[1]


@dataclass(frozen=True)
class UniformMixture:
    """Univariate mixture of uniform components (weight, a, b) with a < b."""

    components: tuple

    def __post_init__(self):
        comps = tuple((float(w), float(a), float(b)) for w, a, b in self.components)
        if not comps:
            raise InputError("mixture needs at least one component")
        total = 0.0
        for w, a, b in comps:
            if not (0.0 < w <= 1.0):
                raise InputError(f"component weight {w} outside (0, 1]")
            if not a < b:
                raise InputError(f"component interval [{a}, {b}] is empty")
            total += w
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise InputError(f"component weights sum to {total}, expected 1")
        object.__setattr__(self, "components", comps)

    @property
    def weights(self) -> np.ndarray:
        return np.array([c[0] for c in self.components])

    @property
    def lows(self) -> np.ndarray:
        return np.array([c[1] for c in self.components])

    @property
    def highs(self) -> np.ndarray:
        return np.array([c[2] for c in self.components])

    @property
    def support(self) -> tuple[float, float]:
        return float(self.lows.min()), float(self.highs.max())


def uniform(a: float, b: float) -> UniformMixture:
    """Single uniform component U(a, b)."""
    return UniformMixture(((1.0, a, b),))


def mix(*weighted: tuple[float, UniformMixture]) -> UniformMixture:
    """Weighted mixture of mixtures; zero-weight parts are dropped."""
    comps = []
    for w, m in weighted:
        if w == 0.0:
            continue
        for cw, a, b in m.components:
            comps.append((w * cw, a, b))
    return UniformMixture(tuple(comps))


@dataclass(frozen=True)
class DistributionRecord:
    """One distributional datum plus an optional class label."""

    payload: EmpiricalDistribution | UniformMixture
    label: str | None = None

    @property
    def is_analytic(self) -> bool:
        return isinstance(self.payload, UniformMixture)

    @property
    def p(self) -> int:
        return 1 if self.is_analytic else self.payload.p


def as_record(obj, label=None) -> DistributionRecord:
    if isinstance(obj, DistributionRecord):
        return obj
    return DistributionRecord(obj, label=label)


def mixture_cdf(m: UniformMixture, t) -> np.ndarray | float:
    """Mixture distribution function; vectorized over ``t``."""
    t_arr = np.asarray(t, dtype=float)
    w, a, b = m.weights, m.lows, m.highs
    ramps = (t_arr[..., None] - a) / (b - a)
    np.clip(ramps, 0.0, 1.0, out=ramps)
    out = ramps @ w
    return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


def _breakpoints(m: UniformMixture):
    """Sorted unique component endpoints and the CDF evaluated there."""
    bp = np.unique(np.concatenate([m.lows, m.highs]))
    return bp, mixture_cdf(m, bp)


def mixture_quantile(m: UniformMixture, q) -> np.ndarray | float:
    """Generalized inverse F^{-1}(q) = inf{t : F(t) >= q}, vectorized over q.

    At support gaps this returns the left endpoint of the next component.
    """
    q_arr = np.asarray(q, dtype=float)
    if np.any((q_arr <= 0.0) | (q_arr >= 1.0)):
        raise InputError("quantile levels must lie strictly inside (0, 1)")
    bp, fv = _breakpoints(m)
    # First breakpoint with F >= q; interpolate on the rising segment ending there.
    idx = np.searchsorted(fv, q_arr, side="left")
    idx = np.clip(idx, 1, len(bp) - 1)
    f_lo, f_hi = fv[idx - 1], fv[idx]
    t_lo, t_hi = bp[idx - 1], bp[idx]
    out = t_lo + (q_arr - f_lo) / (f_hi - f_lo) * (t_hi - t_lo)
    return float(out) if np.isscalar(q) or q_arr.ndim == 0 else out


def sample_mixture(m: UniformMixture, n: int, rng: np.random.Generator) -> EmpiricalDistribution:
    """Draw n i.i.d. values; deterministic given the generator state."""
    if n < 1:
        raise InputError(f"sample size must be >= 1, got {n}")
    w, a, b = m.weights, m.lows, m.highs
    comp = rng.choice(len(w), size=n, p=w) if len(w) > 1 else np.zeros(n, dtype=int)
    u = rng.random(n)
    return EmpiricalDistribution(a[comp] + u * (b[comp] - a[comp]))


def mixture_moments(m: UniformMixture) -> tuple[float, float]:
    """Exact (mean, variance) of a uniform mixture."""
    w, a, b = m.weights, m.lows, m.highs
    mean = float(w @ ((a + b) / 2.0))
    second = float(w @ ((a * a + a * b + b * b) / 3.0))
    return mean, second - mean * mean


def moments(record) -> tuple[np.ndarray, np.ndarray]:
    """Mean vector and covariance matrix of a record.

    Empirical records use the unbiased (N - 1) covariance and need N >= 2;
    analytic mixtures use exact moments.
    """
    record = as_record(record)
    if record.is_analytic:
        mean, var = mixture_moments(record.payload)
        return np.array([mean]), np.array([[var]])
    obs = record.payload.observations
    if obs.shape[0] < 2:
        raise InputError("empirical moments need at least 2 observations")
    mean = obs.mean(axis=0)
    cov = np.cov(obs, rowvar=False, ddof=1).reshape(obs.shape[1], obs.shape[1])
    return mean, cov
