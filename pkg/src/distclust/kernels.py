"""Kernel families on R^p and bandwidth selection for distributional samples.

Four families are supported:

* ``gaussian``   exp(-||x - y||^2 / (2 sigma^2)),        sigma > 0
* ``laplace``    exp(-||x - y|| / sigma),                sigma > 0
* ``mg``         exp(-||x - y||^2 / 2) + ||x||^a ||y||^a, alpha >= 1
* ``energy``     ||x||^(2a) + ||y||^(2a) - ||x - y||^(2a), 0 < alpha < 1

The energy kernel is scaled so that for alpha = 0.5 the squared RKHS
distance between two univariate distributions equals twice the squared
L2 distance between their distribution functions.

``sigma`` may be the string ``"auto"``, meaning: resolve it at run time as
the median of the per-distribution standard deviations of the sample
(see :func:`select_sigma_star`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError

FAMILIES = ("gaussian", "laplace", "mg", "energy")

# Tags used by the binary matrix container.
FAMILY_TAGS = {"gaussian": 0, "laplace": 1, "mg": 2, "energy": 3}
TAG_FAMILIES = {v: k for k, v in FAMILY_TAGS.items()}


@dataclass(frozen=True)
class KernelSpec:
    """Tagged choice of kernel family plus its tuning parameter.

    ``sigma`` is used by gaussian/laplace (may be "auto"); ``alpha`` is used
    by mg (alpha >= 1) and energy (0 < alpha < 1).
    """

    family: str
    sigma: float | str | None = None
    alpha: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown kernel family {self.family!r}")
        if self.family in ("gaussian", "laplace"):
            if self.sigma == "auto":
                return
            if self.sigma is None or not np.isfinite(self.sigma) or self.sigma <= 0:
                raise ConfigError(
                    f"{self.family} kernel needs sigma > 0 or 'auto', got {self.sigma!r}"
                )
        elif self.family == "mg":
            if self.alpha is None or not np.isfinite(self.alpha) or self.alpha < 1:
                raise ConfigError(f"mg kernel needs alpha >= 1, got {self.alpha!r}")
        else:  # energy
            if self.alpha is None or not (0 < self.alpha < 1):
                raise ConfigError(f"energy kernel needs 0 < alpha < 1, got {self.alpha!r}")

    @property
    def is_auto(self) -> bool:
        return self.sigma == "auto"

    def resolved(self, sample) -> "KernelSpec":
        """Return a concrete spec, computing sigma* from ``sample`` if needed."""
        if not self.is_auto:
            return self
        return KernelSpec(self.family, sigma=select_sigma_star(sample))

    def label(self) -> str:
        if self.family in ("gaussian", "laplace"):
            s = "auto" if self.is_auto else f"{self.sigma:g}"
            return f"{self.family}:{s}"
        return f"{self.family}:{self.alpha:g}"

    def to_json(self) -> dict:
        d = {"family": self.family}
        if self.family in ("gaussian", "laplace"):
            d["sigma"] = self.sigma
        else:
            d["alpha"] = self.alpha
        return d

    @classmethod
    def from_json(cls, d: dict) -> "KernelSpec":
        if not isinstance(d, dict) or "family" not in d:
            raise ConfigError(f"malformed kernel spec {d!r}")
        return cls(d["family"], sigma=d.get("sigma"), alpha=d.get("alpha"))


def _check_concrete(spec: KernelSpec):
    if spec.is_auto:
        raise ConfigError("sigma='auto' must be resolved against a sample before evaluation")


def eval_kernel(spec: KernelSpec, x, y) -> float:
    """Evaluate k(x, y) for two points of R^p."""
    _check_concrete(spec)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.ndim != 1 or y.ndim != 1 or x.shape != y.shape:
        raise InputError(f"point dimension mismatch: {x.shape} vs {y.shape}")
    if spec.family == "gaussian":
        d2 = float(np.dot(x - y, x - y))
        return float(np.exp(-d2 / (2.0 * spec.sigma**2)))
    if spec.family == "laplace":
        d = float(np.linalg.norm(x - y))
        return float(np.exp(-d / spec.sigma))
    if spec.family == "mg":
        d2 = float(np.dot(x - y, x - y))
        nx = float(np.linalg.norm(x))
        ny = float(np.linalg.norm(y))
        return float(np.exp(-d2 / 2.0) + nx**spec.alpha * ny**spec.alpha)
    # energy
    a2 = 2.0 * spec.alpha
    nx = float(np.linalg.norm(x))
    ny = float(np.linalg.norm(y))
    d = float(np.linalg.norm(x - y))
    return nx**a2 + ny**a2 - d**a2


def _sqdist(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances between rows, clipped at 0."""
    x2 = np.einsum("ij,ij->i", X, X)
    y2 = np.einsum("ij,ij->i", Y, Y)
    d2 = x2[:, None] + y2[None, :]
    d2 -= 2.0 * (X @ Y.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _pow_dist(d2: np.ndarray, two_alpha: float) -> np.ndarray:
    """||x-y||^(2 alpha) from squared distances, using sqrt chains when cheap."""
    if two_alpha == 1.0:
        return np.sqrt(d2)
    if two_alpha == 0.5:
        return np.sqrt(np.sqrt(d2))
    if two_alpha == 1.5:
        d = np.sqrt(d2)
        return d * np.sqrt(d)
    if two_alpha == 2.0:
        return d2
    return d2 ** (two_alpha / 2.0)


def kernel_matrix(spec: KernelSpec, X, Y) -> np.ndarray:
    """Evaluate k on all row pairs of two point sets, shape (len(X), len(Y))."""
    _check_concrete(spec)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise InputError(f"point dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    if spec.family == "gaussian":
        d2 = _sqdist(X, Y)
        d2 *= -1.0 / (2.0 * spec.sigma**2)
        return np.exp(d2, out=d2)
    if spec.family == "laplace":
        d = np.sqrt(_sqdist(X, Y))
        d *= -1.0 / spec.sigma
        return np.exp(d, out=d)
    if spec.family == "mg":
        d2 = _sqdist(X, Y)
        d2 *= -0.5
        out = np.exp(d2, out=d2)
        nx = np.linalg.norm(X, axis=1) ** spec.alpha
        ny = np.linalg.norm(Y, axis=1) ** spec.alpha
        out += nx[:, None] * ny[None, :]
        return out
    # energy
    a2 = 2.0 * spec.alpha
    out = _pow_dist(_sqdist(X, Y), a2)
    out *= -1.0
    nx = np.linalg.norm(X, axis=1) ** a2
    ny = np.linalg.norm(Y, axis=1) ** a2
    out += nx[:, None]
    out += ny[None, :]
    return out


def dispersion(record) -> float:
    """Per-distribution standard deviation: sqrt of the covariance trace.

    Reduces to the ordinary standard deviation for univariate records.
    Empirical records need at least two observations.
    """
    from .distributions import moments

    _, cov = moments(record)
    return float(np.sqrt(np.trace(np.atleast_2d(cov))))


def select_sigma_star(sample) -> float:
    """Median of the per-distribution standard deviations of a sample.

    The median of an even-length list is the midpoint of the two central
    order statistics.
    """
    if len(sample) == 0:
        raise InputError("cannot select sigma* from an empty sample")
    return float(np.median([dispersion(r) for r in sample]))
