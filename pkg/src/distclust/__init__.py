"""Clustering samples of probability distributions.

Distributions are embedded in the reproducing kernel Hilbert space of a
chosen kernel; K-means then runs under the maximum mean discrepancy using
only the Gram matrix of pairwise inner products. A univariate Wasserstein
baseline, internal/external cluster validation, synthetic-data generators,
and a SAR-image feature extractor complete the pipeline.
"""

from .distributions import (DistributionRecord, EmpiricalDistribution, UniformMixture,
                            mixture_cdf, mixture_quantile, moments, sample_mixture)
from .errors import (ConfigError, DistclustError, GenerationError, InputError,
                     ReplicationFailure)
from .gram import (GramMatrix, dist_sq_to_centroid, gram_estimated, gram_exact,
                   mmd_dist, mmd_matrix, mmd_squared)
from .kernels import KernelSpec, eval_kernel, select_sigma_star
from .kmeans import Partition, kernel_kmeans, wasserstein_kmeans
from .pearson import PearsonDistribution, PearsonParams, classify_pearson_type
from .validity import (GramGeometry, WassersteinGeometry, accuracy,
                       adjusted_rand_index, calinski_harabasz, davies_bouldin_star,
                       select_k, silhouette)
from .wasserstein import wasserstein, wasserstein_to_mixture_mean

__version__ = "0.1.0"
