"""Sample-quality metrics: MMD, assignment Wasserstein distance, mode statistics."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist, pdist

from .errors import ValidationError

MEDIAN_POOL_CAP = 4000
WASSERSTEIN_CAP = 2000


def _as_2d(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValidationError(f"{name} must be an (n, d) array")
    return a


def median_bandwidth_distance(X, Y, rng: Optional[np.random.Generator] = None,
                              cap: int = MEDIAN_POOL_CAP) -> float:
    """Lower median of all pairwise distances within the pooled set ``X u Y``.

    Pools larger than ``cap`` points are uniformly subsampled first (using
    ``rng``, seeded 0 when omitted) to keep the pair count bounded.
    """
    Z = np.concatenate([_as_2d(X, "X"), _as_2d(Y, "Y")])
    if len(Z) > cap:
        rng = np.random.default_rng(0) if rng is None else rng
        Z = Z[np.sort(rng.choice(len(Z), cap, replace=False))]
    dist = pdist(Z)
    kth = (len(dist) - 1) // 2
    return float(np.partition(dist, kth)[kth])


def _kernel_mean(A: np.ndarray, B: np.ndarray, a: float, chunk: int = 2048) -> float:
    total = 0.0
    for i in range(0, len(A), chunk):
        total += np.exp(-a * cdist(A[i:i + chunk], B, "sqeuclidean")).sum()
    return total / (len(A) * len(B))


def mmd(X, Y, rng: Optional[np.random.Generator] = None) -> float:
    """Biased (V-statistic) squared MMD with a Gaussian kernel ``exp(-|x-y|^2 / g^2)``.

    ``g`` is one tenth of the pooled median pairwise distance.  Tiny negative
    round-off is clamped to 0.
    """
    X, Y = _as_2d(X, "X"), _as_2d(Y, "Y")
    if len(X) < 2 or len(Y) < 2:
        raise ValidationError("mmd needs at least two points in each set")
    if X.shape[1] != Y.shape[1]:
        raise ValidationError("mmd: dimension mismatch")
    med = median_bandwidth_distance(X, Y, rng)
    if not med > 0:
        raise ValidationError("mmd: invalid bandwidth (median pairwise distance is 0)")
    a = 1.0 / (0.1 * med) ** 2
    val = _kernel_mean(X, X, a) + _kernel_mean(Y, Y, a) - 2.0 * _kernel_mean(X, Y, a)
    return max(val, 0.0)


def wasserstein(X, Y) -> float:
    """Mean Euclidean cost of the optimal one-to-one assignment between equal-size sets."""
    X, Y = _as_2d(X, "X"), _as_2d(Y, "Y")
    if X.shape != Y.shape:
        raise ValidationError(f"wasserstein: size mismatch {X.shape} vs {Y.shape}")
    if len(X) == 0:
        return 0.0
    cost = cdist(X, Y)
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].mean())


def subsample_pair(X, Y, rng: np.random.Generator, cap: int = WASSERSTEIN_CAP):
    """Uniformly subsample so both sets have ``min(len(X), len(Y), cap)`` rows."""
    X, Y = _as_2d(X, "X"), _as_2d(Y, "Y")
    n = min(len(X), len(Y), cap)
    if len(X) > n:
        X = X[np.sort(rng.choice(len(X), n, replace=False))]
    if len(Y) > n:
        Y = Y[np.sort(rng.choice(len(Y), n, replace=False))]
    return X, Y


def nearest_center(samples, centers) -> np.ndarray:
    return cdist(_as_2d(samples, "samples"), _as_2d(centers, "centers"), "sqeuclidean").argmin(1)


def mode_weight_mse(samples, centers, true_weights) -> float:
    """Mean squared error between nearest-center occupancy and the true weights."""
    centers = _as_2d(centers, "centers")
    w = np.asarray(true_weights, dtype=np.float64)
    if len(centers) < 1 or len(centers) != len(w):
        raise ValidationError("mode_weight_mse: need one weight per center")
    samples = _as_2d(samples, "samples")
    if len(samples) == 0:
        return float(np.mean(w ** 2))
    counts = np.bincount(nearest_center(samples, centers), minlength=len(centers))
    return float(np.mean((counts / len(samples) - w) ** 2))


def modes_explored(samples, centers, radius: float = 3.0, min_fraction: float = 0.1) -> int:
    """Centers with at least ``max(1, ceil(min_fraction * n / M))`` samples within ``radius``."""
    if not radius > 0:
        raise ValidationError("modes_explored: radius must be positive")
    centers = _as_2d(centers, "centers")
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        return 0
    samples = _as_2d(samples, "samples")
    need = max(1, math.ceil(min_fraction * len(samples) / len(centers)))
    hits = (cdist(samples, centers) <= radius).sum(0)
    return int((hits >= need).sum())


def variance_mse(samples, abs_dims: Sequence[int], true_vars) -> float:
    """``mean_d (s_d^2 - sigma_d^2)^2`` after folding the ``abs_dims`` columns through ``|.|``."""
    X = _as_2d(samples, "samples").copy()
    if len(X) < 2:
        raise ValidationError("variance_mse needs at least two samples")
    abs_dims = list(abs_dims)
    if any(i < 0 or i >= X.shape[1] for i in abs_dims):
        raise ValidationError("variance_mse: abs_dims out of range")
    X[:, abs_dims] = np.abs(X[:, abs_dims])
    est = X.var(axis=0, ddof=1)
    true = np.broadcast_to(np.asarray(true_vars, dtype=np.float64), est.shape)
    return float(np.mean((est - true) ** 2))


REPORT_FIELDS = ("mmd", "wasserstein", "mode_weight_mse", "modes_explored", "variance_mse", "n_x", "n_y", "seed")


@dataclass
class MetricsReport:
    mmd: float
    wasserstein: float
    n_x: int
    n_y: int
    seed: int
    mode_weight_mse: Optional[float] = None
    modes_explored: Optional[int] = None
    variance_mse: Optional[float] = None

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in REPORT_FIELDS}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def evaluate(samples, reference, seed: int = 0, centers=None, weights=None, radius: float = 3.0,
             min_fraction: float = 0.1, abs_dims=None, true_vars=None,
             wasserstein_cap: int = WASSERSTEIN_CAP) -> MetricsReport:
    """All applicable metrics for one sample set against a reference set."""
    X, Y = _as_2d(samples, "samples"), _as_2d(reference, "reference")
    if X.shape[1] != Y.shape[1]:
        raise ValidationError(f"dimension mismatch: samples have {X.shape[1]} columns, reference {Y.shape[1]}")
    rng = np.random.default_rng(seed)
    report = MetricsReport(
        mmd=mmd(X, Y, rng),
        wasserstein=wasserstein(*subsample_pair(X, Y, rng, wasserstein_cap)),
        n_x=len(X), n_y=len(Y), seed=int(seed),
    )
    if centers is not None:
        report.modes_explored = modes_explored(X, centers, radius, min_fraction)
        if weights is not None:
            report.mode_weight_mse = mode_weight_mse(X, centers, weights)
    if abs_dims is not None and true_vars is not None:
        report.variance_mse = variance_mse(X, abs_dims, true_vars)
    return report
