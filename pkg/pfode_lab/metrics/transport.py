"""Empirical 2-Wasserstein distances between equal-size sample sets."""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from pfode_lab.engine import rng
from pfode_lab.errors import DomainError, TransportSizeError

ASSIGNMENT_CAP = 4096


class TransportMethod(Enum):
    QUANTILE_1D = "quantile1d"
    ASSIGNMENT = "assignment"


@dataclass(frozen=True)
class TransportReport:
    w2: float
    n: int
    method: TransportMethod
    ci_halfwidth: Optional[float] = None

    def to_dict(self) -> dict:
        return {"w2": self.w2, "n": self.n, "method": self.method.value, "ci_halfwidth": self.ci_halfwidth}


def _as_samples(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DomainError(f"samples must be a vector or a (n, dim) matrix, got shape {a.shape}")
    return a


def _check_pair(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise DomainError(f"sample sets must have equal shapes, got {a.shape} and {b.shape}")
    if a.shape[0] == 0:
        raise DomainError("sample sets must be non-empty")


def w2_1d(a, b) -> TransportReport:
    """Exact W₂ in one dimension: pair the order statistics."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    _check_pair(a, b)
    diff = np.sort(a) - np.sort(b)
    return TransportReport(float(np.sqrt(np.mean(diff * diff))), len(a), TransportMethod.QUANTILE_1D)


def w2_assignment(a, b, cap: int = ASSIGNMENT_CAP) -> TransportReport:
    """Exact W₂ between empirical measures via minimum-cost perfect matching."""
    a, b = _as_samples(a), _as_samples(b)
    _check_pair(a, b)
    if a.shape[0] > cap:
        raise TransportSizeError(f"assignment W2 limited to {cap} samples, got {a.shape[0]}; subsample first")
    cost = cdist(a, b, metric="sqeuclidean")
    rows, cols = linear_sum_assignment(cost)
    return TransportReport(float(np.sqrt(cost[rows, cols].mean())), a.shape[0], TransportMethod.ASSIGNMENT)


def w2(a, b, cap: int = ASSIGNMENT_CAP) -> TransportReport:
    """Quantile W₂ for 1-D samples, assignment otherwise."""
    a, b = _as_samples(a), _as_samples(b)
    if a.shape[1] == 1:
        return w2_1d(a[:, 0], b[:, 0])
    return w2_assignment(a, b, cap)


def bootstrap_ci(a, b, resamples: int = 200, seed: int = 0, level: float = 0.95, cap: int = ASSIGNMENT_CAP) -> TransportReport:
    """W₂ with a bootstrap confidence half-width over independent resamples of both sets."""
    a, b = _as_samples(a), _as_samples(b)
    base = w2(a, b, cap)
    gen = rng.stream(seed, "bootstrap")
    n = a.shape[0]
    draws = np.empty(resamples)
    for i in range(resamples):
        ia = gen.integers(0, n, n)
        ib = gen.integers(0, n, n)
        draws[i] = w2(a[ia], b[ib], cap).w2
    lo, hi = np.quantile(draws, [(1.0 - level) / 2.0, (1.0 + level) / 2.0])
    return TransportReport(base.w2, base.n, base.method, float(hi - lo) / 2.0)
