"""Hill tail-index estimation, Hill-plot series and the 5% threshold rule."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

__all__ = ["HillResult", "hill_estimator", "hill_plot", "default_threshold_k", "HILL_COLUMNS"]

HILL_COLUMNS = ("k", "threshold", "alpha_hat", "ci_low", "ci_high")
Z975 = float(stats.norm.ppf(0.975))


@dataclass(frozen=True)
class HillResult:
    k: int
    alpha_hat: float
    ci_low: float
    ci_high: float
    threshold: float

    def row(self) -> tuple:
        return (self.k, self.threshold, self.alpha_hat, self.ci_low, self.ci_high)

    def to_dict(self) -> dict:
        return asdict(self)


def _sorted_sample(sample) -> np.ndarray:
    x = np.sort(np.asarray(sample, dtype=float).ravel(), kind="stable")
    if x.size < 3:
        raise ValueError("Hill estimation needs at least 3 observations")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    return x


def _hill_from_sorted(x: np.ndarray, logs: np.ndarray, k: int) -> HillResult:
    n = x.size
    if not 2 <= k < n:
        raise ValueError(f"need 2 <= k < n, got k={k}, n={n}")
    if x[n - k - 1] <= 0:
        raise ValueError("the top k+1 order statistics must be strictly positive")
    top = logs[n - k :]
    gamma = float(np.mean(top - logs[n - k - 1]))
    if gamma <= 0:
        raise ValueError("top order statistics are all tied with the threshold")
    alpha = 1.0 / gamma
    half = Z975 / math.sqrt(k)
    return HillResult(k, alpha, alpha * (1.0 - half), alpha * (1.0 + half), float(x[n - k - 1]))


def hill_estimator(sample, k: int) -> HillResult:
    """Hill estimate from the top ``k`` order statistics.

    ``alpha_hat`` is the reciprocal mean log-excess over ``X_(n-k)``; the 95%
    interval is ``alpha_hat * (1 ± z_0.975 / sqrt(k))``.
    """
    x = _sorted_sample(sample)
    k = int(k)
    if not 2 <= k < x.size:
        raise ValueError(f"need 2 <= k < n, got k={k}, n={x.size}")
    if x[x.size - k - 1] <= 0:
        raise ValueError("the top k+1 order statistics must be strictly positive")
    logs = np.full(x.size, -np.inf)
    pos = x > 0
    logs[pos] = np.log(x[pos])
    return _hill_from_sorted(x, logs, k)


def hill_plot(sample, k_min: int, k_max: int) -> list[HillResult]:
    """One ``HillResult`` per ``k`` in ``[k_min, k_max]``."""
    x = _sorted_sample(sample)
    n = x.size
    if not (2 <= k_min <= k_max < n):
        raise ValueError(f"need 2 <= k_min <= k_max < n, got {k_min}, {k_max}, n={n}")
    if x[n - k_max - 1] <= 0:
        raise ValueError("the top k_max+1 order statistics must be strictly positive")
    logs = np.full(n, -np.inf)
    pos = x > 0
    logs[pos] = np.log(x[pos])
    return [_hill_from_sorted(x, logs, k) for k in range(k_min, k_max + 1)]


def default_threshold_k(sample_or_n) -> int:
    """``ceil(0.05 n)``; accepts a sample or its size, requires ``n >= 40``."""
    n = int(sample_or_n) if np.ndim(sample_or_n) == 0 else int(np.asarray(sample_or_n).size)
    if n < 40:
        raise ValueError(f"the 5% rule needs n >= 40 (got n={n})")
    # exact integer ceiling of n/20
    return -(-n // 20)
