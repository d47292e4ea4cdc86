"""Robust one-dimensional mean estimation.

The single statistical primitive shared by every model-specific module is the
median of batch means.  Batch boundaries are fixed (contiguous), so the result
is independent of evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MixrecError


@dataclass(frozen=True)
class EstimatorConfig:
    """Knobs for the median-of-means estimator.

    ``batches`` is the number of batches B.  When built from a failure
    probability via :meth:`from_failure_prob`, B = ceil(36 ln(1/gamma)).
    """

    batches: int = 1
    failure_prob: float | None = None
    tolerance: float | None = None

    def __post_init__(self):
        if self.batches < 1:
            raise ValueError("batches must be >= 1")
        if self.failure_prob is not None and not 0 < self.failure_prob < 1:
            raise ValueError("failure_prob must lie in (0, 1)")
        if self.tolerance is not None and self.tolerance <= 0:
            raise ValueError("tolerance must be positive")

    @classmethod
    def from_failure_prob(cls, gamma: float, tolerance: float | None = None) -> "EstimatorConfig":
        if not 0 < gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        return cls(
            batches=math.ceil(36 * math.log(1.0 / gamma)),
            failure_prob=gamma,
            tolerance=tolerance,
        )


def median_of_means(samples, batches: int) -> float:
    """Median of B contiguous batch means.

    The final batch absorbs the remainder when B does not divide the sample
    count.  For an even batch count the lower median is returned, so the
    output is deterministic.
    """
    x = np.asarray(samples, dtype=float).ravel()
    m = x.size
    if m == 0:
        raise MixrecError("median_of_means: empty input")
    b = int(batches)
    if b < 1:
        raise MixrecError("median_of_means: batches must be >= 1")
    if b > m:
        raise MixrecError(f"median_of_means: batches {b} exceeds sample count {m}")
    size = m // b
    means = np.empty(b)
    for i in range(b - 1):
        means[i] = x[i * size : (i + 1) * size].mean()
    means[b - 1] = x[(b - 1) * size :].mean()
    means.sort()
    return float(means[(b - 1) // 2])


def indicator_frequency(events) -> float:
    """Fraction of true entries of a boolean sequence."""
    e = np.asarray(events, dtype=bool).ravel()
    if e.size == 0:
        raise MixrecError("indicator_frequency: empty input")
    return float(e.mean())
