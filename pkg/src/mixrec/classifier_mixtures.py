"""Mixture-of-linear-classifiers estimators.

Conditioning on every covariate in C being large biases the label frequency
by an amount proportional to the number of vectors hitting C; the frequency
then falls into one of ell+1 disjoint decoding bands.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfinv

from .errors import EmptyConditioningEventError, MixrecError
from .estimators import indicator_frequency


def conditioning_threshold(R: float, sigma: float, delta: float, ell: int) -> float:
    """a = sqrt(2(R^2 + sigma^2))/delta * erfinv(1 - 1/(2 ell))."""
    if delta <= 0:
        raise MixrecError("conditioning_threshold: delta must be positive")
    if ell < 1:
        raise MixrecError("conditioning_threshold: ell must be >= 1")
    if R < 0 or sigma < 0:
        raise MixrecError("conditioning_threshold: R and sigma must be >= 0")
    return math.sqrt(2.0 * (R * R + sigma * sigma)) / delta * float(erfinv(1.0 - 1.0 / (2.0 * ell)))


def decoding_bands(ell: int) -> list[tuple[float, float]]:
    """Band for t = 0..ell: [ (1 + t/ell)/2 - t/(4 ell^2), (1 + t/ell)/2 ]."""
    bands = []
    for t in range(ell + 1):
        hi = 0.5 * (1.0 + t / ell)
        lo = hi - t / (4.0 * ell * ell)
        bands.append((lo, hi))
    return bands


def _band_distance(p: float, band: tuple[float, float]) -> float:
    lo, hi = band
    if p < lo:
        return lo - p
    if p > hi:
        return p - hi
    return 0.0


def union_count_mlc(x: np.ndarray, y: np.ndarray, subset, a: float, ell: int) -> int:
    """|∪_{i in C} S(i)| decoded from the conditioned label frequency.

    Keeps samples with x_j > a for all j in C, computes the frequency of
    y = +1 and returns the t whose band contains it, falling back to the
    nearest band when sampling noise pushes the frequency between bands.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    cols = [int(i) - 1 for i in sorted(subset)]
    mask = np.ones(x.shape[0], dtype=bool)
    for c in cols:
        mask &= x[:, c] > a
    if not mask.any():
        from scipy.stats import norm

        expected = float((1.0 - norm.cdf(a)) ** len(cols))
        raise EmptyConditioningEventError(tuple(sorted(subset)), expected)
    p_hat = indicator_frequency(y[mask] == 1)
    return decode_band(p_hat, ell)


def decode_band(p_hat: float, ell: int) -> int:
    bands = decoding_bands(ell)
    for t, band in enumerate(bands):
        if band[0] <= p_hat <= band[1]:
            return t
    distances = [_band_distance(p_hat, band) for band in bands]
    return int(np.argmin(distances))


def conditioned_count(x: np.ndarray, subset, a: float) -> int:
    """Number of samples satisfying the conditioning event E_C."""
    x = np.asarray(x, dtype=float)
    mask = np.ones(x.shape[0], dtype=bool)
    for i in sorted(subset):
        mask &= x[:, int(i) - 1] > a
    return int(mask.sum())


def negate_if_nonpositive(x: np.ndarray, y: np.ndarray, sign_regime: str):
    """Reduce the all-nonpositive regime to the all-nonnegative analysis.

    Flipping x -> -x preserves the label law because <v, x> = <-v, -x>.
    """
    if sign_regime not in ("nonneg", "nonpos"):
        raise ValueError(f"unknown sign regime {sign_regime!r}")
    if sign_regime == "nonneg":
        return x, y
    return -np.asarray(x), y
