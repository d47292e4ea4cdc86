"""Mixture-of-distributions estimators via the method of moments.

For a one-parameter family whose t-th raw moment is a degree-t polynomial
q_t(theta) = sum_i beta_{t,i} theta^{i-1}, products of coordinate moments over
an index set C expand into power sums V^z of the hidden coordinate products.
Inverting that triangular system and feeding the even power sums through the
Newton recursion for elementary symmetric polynomials yields |∩_{i∈C} S(i)|.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import DegenerateFamilyError, MixrecError
from .estimators import EstimatorConfig, median_of_means

MultiIndex = tuple[int, ...]

FAMILIES = ("gaussian", "poisson", "uniform")


@dataclass(frozen=True)
class MomentFamily:
    """One-parameter distribution family with polynomial raw moments.

    gaussian: N(theta, sigma^2) with known sigma.
    poisson:  Poisson(theta), theta >= 0.
    uniform:  Uniform[theta, upper] with known upper bound.
    """

    name: str
    sigma: float = 1.0
    upper: float = 1.0

    def __post_init__(self):
        if self.name not in FAMILIES:
            raise MixrecError(f"unsupported family {self.name!r}")

    def coeffs(self, t: int) -> np.ndarray:
        return moment_coeffs(self, t)

    def moment(self, theta: float, t: int) -> float:
        """q_t(theta), evaluated directly."""
        c = self.coeffs(t)
        return float(np.polynomial.polynomial.polyval(theta, c))


def _double_factorial(j: int) -> int:
    out = 1
    while j > 1:
        out *= j
        j -= 2
    return out


def _stirling2_row(t: int) -> list[int]:
    # S(t, j) for j = 0..t by the triangle recurrence.
    row = [1]
    for n in range(1, t + 1):
        new = [0] * (n + 1)
        for j in range(1, n + 1):
            new[j] = j * (row[j] if j < len(row) else 0) + row[j - 1]
        row = new
    return row


def moment_coeffs(family: MomentFamily, t: int) -> np.ndarray:
    """Coefficients (beta_{t,1}, ..., beta_{t,t+1}) of q_t(theta).

    Computed by exact integer/rational recurrences; the leading coefficient is
    nonzero for every supported family, so the power-sum recursion below never
    degenerates.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return np.array([1.0])
    out = np.zeros(t + 1)
    if family.name == "gaussian":
        # E (theta + sigma Z)^t = sum over even j of C(t,j) (j-1)!! sigma^j theta^(t-j)
        for j in range(0, t + 1, 2):
            out[t - j] = math.comb(t, j) * _double_factorial(j - 1) * family.sigma**j
    elif family.name == "poisson":
        # Touchard polynomial: E x^t = sum_j S(t, j) theta^j
        row = _stirling2_row(t)
        for j, s in enumerate(row):
            out[j] = float(s)
    else:  # uniform
        # (b^{t+1} - theta^{t+1}) / ((t+1)(b - theta)) = sum_j b^{t-j} theta^j / (t+1)
        b = family.upper
        for j in range(t + 1):
            out[j] = b ** (t - j) / (t + 1)
    return out


def beta_table(family: MomentFamily, t_max: int) -> dict[int, list[float]]:
    """beta coefficients for t = 0..t_max, e.g. for JSON inspection."""
    return {t: [float(v) for v in moment_coeffs(family, t)] for t in range(t_max + 1)}


def zeta(family: MomentFamily, z: MultiIndex, u: MultiIndex) -> float:
    """Coupling coefficient: product over positions of beta_{z_i, u_i + 1}."""
    out = 1.0
    for zi, ui in zip(z, u):
        if ui > zi:
            raise ValueError("u must be <= z componentwise")
        out *= family.coeffs(zi)[ui]
    return out


# ---------------------------------------------------------------------------
# estimation


def raw_moment_estimates(
    samples: np.ndarray,
    subset,
    z_max: int,
    cfg: EstimatorConfig,
) -> dict[MultiIndex, float]:
    """Median-of-means estimates of E prod_{i in C} x_i^{z_i} for all z <= z_max.

    ``samples`` is (m, n); ``subset`` holds 1-based coordinates.  The all-zero
    multi-index is pinned to exactly 1.0 (empty product).
    """
    x = np.asarray(samples, dtype=float)
    cols = [int(i) - 1 for i in sorted(subset)]
    if any(c < 0 or c >= x.shape[1] for c in cols):
        raise MixrecError(f"subset {sorted(subset)} outside sample dimension {x.shape[1]}")
    m = x.shape[0]
    b = min(cfg.batches, m)
    # x_i^e for e = 0..z_max, per subset coordinate
    powers = []
    for c in cols:
        p = np.empty((z_max + 1, m))
        p[0] = 1.0
        for e in range(1, z_max + 1):
            p[e] = p[e - 1] * x[:, c]
        powers.append(p)
    out: dict[MultiIndex, float] = {}
    for z in product(range(z_max + 1), repeat=len(cols)):
        if all(e == 0 for e in z):
            out[z] = 1.0
            continue
        stat = powers[0][z[0]]
        for pos in range(1, len(cols)):
            stat = stat * powers[pos][z[pos]]
        out[z] = median_of_means(stat, b)
    return out


def power_sums_from_moments(
    moments: dict[MultiIndex, float],
    family: MomentFamily,
    ell: int,
    condition_floor: float = 1e-8,
) -> dict[MultiIndex, float]:
    """Invert ell*U^z = sum_{u<=z} zeta_{z,u} V^u for the power sums V^z.

    Processed in non-decreasing total degree (then lexicographic) order so
    every V^u with u < z is ready when z is reached; V^0 = ell exactly.
    """
    if not moments:
        return {}
    dim = len(next(iter(moments)))
    betas: dict[int, np.ndarray] = {}

    def beta(t: int) -> np.ndarray:
        if t not in betas:
            betas[t] = family.coeffs(t)
        return betas[t]

    out: dict[MultiIndex, float] = {}
    for z in sorted(moments, key=lambda z: (sum(z), z)):
        if all(e == 0 for e in z):
            out[z] = float(ell)
            continue
        lead = 1.0
        for zi in z:
            lead *= beta(zi)[zi]
        if lead == 0.0:
            raise DegenerateFamilyError(
                f"degenerate family: leading coefficient vanished at z={z}"
            )
        if abs(lead) < condition_floor:
            warnings.warn(
                f"power-sum recursion poorly conditioned at z={z}: |zeta_zz|={lead:.3g}",
                RuntimeWarning,
            )
        acc = ell * moments[z]
        for u in product(*(range(zi + 1) for zi in z)):
            if u == z:
                continue
            zeta_zu = 1.0
            for zi, ui in zip(z, u):
                zeta_zu *= beta(zi)[ui]
            if zeta_zu != 0.0:
                acc -= zeta_zu * out[u]
        out[z] = acc / lead
    zero = (0,) * dim
    if zero not in out:
        out[zero] = float(ell)
    return out


def elementary_symmetric(power_sums) -> np.ndarray:
    """Newton recursion: A_t from power sums P_1..P_ell (A_0 = 1).

    For exact power sums of a non-negative multiset, A_t equals the degree-t
    elementary symmetric polynomial of that multiset.
    """
    p = np.asarray(power_sums, dtype=float).ravel()
    ell = p.size
    a = np.zeros(ell + 1)
    a[0] = 1.0
    for t in range(1, ell + 1):
        s = 0.0
        for q in range(1, t + 1):
            s += (-1) ** (q + 1) * a[t - q] * p[q - 1]
        a[t] = s / t
    return a[1:]


def default_thresholds(ell: int, subset_size: int, delta: float) -> np.ndarray:
    """tau_t = delta^(2 t |C|) / 2 for t = 1..ell (finite-sample positivity test)."""
    return np.array([delta ** (2 * t * subset_size) / 2.0 for t in range(1, ell + 1)])


def intersection_count_md(
    samples: np.ndarray,
    subset,
    family: MomentFamily,
    ell: int,
    delta: float,
    cfg: EstimatorConfig,
    thresholds=None,
) -> int:
    """|∩_{i in C} S(i)| estimated from samples of the mixture.

    Returns the largest t whose elementary-symmetric estimate clears its
    threshold; 0 when none does.
    """
    subset = tuple(sorted(int(i) for i in subset))
    if not subset:
        return ell
    moments = raw_moment_estimates(samples, subset, 2 * ell, cfg)
    power = power_sums_from_moments(moments, family, ell)
    return intersection_count_from_power_sums(power, ell, len(subset), delta, thresholds)


def intersection_count_from_power_sums(
    power: dict[MultiIndex, float], ell: int, subset_size: int, delta: float, thresholds=None
) -> int:
    """Decoding step of :func:`intersection_count_md` on precomputed power sums."""
    p = [power[(2 * q,) * subset_size] for q in range(1, ell + 1)]
    a = elementary_symmetric(p)
    tau = default_thresholds(ell, subset_size, delta) if thresholds is None else np.asarray(thresholds)
    count = 0
    for t in range(1, ell + 1):
        if a[t - 1] > tau[t - 1]:
            count = t
    return count


def intersection_nonempty_md(
    samples: np.ndarray,
    subset,
    family: MomentFamily,
    ell: int,
    delta: float,
    cfg: EstimatorConfig,
) -> bool:
    """1[|∩_{i in C} S(i)| > 0] via the single even power sum V^{2·1}."""
    subset = tuple(sorted(int(i) for i in subset))
    if not subset:
        return ell > 0
    moments = raw_moment_estimates(samples, subset, 2, cfg)
    power = power_sums_from_moments(moments, family, ell)
    return power[(2,) * len(subset)] >= delta ** (2 * len(subset)) / 2.0


# ---------------------------------------------------------------------------
# analytic helpers (exact-moment path, used by tests and calibration)


def analytic_product_moment(family: MomentFamily, vectors: np.ndarray, subset, z: MultiIndex) -> float:
    """E prod_{i in C} x_i^{z_i} computed from the planted vectors.

    Evaluates (1/ell) sum_j prod_i q_{z_i}(v^{(j)}_i); independent of the
    coefficient-expansion path, so it serves as its oracle.
    """
    v = np.atleast_2d(np.asarray(vectors, dtype=float))
    cols = [int(i) - 1 for i in sorted(subset)]
    total = 0.0
    for row in v:
        term = 1.0
        for pos, c in enumerate(cols):
            term *= family.moment(row[c], z[pos])
        total += term
    return total / v.shape[0]


def analytic_power_sum(vectors: np.ndarray, subset, z: MultiIndex) -> float:
    """V^z = sum_j prod_{i in C} (v^{(j)}_i)^{z_i} from the planted vectors."""
    v = np.atleast_2d(np.asarray(vectors, dtype=float))
    cols = [int(i) - 1 for i in sorted(subset)]
    total = 0.0
    for row in v:
        term = 1.0
        for pos, c in enumerate(cols):
            term *= row[c] ** z[pos]
        total += term
    return total
