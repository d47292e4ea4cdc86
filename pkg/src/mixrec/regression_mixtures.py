"""Mixture-of-linear-regressions estimators.

Binary-vector intersection counts come from the one-monomial identity
E y^{|C|} prod_{i in C} x_i = |C|! |∩ S(i)| / ell.  General union counts come
from matching the components of two Gaussian scale mixtures: the responses,
and the responses perturbed along C.  Components of vectors untouched by C
shift by exactly the known ||a||^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ClusterTieError,
    LearnerConvergenceError,
    MixrecError,
    NoConsistentMatchingError,
    UnresolvedUnionError,
)
from .estimators import EstimatorConfig, median_of_means
from .rng import derived_rng


def _product_statistic(x: np.ndarray, y: np.ndarray, cols: list[int]) -> np.ndarray:
    stat = np.asarray(y, dtype=float) ** len(cols)
    for c in cols:
        stat = stat * x[:, c]
    return stat


def binary_intersection_statistic(
    x: np.ndarray, y: np.ndarray, subset, cfg: EstimatorConfig | None = None
) -> float:
    """Estimate of |∩_{i in C} S(i)| / ell for binary planted vectors.

    The product moment E y^{|C|} prod_{i in C} x_i equals |C|! |∩|/ell, not
    |∩|/ell: expanding (<v, x> + noise)^{|C|}, the only surviving monomial
    prod v_i x_i carries the multinomial coefficient |C|!.  The estimate is
    normalized accordingly.  Median-of-means replaces the plain mean for
    |C| >= 2, where the statistic is heavy-tailed.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise MixrecError("binary_intersection_statistic: empty samples")
    cols = [int(i) - 1 for i in sorted(subset)]
    if not cols:
        return 1.0
    stat = _product_statistic(x, y, cols)
    if len(cols) >= 2:
        b = (cfg or EstimatorConfig.from_failure_prob(0.05)).batches
        value = median_of_means(stat, min(b, stat.size))
    else:
        value = float(stat.mean())
    return value / math.factorial(len(cols))


def intersection_count_mlr_binary(
    x: np.ndarray, y: np.ndarray, subset, ell: int, cfg: EstimatorConfig | None = None
) -> int:
    """|∩_{i in C} S(i)| for binary planted vectors, clamped to [0, ell]."""
    value = binary_intersection_statistic(x, y, subset, cfg)
    scaled = min(max(ell * value, 0.0), float(ell))
    return int(round(scaled))


def intersection_nonempty_mlr(
    x: np.ndarray, y: np.ndarray, subset, ell: int, alpha_c: float
) -> bool:
    """Algorithm-as-written threshold test: (2 ell / m) sum y^{|C|} prod x_i >= alpha.

    alpha_c is the Assumption-4 lower bound on |sum_v prod_{j in C} v_j| for
    the subset size |C|.  The test is one-sided, so it presumes the hidden sum
    is positive when nonzero (e.g. the non-negative-vector regime).
    """
    if alpha_c <= 0:
        raise MixrecError("intersection_nonempty_mlr: alpha must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise MixrecError("intersection_nonempty_mlr: empty samples")
    cols = [int(i) - 1 for i in sorted(subset)]
    if not cols:
        return ell > 0
    stat = _product_statistic(x, y, cols)
    return float(2.0 * ell * stat.mean()) >= alpha_c


def alpha_schedule(
    kind: str,
    ell: int,
    delta: float | None = None,
    nu: float | None = None,
    eta: float | None = None,
    k: int | None = None,
    explicit=None,
) -> list[float]:
    """Assumption-4 thresholds alpha_1..alpha_ell for the membership test.

    nonneg:   alpha_s = delta^s.
    gaussian: alpha_s = delta_s^s with
              delta_s = sqrt(pi/8) * nu * eta / (ell * s * (ell k)^s).
    explicit: caller-provided values.
    """
    if kind == "nonneg":
        if delta is None:
            raise MixrecError("alpha_schedule: nonneg schedule needs delta")
        return [delta**s for s in range(1, ell + 1)]
    if kind == "gaussian":
        if nu is None or eta is None or k is None:
            raise MixrecError("alpha_schedule: gaussian schedule needs nu, eta, k")
        out = []
        for s in range(1, ell + 1):
            d = math.sqrt(math.pi / 8.0) * nu * eta / (ell * s * (ell * k) ** s)
            out.append(d**s)
        return out
    if kind == "explicit":
        if explicit is None or len(explicit) < ell:
            raise MixrecError("alpha_schedule: explicit schedule needs ell values")
        return [float(a) for a in explicit[:ell]]
    raise MixrecError(f"alpha_schedule: unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# union of support via second-moment clustering


def union_of_support_mlr(
    x: np.ndarray,
    y: np.ndarray,
    n: int,
    ell: int,
    delta: float,
    R: float,
    sigma: float,
    cfg: EstimatorConfig,
    membership_test=None,
) -> tuple[int, ...]:
    """Union of supports by single-link clustering of E y^2 x_i^2 estimates.

    Off-support coordinates share one statistic value; on-support coordinates
    exceed it by at least 2 delta^2 / ell.  The largest cluster is declared
    off-support; when it covers more than half the coordinates the declaration
    is confirmed by ``membership_test`` (index -> bool, True meaning the index
    is in some support) on the cluster's lowest-statistic representative.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise MixrecError("union_of_support_mlr: empty samples")
    b = min(cfg.batches, y.size)
    stats = np.empty(n)
    ysq = y**2
    for i in range(n):
        stats[i] = median_of_means(ysq * x[:, i] ** 2, b)

    order = np.argsort(stats, kind="stable")
    threshold = delta**2 / ell
    clusters: list[list[int]] = [[int(order[0]) + 1]]
    for prev, cur in zip(order[:-1], order[1:]):
        if stats[cur] - stats[prev] <= threshold:
            clusters[-1].append(int(cur) + 1)
        else:
            clusters.append([int(cur) + 1])

    sizes = [len(c) for c in clusters]
    largest = max(sizes)
    tied = [c for c in clusters if len(c) == largest]
    if len(tied) > 1:
        raise ClusterTieError([sorted(c) for c in tied])
    off = tied[0]

    if largest > n / 2 and membership_test is not None:
        representative = min(off, key=lambda i: stats[i - 1])
        if membership_test(representative):
            raise UnresolvedUnionError(
                f"largest cluster failed off-support confirmation at index "
                f"{representative}; union of support likely exceeds n/2"
            )
    return tuple(sorted(set(range(1, n + 1)) - set(off)))


# ---------------------------------------------------------------------------
# zero-mean Gaussian scale mixtures


@dataclass
class ScaleMixtureModel:
    """Zero-mean Gaussian scale mixture: (weight, variance) pairs, variances ascending."""

    weights: np.ndarray
    variances: np.ndarray
    loglik: float = float("nan")
    converged: bool = True

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.variances = np.asarray(self.variances, dtype=float)
        order = np.argsort(self.variances)
        self.weights = self.weights[order]
        self.variances = self.variances[order]
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("component weights must sum to 1")
        if np.any(self.variances <= 0):
            raise ValueError("component variances must be positive")

    @property
    def components(self) -> list[tuple[float, float]]:
        return [(float(w), float(v)) for w, v in zip(self.weights, self.variances)]

    def logpdf(self, values: np.ndarray) -> float:
        lp = _component_logpdf(np.asarray(values, dtype=float) ** 2, self.variances)
        lp += np.log(self.weights)[None, :]
        m = lp.max(axis=1)
        return float((m + np.log(np.exp(lp - m[:, None]).sum(axis=1))).sum())


@dataclass(frozen=True)
class LearnConfig:
    """EM settings for :func:`learn_scale_mixture`.

    ``bins``: samples are compressed into that many log-spaced y^2 bins
    (carrying per-bin means) before EM.  The Gaussian log-density is linear
    in y^2, so the compression is exact for the density term and only
    responsibilities see the (tiny) within-bin spread; iteration cost becomes
    independent of the sample count.  Set to 0 to run EM on raw samples.
    """

    restarts: int = 3
    max_iter: int = 400
    tol: float = 1e-10
    seed: int = 0
    bins: int = 4096


def _component_logpdf(values_sq: np.ndarray, variances: np.ndarray) -> np.ndarray:
    v = variances[None, :]
    return -0.5 * (np.log(2.0 * math.pi * v) + values_sq[:, None] / v)


def _compress(ysq: np.ndarray, bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Log-spaced y^2 binning; returns (bin means, bin weights)."""
    pos = ysq[ysq > 0]
    if pos.size == 0:
        return np.array([0.0]), np.array([float(ysq.size)])
    lo, hi = float(pos.min()), float(pos.max())
    if lo == hi:
        return np.array([lo]), np.array([float(ysq.size)])
    log_lo, log_hi = math.log(lo), math.log(hi)
    scale = bins / (log_hi - log_lo)
    idx = np.clip(
        ((np.log(np.maximum(ysq, lo)) - log_lo) * scale).astype(np.int64), 0, bins - 1
    )
    counts = np.bincount(idx, minlength=bins).astype(float)
    sums = np.bincount(idx, weights=ysq, minlength=bins)
    keep = counts > 0
    return sums[keep] / counts[keep], counts[keep]


def _em_once(values_sq, weights, k, init_var, max_iter, tol):
    total = weights.sum()
    var = np.array(init_var, dtype=float)
    w = np.full(k, 1.0 / k)
    floor = max(float(values_sq @ weights) / total, 1e-300) * 1e-12
    prev = -np.inf
    converged = False
    for _ in range(max_iter):
        lp = _component_logpdf(values_sq, var) + np.log(w)[None, :]
        top = lp.max(axis=1)
        norm = top + np.log(np.exp(lp - top[:, None]).sum(axis=1))
        loglik = float(norm @ weights)
        resp = np.exp(lp - norm[:, None]) * weights[:, None]
        mass = np.maximum(resp.sum(axis=0), 1e-300)
        var = np.maximum(values_sq @ resp / mass, floor)
        w = mass / total
        if abs(loglik - prev) <= tol * (1.0 + abs(loglik)):
            converged = True
            break
        prev = loglik
    return w, var, loglik, converged


def learn_scale_mixture(
    values, max_components: int, cfg: LearnConfig | None = None
) -> ScaleMixtureModel:
    """Fit a zero-mean Gaussian scale mixture with at most ``max_components``.

    EM over the variances with seeded restarts; the component count is chosen
    by BIC.  Raises :class:`LearnerConvergenceError` (carrying the best model
    found) if no run converged.
    """
    cfg = cfg or LearnConfig()
    y = np.asarray(values, dtype=float).ravel()
    if y.size == 0:
        raise MixrecError("learn_scale_mixture: empty input")
    if max_components < 1:
        raise MixrecError("learn_scale_mixture: max_components must be >= 1")
    m = y.size
    ysq = y**2
    if cfg.bins and m > 4 * cfg.bins:
        vals, weights = _compress(ysq, cfg.bins)
    else:
        vals, weights = ysq, np.ones(m)
    base = max(float(vals @ weights) / m, 1e-300)

    best = None  # (bic, model)
    any_converged = False
    for k in range(1, max_components + 1):
        if k == 1:
            # closed form: MLE variance is the mean square
            var = np.array([base])
            lp = _component_logpdf(vals, var)[:, 0]
            model_k = (np.array([1.0]), var, float(lp @ weights), True)
        else:
            run_best = None
            for r in range(cfg.restarts):
                if r == 0:
                    qs = _weighted_quantiles(vals, weights, np.linspace(0.15, 0.85, k))
                    init = np.maximum(qs, base * 1e-6)
                else:
                    rng = derived_rng(cfg.seed, "restart", k, r)
                    init = base * np.exp(rng.uniform(-3, 3, size=k))
                out = _em_once(vals, weights, k, init, cfg.max_iter, cfg.tol)
                if run_best is None or out[2] > run_best[2]:
                    run_best = out
            model_k = run_best
        w, var, loglik, converged = model_k
        any_converged = any_converged or converged
        bic = -2.0 * loglik + (2 * k - 1) * math.log(m)
        model = ScaleMixtureModel(w, var, loglik=loglik, converged=converged)
        if best is None or bic < best[0]:
            best = (bic, model)

    model = best[1]
    if not any_converged:
        raise LearnerConvergenceError(
            f"EM failed to converge in {cfg.restarts} restarts", best_model=model
        )
    return model


def _weighted_quantiles(values, weights, qs) -> np.ndarray:
    order = np.argsort(values)
    v, w = values[order], weights[order]
    cum = np.cumsum(w) - 0.5 * w
    cum /= w.sum()
    return np.interp(qs, cum, v)


# ---------------------------------------------------------------------------
# general union counts via perturbed-mixture matching


@dataclass(frozen=True)
class GeneralUnionConfig:
    """Settings for :func:`union_count_mlr_general`.

    ``alpha``/``epsilon`` default to the perturbation scale and matching
    tolerance from the source analysis: alpha = (delta / (4 R sqrt(log2(1/gamma))))
    * min(Delta, 1/2) and epsilon = 1 / (2 ell^3).  Both are exposed because
    the printed constants are self-defeating in practice (the tolerance can
    exceed the typical perturbation); see README.

    ``draws`` > 1 repeats the draw-fit-match body over independent
    perturbations and returns the median count, amplifying the per-draw
    success probability (a single draw can be unlucky: the perturbation of a
    C-hitting component may land near zero).

    ``min_ratio``: a draw is discarded (when other draws remain) if the
    perturbation pushed two fitted components within that variance ratio of
    each other, or merged them outright; the EM substitute is only reliable
    on well-separated mixtures, and a draw can destroy the separation the
    unperturbed mixture had.  The threshold is capped by the base fit's own
    separation, so close-component mixtures are not filtered to death.
    """

    alpha: float | None = None
    epsilon: float | None = None
    seed: int = 0
    draws: int = 1
    min_ratio: float | None = None
    learn: LearnConfig = field(default_factory=LearnConfig)


@dataclass
class GeneralUnionResult:
    count: int
    matched_weight: float
    margin: float
    alpha: float
    epsilon: float
    base: ScaleMixtureModel
    perturbed: ScaleMixtureModel
    shift: float
    reliable: bool = True


def default_alpha(delta: float, R: float, Delta: float, gamma: float) -> float:
    return 0.5 * (delta / (2.0 * R * math.sqrt(math.log2(1.0 / gamma)))) * min(Delta, 0.5)


def union_count_mlr_general(
    x: np.ndarray,
    y: np.ndarray,
    subset,
    ell: int,
    delta: float,
    R: float,
    Delta: float,
    sigma: float,
    gamma: float,
    cfg: GeneralUnionConfig | None = None,
    base_model: ScaleMixtureModel | None = None,
) -> int:
    """|∪_{i in C} S(i)| by perturbed scale-mixture matching; see module doc."""
    return general_union_details(
        x, y, subset, ell, delta, R, Delta, sigma, gamma, cfg, base_model
    ).count


def general_union_details(
    x: np.ndarray,
    y: np.ndarray,
    subset,
    ell: int,
    delta: float,
    R: float,
    Delta: float,
    sigma: float,
    gamma: float,
    cfg: GeneralUnionConfig | None = None,
    base_model: ScaleMixtureModel | None = None,
) -> GeneralUnionResult:
    cfg = cfg or GeneralUnionConfig()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if y.size < 2:
        raise MixrecError("union_count_mlr_general: need at least two samples")
    cols = [int(i) - 1 for i in sorted(subset)]
    alpha = cfg.alpha if cfg.alpha is not None else default_alpha(delta, R, Delta, gamma)
    epsilon = cfg.epsilon if cfg.epsilon is not None else 0.5 * ell**-3

    half = y.size // 2
    if base_model is None:
        base_model = learn_scale_mixture(y[:half], ell, cfg.learn)

    ratio_floor = None
    if cfg.min_ratio is not None:
        ratio_floor = cfg.min_ratio
        if len(base_model.variances) >= 2:
            base_ratio = float(
                np.min(base_model.variances[1:] / base_model.variances[:-1])
            )
            ratio_floor = min(ratio_floor, 0.8 * base_ratio)

    results = []
    for draw in range(max(1, cfg.draws)):
        rng = derived_rng(cfg.seed, "perturbation", *sorted(subset), draw)
        a = rng.normal(0.0, alpha, size=len(cols))
        shift = float(a @ a)
        perturbed_values = y[half:] + (x[half:, cols] @ a if cols else 0.0)
        perturbed = learn_scale_mixture(perturbed_values, ell, cfg.learn)
        matched, _ = _match_components(base_model, perturbed, shift, epsilon)
        w = float(sum(perturbed.weights[r] for r in matched))
        raw = ell * (1.0 - w)
        count = int(round(min(max(raw, 0.0), float(ell))))
        reliable = len(perturbed.variances) >= len(base_model.variances)
        if ratio_floor is not None and len(perturbed.variances) >= 2:
            ratios = perturbed.variances[1:] / perturbed.variances[:-1]
            reliable = reliable and bool(np.all(ratios >= ratio_floor))
        results.append(
            GeneralUnionResult(
                count=count,
                matched_weight=w,
                margin=abs(raw - round(raw)),
                alpha=alpha,
                epsilon=epsilon,
                base=base_model,
                perturbed=perturbed,
                shift=shift,
                reliable=reliable,
            )
        )
    usable = [r for r in results if r.reliable] or results
    counts = sorted(r.count for r in usable)
    median_count = counts[(len(counts) - 1) // 2]
    for r in usable:
        if r.count == median_count:
            return r
    return usable[0]


def _match_components(base, perturbed, shift, epsilon):
    """Greedy injective matching by ascending variance gap.

    A perturbed component r may match a base component l when
    |var_r - shift - var_l| <= epsilon.  If, after matching, an unmatched
    perturbed component still has an epsilon-close base partner (necessarily
    consumed by another component), the outcome would depend on tie-breaking
    and a :class:`NoConsistentMatchingError` is raised.
    """
    pairs = []
    for r, vr in enumerate(perturbed.variances):
        for l, vl in enumerate(base.variances):
            gap = abs(vr - shift - vl)
            if gap <= epsilon:
                pairs.append((gap, r, l))
    pairs.sort()
    used_r: set[int] = set()
    used_l: set[int] = set()
    worst = 0.0
    for gap, r, l in pairs:
        if r in used_r or l in used_l:
            continue
        used_r.add(r)
        used_l.add(l)
        worst = max(worst, gap)
    for gap, r, l in pairs:
        if r not in used_r:
            raise NoConsistentMatchingError(
                f"no consistent matching: perturbed component {r} has only "
                f"consumed partners within epsilon"
            )
    return used_r, worst
