"""End-to-end exact and maximal support recovery.

Both pipelines share the same stage structure: (1) recover the union of
support from singleton statistics, (2) estimate subset statistics for subsets
of the union up to the size bound, (3) convert to occ-counts (exact mode) and
(4) decode.  Stage 2+ statistics come from a pluggable source, so the same
pipeline runs against model estimators or against the exact oracle.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np

from . import classifier_mixtures as mlc
from . import moment_mixtures as md
from . import regression_mixtures as mlr
from .errors import MixrecError
from .estimators import EstimatorConfig
from .rng import stream_seed
from .supports import (
    SubsetStatTable,
    SupportSet,
    intersection_table_from_unions,
    maximal_elements,
    occ_table_from_intersections,
    recover_supports,
    recover_maximal,
)
from .synth import (
    PlantedInstance,
    oracle_intersection,
    oracle_membership,
    oracle_union,
    sample_mlc,
    sample_model,
)


@dataclass(frozen=True)
class RunConfig:
    """Sample-size and estimator settings for a recovery run."""

    m: int = 200_000
    gamma: float = 0.05
    seed: int = 0
    batches: int | None = None  # override the failure-budget batch count
    # MLC
    conditioned_target: int | None = None
    raw_cap: int = 50_000_000
    a_override: float | None = None
    # MLR maximal
    alpha_kind: str = "nonneg"  # 'nonneg' | 'gaussian' | 'explicit'
    alpha_values: tuple[float, ...] | None = None
    # MLR general (Algorithm-9 style)
    general: mlr.GeneralUnionConfig = field(default_factory=mlr.GeneralUnionConfig)


def failure_budget(gamma: float, n: int, ell: int, k: int, size_bound: int) -> float:
    """Per-subset failure budget gamma / (n + (ell k)^bound)."""
    return gamma / (n + max(ell * k, 1) ** size_bound)


def _batch_count(cfg: RunConfig, n: int, ell: int, k: int, size_bound: int, m: int) -> int:
    if cfg.batches is not None:
        return max(1, min(cfg.batches, m))
    gamma_sub = failure_budget(cfg.gamma, n, ell, k, size_bound)
    b = math.ceil(36 * math.log(1.0 / gamma_sub))
    return max(1, min(b, m // 8 if m >= 8 else 1))


# ---------------------------------------------------------------------------
# statistic sources


class StatSource:
    """Interface: stage-1 union membership plus per-subset statistics.

    ``kind`` names the count served by :meth:`count` ('intersection' or
    'union'); ``membership`` serves the maximal pipeline.  Sources record
    every query in ``queries`` as (stage, subset, value).
    """

    kind = "intersection"

    def __init__(self):
        self.queries: list[tuple[str, tuple[int, ...], object]] = []

    def in_union(self, i: int) -> bool:
        raise NotImplementedError

    def count(self, subset) -> int:
        raise NotImplementedError

    def membership(self, subset) -> bool:
        raise NotImplementedError

    def _record(self, stage, subset, value):
        self.queries.append((stage, tuple(sorted(subset)), value))
        return value


class OracleSource(StatSource):
    """Exact statistics read off the planted supports (plug-the-oracle)."""

    def __init__(self, instance: PlantedInstance, kind: str = "intersection"):
        super().__init__()
        if kind not in ("intersection", "union"):
            raise ValueError(kind)
        self.kind = kind
        self.members = instance.supports().members

    def in_union(self, i):
        return self._record("stage1", (i,), oracle_union(self.members, (i,)) > 0)

    def count(self, subset):
        fn = oracle_intersection if self.kind == "intersection" else oracle_union
        return self._record("stage2", subset, fn(self.members, subset))

    def membership(self, subset):
        if len(subset) == 0:
            return len(self.members) > 0
        stage = "stage1" if len(subset) == 1 else "stage2"
        return self._record(stage, subset, oracle_membership(self.members, subset))


class MdSource(StatSource):
    """Moment-based intersection counts / membership (MD model)."""

    kind = "intersection"

    def __init__(self, x, family, ell, delta, cfg: RunConfig, n, k, mode="exact"):
        super().__init__()
        self.x = np.asarray(x, dtype=float)
        self.family = family
        self.ell = ell
        self.delta = delta
        bound = _size_bound(mode, ell)
        b = _batch_count(cfg, n, ell, k, bound, self.x.shape[0])
        self.est = EstimatorConfig(batches=b, failure_prob=cfg.gamma)
        self._cache: dict[tuple[int, ...], int] = {}

    def _count(self, subset) -> int:
        key = tuple(sorted(subset))
        if key not in self._cache:
            self._cache[key] = md.intersection_count_md(
                self.x, key, self.family, self.ell, self.delta, self.est
            )
        return self._cache[key]

    def in_union(self, i):
        return self._record("stage1", (i,), self._count((i,)) > 0)

    def count(self, subset):
        return self._record("stage2", subset, self._count(subset))

    def membership(self, subset):
        if len(subset) == 0:
            return self.ell > 0
        stage = "stage1" if len(subset) == 1 else "stage2"
        return self._record(
            stage,
            subset,
            md.intersection_nonempty_md(
                self.x, subset, self.family, self.ell, self.delta, self.est
            ),
        )


class MlrBinarySource(StatSource):
    """Product-moment intersection counts (binary MLR)."""

    kind = "intersection"

    def __init__(self, x, y, ell, cfg: RunConfig, n, k, mode="exact"):
        super().__init__()
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.ell = ell
        bound = _size_bound(mode, ell)
        b = _batch_count(cfg, n, ell, k, bound, self.y.size)
        self.est = EstimatorConfig(batches=b, failure_prob=cfg.gamma)
        self._cache: dict[tuple[int, ...], int] = {}

    def _count(self, subset) -> int:
        key = tuple(sorted(subset))
        if key not in self._cache:
            self._cache[key] = mlr.intersection_count_mlr_binary(
                self.x, self.y, key, self.ell, self.est
            )
        return self._cache[key]

    def in_union(self, i):
        return self._record("stage1", (i,), self._count((i,)) > 0)

    def count(self, subset):
        return self._record("stage2", subset, self._count(subset))

    def membership(self, subset):
        if len(subset) == 0:
            return self.ell > 0
        stage = "stage1" if len(subset) == 1 else "stage2"
        return self._record(stage, subset, self._count(subset) > 0)


class MlrThresholdSource(StatSource):
    """Assumption-4 membership indicators (MLR maximal recovery)."""

    kind = "intersection"

    def __init__(self, x, y, ell, alphas, cfg: RunConfig):
        super().__init__()
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.ell = ell
        self.alphas = list(alphas)

    def membership(self, subset):
        s = len(subset)
        if s == 0:
            return self.ell > 0
        if s > len(self.alphas):
            raise MixrecError(f"no alpha threshold for subset size {s}")
        stage = "stage1" if s == 1 else "stage2"
        return self._record(
            stage,
            subset,
            mlr.intersection_nonempty_mlr(self.x, self.y, subset, self.ell, self.alphas[s - 1]),
        )

    def in_union(self, i):
        return self.membership((i,))


class MlrGeneralSource(StatSource):
    """Scale-mixture-matching union counts (general MLR)."""

    kind = "union"

    def __init__(self, x, y, instance_params, cfg: RunConfig, n, ell, k):
        super().__init__()
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.p = instance_params  # dict with delta, R, Delta, sigma
        self.cfg = cfg
        self.n = n
        self.ell = ell
        bound = _size_bound("exact", ell)
        b = _batch_count(cfg, n, ell, k, bound, self.y.size)
        self.est = EstimatorConfig(batches=b, failure_prob=cfg.gamma)
        self._union: tuple[int, ...] | None = None
        self._base: mlr.ScaleMixtureModel | None = None
        self._cache: dict[tuple[int, ...], int] = {}

    def _general_count(self, subset) -> int:
        key = tuple(sorted(subset))
        if key not in self._cache:
            gcfg = replace(self.cfg.general, seed=stream_seed(self.cfg.seed, "subset", *key))
            result = mlr.general_union_details(
                self.x,
                self.y,
                key,
                self.ell,
                self.p["delta"],
                self.p["R"],
                self.p["Delta"],
                self.p["sigma"],
                self.cfg.gamma,
                gcfg,
                base_model=self._base,
            )
            self._base = result.base
            self._cache[key] = result.count
        return self._cache[key]

    def union_set(self) -> tuple[int, ...]:
        if self._union is None:
            self._union = mlr.union_of_support_mlr(
                self.x,
                self.y,
                self.n,
                self.ell,
                self.p["delta"],
                self.p["R"],
                self.p["sigma"],
                self.est,
                membership_test=lambda i: self._general_count((i,)) > 0,
            )
        return self._union

    def in_union(self, i):
        return self._record("stage1", (i,), i in self.union_set())

    def count(self, subset):
        return self._record("stage2", subset, self._general_count(subset))

    def membership(self, subset):
        if len(subset) == 0:
            return self.ell > 0
        return self._record("stage2", subset, self._general_count(subset) > 0)


class MlcSource(StatSource):
    """Conditioned-label union counts (MLC).

    Oversamples from the instance in chunks until the conditioned-sample
    target is met (hard raw-sample cap), per the conditioned-budgeting rule.
    Without an instance it filters the provided batch only.
    """

    kind = "union"

    def __init__(self, x, y, ell, a, cfg: RunConfig, n, k, instance=None, mode="exact"):
        super().__init__()
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y)
        self.ell = ell
        self.a = a
        self.cfg = cfg
        self.instance = instance
        bound = _size_bound(mode, ell)
        gamma_sub = failure_budget(cfg.gamma, n, ell, k, bound)
        self.target = cfg.conditioned_target or max(
            math.ceil(10 * ell * ell * math.log(1.0 / gamma_sub)), 4000
        )
        self._cache: dict[tuple[int, ...], int] = {}
        self.conditioned_sizes: dict[tuple[int, ...], int] = {}

    def _conditioned_labels(self, subset) -> np.ndarray:
        cols = [int(i) - 1 for i in sorted(subset)]

        def keep(x, y):
            mask = np.ones(x.shape[0], dtype=bool)
            for c in cols:
                mask &= x[:, c] > self.a
            return y[mask]

        labels = keep(self.x, self.y)
        raw = self.x.shape[0]
        chunk_index = 0
        while labels.size < self.target and self.instance is not None and raw < self.cfg.raw_cap:
            chunk = min(max(self.x.shape[0], 100_000), self.cfg.raw_cap - raw)
            seed = stream_seed(self.cfg.seed, "subset", *sorted(subset), chunk_index + 1)
            batch = sample_mlc(self.instance, chunk, seed)
            labels = np.concatenate([labels, keep(batch.x, batch.y)])
            raw += chunk
            chunk_index += 1
        return labels

    def _count(self, subset) -> int:
        key = tuple(sorted(subset))
        if key not in self._cache:
            labels = self._conditioned_labels(key)
            self.conditioned_sizes[key] = int(labels.size)
            if labels.size == 0:
                from scipy.stats import norm

                from .errors import EmptyConditioningEventError

                raise EmptyConditioningEventError(
                    key, float((1 - norm.cdf(self.a)) ** len(key))
                )
            p_hat = float(np.mean(labels == 1))
            self._cache[key] = mlc.decode_band(p_hat, self.ell)
        return self._cache[key]

    def in_union(self, i):
        return self._record("stage1", (i,), self._count((i,)) > 0)

    def count(self, subset):
        return self._record("stage2", subset, self._count(subset))

    def membership(self, subset):
        if len(subset) == 0:
            return self.ell > 0
        stage = "stage1" if len(subset) == 1 else "stage2"
        return self._record(stage, subset, self._count(subset) > 0)


def _size_bound(mode: str, ell: int) -> int:
    if mode == "exact":
        return int(math.floor(math.log2(ell))) + 1 if ell >= 1 else 1
    return ell


# ---------------------------------------------------------------------------
# reports


@dataclass
class RecoveryReport:
    mode: str
    model: str
    ell: int
    n: int
    seed: int
    recovered: list
    union: list[int]
    truth: list | None = None
    exact_match: bool | None = None
    diagnostics: list = field(default_factory=list)
    error: dict | None = None
    sample_count: int = 0
    wall_time_s: float = 0.0

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "mode": self.mode,
            "model": self.model,
            "ell": self.ell,
            "n": self.n,
            "seed": self.seed,
            "recovered": self.recovered,
            "union": self.union,
            "truth": self.truth,
            "exact_match": self.exact_match,
            "diagnostics": self.diagnostics,
            "error": self.error,
            "sample_count": self.sample_count,
        }
        if include_timing:
            out["wall_time_s"] = self.wall_time_s
        return out

    def to_json(self, include_timing: bool = False) -> str:
        # wall time is excluded by default so identical seeds give identical bytes
        return json.dumps(self.to_dict(include_timing), sort_keys=True)


def _supports_payload(supports: SupportSet) -> list:
    counted = sorted(
        ((sorted(s), w) for s, w in supports.multiset().items()),
        key=lambda e: (e[0],),
    )
    return [[list(s), int(w)] for s, w in counted]


def _maximal_payload(sets) -> list:
    return sorted([sorted(s) for s in sets])


# ---------------------------------------------------------------------------
# pipelines


def run_exact(
    source: StatSource,
    ell: int,
    n: int,
    truth: SupportSet | None = None,
    seed: int = 0,
    model: str = "?",
) -> RecoveryReport:
    start = time.perf_counter()
    decoded = None
    error = None
    tee: list[int] = []
    try:
        tee = [i for i in range(1, n + 1) if source.in_union(i)]
    except MixrecError as exc:
        error = {"stage": "stage1", "message": str(exc)}

    p = int(math.floor(math.log2(ell))) if ell >= 1 else 0
    cap = min(p + 1, len(tee))
    if error is None:
        stats = SubsetStatTable(
            kind="intersection-count" if source.kind == "intersection" else "union-count",
            ell=ell,
        )
        for s in range(1, cap + 1):
            for c in combinations(tee, s):
                try:
                    stats.set(c, source.count(c))
                except MixrecError as exc:
                    error = {"stage": "stage2", "subset": list(c), "message": str(exc)}
                    break
            if error:
                break
    if error is None:
        try:
            if source.kind == "union":
                stats = intersection_table_from_unions(stats)
            occ = occ_table_from_intersections(stats, tee, range(0, cap + 1), ell)
            decoded = recover_supports(occ, ell, p=p, n=n)
        except MixrecError as exc:
            subset = list(getattr(exc, "subset", []))
            error = {"stage": "decode", "subset": subset, "message": str(exc)}

    report = RecoveryReport(
        mode="exact",
        model=model,
        ell=ell,
        n=n,
        seed=seed,
        recovered=_supports_payload(decoded) if decoded is not None else [],
        union=list(tee),
        error=error,
        diagnostics=[
            {"stage": st, "subset": list(c), "value": _jsonable(v)}
            for st, c, v in source.queries
        ],
    )
    if truth is not None:
        report.truth = _supports_payload(truth)
        report.exact_match = decoded == truth if decoded is not None else False
        _attach_oracle(report, truth, source.kind)
    report.wall_time_s = time.perf_counter() - start
    return report


def run_maximal(
    source: StatSource,
    ell: int,
    n: int,
    truth: SupportSet | None = None,
    seed: int = 0,
    model: str = "?",
) -> RecoveryReport:
    start = time.perf_counter()
    recovered = None
    error = None
    tee: list[int] = []
    table = SubsetStatTable(kind="membership-indicator", ell=ell)
    try:
        for i in range(1, n + 1):
            value = source.membership((i,))
            table.set((i,), value)
            if value:
                tee.append(i)
    except MixrecError as exc:
        error = {"stage": "stage1", "message": str(exc)}
    if error is None:
        cap = min(ell, len(tee))
        for s in range(2, cap + 1):
            for c in combinations(tee, s):
                try:
                    table.set(c, source.membership(c))
                except MixrecError as exc:
                    error = {"stage": "stage2", "subset": list(c), "message": str(exc)}
                    break
            if error:
                break
    if error is None:
        try:
            recovered = recover_maximal(table, ell)
        except MixrecError as exc:
            error = {"stage": "decode", "message": str(exc)}

    report = RecoveryReport(
        mode="maximal",
        model=model,
        ell=ell,
        n=n,
        seed=seed,
        recovered=_maximal_payload(recovered) if recovered is not None else [],
        union=list(tee),
        error=error,
        diagnostics=[
            {"stage": st, "subset": list(c), "value": _jsonable(v)}
            for st, c, v in source.queries
        ],
    )
    if truth is not None:
        report.truth = _maximal_payload(maximal_elements(truth))
        report.exact_match = (
            recovered == maximal_elements(truth) if recovered is not None else False
        )
        _attach_oracle(report, truth, source.kind)
    report.wall_time_s = time.perf_counter() - start
    return report


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    return v


def _attach_oracle(report: RecoveryReport, truth: SupportSet, kind: str) -> None:
    members = truth.members
    for entry in report.diagnostics:
        c = tuple(entry["subset"])
        value = entry["value"]
        if isinstance(value, bool):
            oracle = oracle_membership(members, c)
        elif kind == "intersection":
            oracle = oracle_intersection(members, c)
        else:
            oracle = oracle_union(members, c)
        entry["oracle"] = _jsonable(oracle)


# ---------------------------------------------------------------------------
# instance-level entry points


def build_source(
    instance: PlantedInstance,
    cfg: RunConfig,
    mode: str = "exact",
    samples=None,
) -> StatSource:
    """Wire the model-appropriate estimator stack for an instance."""
    if samples is None:
        samples = sample_model(instance, cfg.m, cfg.seed)
    n, ell, k = instance.n, instance.ell, instance.k

    if instance.model == "md":
        return MdSource(
            samples.x, instance.family, ell, instance.delta, cfg, n, k, mode=mode
        )
    if instance.model == "mlr":
        if mode == "maximal":
            if cfg.alpha_kind == "explicit":
                alphas = mlr.alpha_schedule("explicit", ell, explicit=cfg.alpha_values)
            elif cfg.alpha_kind == "gaussian":
                alphas = mlr.alpha_schedule(
                    "gaussian", ell, nu=instance.nu, eta=instance.eta, k=k
                )
            else:
                alphas = mlr.alpha_schedule("nonneg", ell, delta=instance.delta)
            return MlrThresholdSource(samples.x, samples.y, ell, alphas, cfg)
        if instance.binary:
            return MlrBinarySource(samples.x, samples.y, ell, cfg, n, k, mode=mode)
        params = {
            "delta": instance.delta,
            "R": instance.R,
            "Delta": instance.Delta if instance.Delta is not None else 0.5,
            "sigma": instance.sigma,
        }
        return MlrGeneralSource(samples.x, samples.y, params, cfg, n, ell, k)
    if instance.model == "mlc":
        a = cfg.a_override
        if a is None:
            a = mlc.conditioning_threshold(instance.R, instance.sigma, instance.delta, ell)
        x, y = mlc.negate_if_nonpositive(
            samples.x, samples.y, instance.sign_regime or "nonneg"
        )
        return MlcSource(x, y, ell, a, cfg, n, k, instance=instance, mode=mode)
    raise MixrecError(f"unknown model {instance.model!r}")


def _model_tag(instance: PlantedInstance) -> str:
    if instance.model == "mlr" and not instance.binary:
        return "mlr-general"
    return instance.model


def exact_recovery(
    instance: PlantedInstance, cfg: RunConfig, samples=None
) -> RecoveryReport:
    source = build_source(instance, cfg, mode="exact", samples=samples)
    report = run_exact(
        source,
        instance.ell,
        instance.n,
        truth=instance.supports(),
        seed=cfg.seed,
        model=_model_tag(instance),
    )
    report.sample_count = cfg.m
    return report


def maximal_recovery(
    instance: PlantedInstance, cfg: RunConfig, samples=None
) -> RecoveryReport:
    source = build_source(instance, cfg, mode="maximal", samples=samples)
    report = run_maximal(
        source,
        instance.ell,
        instance.n,
        truth=instance.supports(),
        seed=cfg.seed,
        model=_model_tag(instance),
    )
    report.sample_count = cfg.m
    return report


def plug_the_oracle(
    instance: PlantedInstance, mode: str = "exact", stat_kind: str = "intersection"
) -> RecoveryReport:
    """Run a pipeline with exact oracle statistics (combinatorics in isolation)."""
    source = OracleSource(instance, kind=stat_kind)
    run = run_exact if mode == "exact" else run_maximal
    report = run(
        source,
        instance.ell,
        instance.n,
        truth=instance.supports(),
        seed=instance.seed,
        model=f"oracle-{instance.model}",
    )
    return report
