"""Acceptance gate: one test per criterion, one pass/fail line each.

Every tolerance and sample size is pinned here.  Monte-Carlo criteria use
fixed seeds, so reruns are byte-for-byte repeatable.  Run with `-s` to see
the per-criterion lines and the calibration curves.
"""

import json
import math
import time
from itertools import combinations, product

import numpy as np
import pytest

from mixrec.classifier_mixtures import conditioning_threshold, decoding_bands
from mixrec.errors import MixrecError
from mixrec.estimators import EstimatorConfig, median_of_means
from mixrec.moment_mixtures import (
    MomentFamily,
    analytic_product_moment,
    analytic_power_sum,
    elementary_symmetric,
    zeta,
)
from mixrec.pipeline import MlcSource, RunConfig, maximal_recovery, plug_the_oracle
from mixrec.regression_mixtures import (
    GeneralUnionConfig,
    LearnConfig,
    general_union_details,
    intersection_count_mlr_binary,
)
from mixrec.rng import derived_rng
from mixrec.supports import (
    intersections_from_unions,
    occ_from_intersections,
)
from mixrec.synth import (
    PlantConfig,
    oracle_intersection,
    oracle_occ,
    oracle_stats,
    oracle_union,
    plant,
    sample_mlr,
)


def _report(number: int, ok: bool, detail: str) -> None:
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {number}: {status} - {detail}")
    assert ok, f"criterion {number}: {detail}"


@pytest.fixture(scope="module")
def big_corpus():
    instances = []
    rng = np.random.default_rng(424242)
    for trial in range(1000):
        n = int(rng.integers(3, 13))
        ell = int(rng.integers(1, 5))
        k = int(rng.integers(1, min(n, 4) + 1))
        instances.append(
            plant(
                PlantConfig(
                    n=n, k=k, ell=ell, model="md", seed=31000 + trial,
                    allow_empty=(trial % 11 == 0),
                )
            )
        )
    return instances


def test_criterion_1_combinatorial_exactness(big_corpus):
    start = time.perf_counter()
    exact_ok = maximal_ok = 0
    for inst in big_corpus:
        exact_ok += bool(plug_the_oracle(inst, "exact").exact_match)
        maximal_ok += bool(plug_the_oracle(inst, "maximal").exact_match)
    elapsed = time.perf_counter() - start
    ok = exact_ok == 1000 and maximal_ok == 1000 and elapsed < 10.0
    _report(
        1,
        ok,
        f"plug-the-oracle exact {exact_ok}/1000, maximal {maximal_ok}/1000 "
        f"on p-identifiable instances in {elapsed:.2f}s (< 10 s)",
    )


def test_criterion_2_lemma3_round_trips(big_corpus):
    checked = 0
    for inst in big_corpus:
        members = inst.supports().members
        p = int(math.floor(math.log2(inst.ell)))
        stats = oracle_stats(inst, min(p + 1, 3))
        universe = stats.occ.universe
        for s in range(0, min(p + 1, len(universe)) + 1):
            for c in combinations(universe, s):
                if s >= 1 and intersections_from_unions(stats.unions, c) != \
                        oracle_intersection(members, c):
                    _report(2, False, f"union inversion mismatch at {c}")
                for bits in product("01", repeat=s):
                    a = "".join(bits)
                    if occ_from_intersections(stats.intersections, c, a) != \
                            oracle_occ(members, c, a):
                        _report(2, False, f"occ mismatch at {c}, {a}")
                    checked += 1
    _report(2, True, f"occ/intersection/union conversions exact on {checked} patterns")


def test_criterion_3_newton_moment_algebra():
    # Newton round-trip, ell <= 6
    rng = np.random.default_rng(5150)
    worst_rt = 0.0
    for _ in range(200):
        ell = int(rng.integers(1, 7))
        values = rng.uniform(0.1, 3.0, size=ell)
        p = np.array([np.sum(values**t) for t in range(1, ell + 1)])
        a = np.concatenate([[1.0], elementary_symmetric(p)])
        back = np.empty(ell)
        for t in range(1, ell + 1):
            acc = t * a[t]
            for q in range(1, t):
                acc -= (-1) ** (q + 1) * a[t - q] * back[q - 1]
            back[t - 1] = acc * (-1) ** (t + 1)
        worst_rt = max(worst_rt, float(np.max(np.abs(back - p) / np.abs(p))))
    newton_ok = worst_rt <= 1e-9

    # moment-polynomial identity, all three families, z <= 2*ell, |C| <= 3
    families = [
        MomentFamily("gaussian", sigma=1.1),
        MomentFamily("poisson"),
        MomentFamily("uniform", upper=4.0),
    ]
    worst_id = 0.0
    for family in families:
        for ell in (1, 2, 3):
            v = rng.uniform(0.2, 1.5, size=(ell, 5))
            v[:, 0] = 0.0
            for size in (1, 2, 3):
                subset = tuple(range(2, 2 + size))
                for z in product(range(2 * ell + 1), repeat=size):
                    lhs = ell * analytic_product_moment(family, v, subset, z)
                    rhs = sum(
                        zeta(family, z, u) * analytic_power_sum(v, subset, u)
                        for u in product(*(range(zi + 1) for zi in z))
                    )
                    scale = max(abs(lhs), abs(rhs), 1e-12)
                    worst_id = max(worst_id, abs(lhs - rhs) / scale)
    identity_ok = worst_id <= 1e-9
    _report(
        3,
        newton_ok and identity_ok,
        f"Newton round-trip rel err {worst_rt:.2e} <= 1e-9; "
        f"moment identity rel err {worst_id:.2e} <= 1e-9 "
        f"(gaussian/poisson/uniform, z <= 2*ell, |C| <= 3)",
    )


def test_criterion_4_md_end_to_end():
    # ell=2 Gaussian, n=20, k=3, sigma=1, delta=1; pairwise-indicator route
    # (for these instances maximal recovery coincides with exact recovery:
    # distinct same-size supports, so the maximal antichain is the multiset)
    def run(m: int) -> int:
        wins = 0
        for s in range(20):
            inst = plant(
                PlantConfig(
                    n=20, k=3, ell=2, model="md", delta=1.0, R=math.sqrt(3.0),
                    sigma=1.0, seed=900 + s, support_size="exact",
                )
            )
            assert inst.supports().members[0] != inst.supports().members[1]
            report = maximal_recovery(inst, RunConfig(m=m, gamma=0.05, seed=s))
            wins += bool(report.exact_match and len(report.recovered) == 2)
        return wins

    curve = [(m, run(m)) for m in (10_000, 30_000, 100_000, 300_000)]
    print("  success-vs-m curve:", ", ".join(f"m={m}: {w}/20" for m, w in curve))
    calibrated_m, wins = curve[2]
    _report(
        4,
        wins >= 19,
        f"exact support recovery {wins}/20 >= 19/20 at calibrated m={calibrated_m}"
        f" (<= 1e6)",
    )


def test_criterion_5_mlc_decoding():
    # band-disjointness arithmetic, ell <= 16
    for ell in range(1, 17):
        bands = decoding_bands(ell)
        for t in range(ell):
            assert bands[t + 1][0] - bands[t][1] >= 1.0 / (4 * ell) - 1e-12

    inst = plant(
        PlantConfig(
            n=4, k=1, ell=2, model="mlc", delta=2.0, sigma=1.0, seed=13,
            supports=((1,), (2,)), norms=(2.0, 2.0), sign_regime="nonneg",
        )
    )
    members = inst.supports().members
    a = conditioning_threshold(inst.R, inst.sigma, inst.delta, inst.ell)
    floor = 10 * inst.ell**2 * math.log(1 / 0.05)
    target = 4000
    assert target >= floor
    subsets = [c for r in (1, 2) for c in combinations(range(1, 5), r)]
    wins = 0
    for seed in range(20):
        source = MlcSource(
            np.zeros((0, 4)), np.zeros(0), 2, a,
            RunConfig(m=150_000, seed=seed, conditioned_target=target),
            4, 1, instance=inst,
        )
        ok = all(source.count(c) == oracle_union(members, c) for c in subsets)
        assert all(source.conditioned_sizes[c] >= target for c in subsets)
        wins += ok
    _report(
        5,
        wins >= 19,
        f"union counts for all |C|<=2 correct in {wins}/20 seeds >= 19/20 "
        f"with >= {target} (>= {floor:.0f}) conditioned samples per subset; "
        f"band gaps >= 1/(4*ell) for all ell <= 16",
    )


def test_criterion_6_mlr_binary():
    corpus = [
        plant(PlantConfig(n=10, k=2, ell=2, model="mlr", binary=True, sigma=0.5,
                          seed=17, supports=((1, 2), (2, 3)))),
        plant(PlantConfig(n=10, k=2, ell=3, model="mlr", binary=True, sigma=0.5,
                          seed=18, supports=((1, 2), (2, 3), (1, 3)))),
    ]
    # statistic within 3 standard errors of |∩|/ell at m = 1e6, all |C| <= 3
    m = 1_000_000
    worst_z = 0.0
    for inst in corpus:
        members = inst.supports().members
        s = sample_mlr(inst, m, 999)
        universe = sorted({i for mem in members for i in mem})
        for r in (1, 2, 3):
            for c in combinations(universe, r):
                stat = np.asarray(s.y, dtype=float) ** r
                for i in c:
                    stat = stat * s.x[:, i - 1]
                stat = stat / math.factorial(r)
                se = stat.std() / math.sqrt(m)
                z = abs(stat.mean() - oracle_intersection(members, c) / inst.ell) / se
                worst_z = max(worst_z, z)
    stat_ok = worst_z <= 3.0

    # rounded counts exact, >= 95% over 20 seeds
    wins = 0
    for seed in range(20):
        ok = True
        for inst in corpus:
            members = inst.supports().members
            s = sample_mlr(inst, m, 200 + seed)
            universe = sorted({i for mem in members for i in mem})
            for r in (1, 2, 3):
                for c in combinations(universe, r):
                    if intersection_count_mlr_binary(s.x, s.y, c, inst.ell) != \
                            oracle_intersection(members, c):
                        ok = False
        wins += ok
    _report(
        6,
        stat_ok and wins >= 19,
        f"product statistic within 3 SE of |∩|/ell (worst z={worst_z:.2f}) at m=1e6;"
        f" rounded counts exact in {wins}/20 seeds >= 19/20",
    )


# calibrated parameters for the general-MLR matcher (see README caveat)
M7 = 4_000_000
CFG7 = dict(alpha=0.45, epsilon=0.045, draws=7, min_ratio=3.5)


def _general_sweep(inst, ell, subsets, seeds, m=M7, alpha=None, epsilon=None):
    members = inst.supports().members
    truth = {c: oracle_union(members, c) for c in subsets}
    per_subset = {c: 0 for c in subsets}
    for seed in range(seeds):
        s = sample_mlr(inst, m, 100 + seed)
        base = None
        for c in subsets:
            cfg = GeneralUnionConfig(
                alpha=alpha if alpha is not None else CFG7["alpha"],
                epsilon=epsilon if epsilon is not None else CFG7["epsilon"],
                draws=CFG7["draws"],
                min_ratio=CFG7["min_ratio"],
                seed=seed,
                learn=LearnConfig(seed=seed, restarts=1, bins=2048),
            )
            try:
                result = general_union_details(
                    s.x, s.y, c, ell, inst.delta, inst.R, inst.Delta, inst.sigma,
                    0.05, cfg, base_model=base,
                )
                base = result.base
                per_subset[c] += result.count == truth[c]
            except MixrecError:
                pass
    return per_subset


def test_criterion_7_mlr_general():
    # well-separated: variance ratio >= 4 between distinct norms, ell <= 3
    inst_a = plant(
        PlantConfig(n=7, k=5, ell=2, model="mlr", delta=1.0, sigma=0.1, seed=2,
                    supports=((1,), (2, 3, 4, 5, 6)), norms=(1.0, math.sqrt(5.0)),
                    sign_regime="nonneg")
    )
    inst_b = plant(
        PlantConfig(n=7, k=5, ell=3, model="mlr", delta=1.0, sigma=0.1, seed=3,
                    supports=((1,), (1,), (2, 3, 4, 5, 6)),
                    norms=(1.0, 1.0, math.sqrt(5.0)), sign_regime="nonneg")
    )
    assert np.allclose(inst_b.V[0], inst_b.V[1])
    for inst in (inst_a, inst_b):
        variances = sorted({round(float(x), 9) for x in
                            np.linalg.norm(inst.V, axis=1) ** 2 + inst.sigma**2})
        assert variances[1] / variances[0] >= 4.0

    # representative subsets: small-norm hit, big-norm hit, null, double hit
    subsets = [(1,), (2,), (7,), (1, 2)]
    seeds = 20
    results = {}
    for tag, inst, ell in (("ell=2", inst_a, 2), ("ell=3", inst_b, 3)):
        results[tag] = _general_sweep(inst, ell, subsets, seeds)
        print(f"  {tag}: per-subset successes over {seeds} seeds:",
              {str(list(c)): w for c, w in results[tag].items()})
    worst = min(min(r.values()) for r in results.values())
    ok = worst >= math.ceil(0.9 * seeds)
    _report(
        7,
        ok,
        f"general-MLR union counts: worst per-subset success {worst}/{seeds} "
        f">= {math.ceil(0.9 * seeds)}/{seeds} on ratio>=4 instances "
        f"(alpha={CFG7['alpha']}, epsilon={CFG7['epsilon']}, draws={CFG7['draws']},"
        f" min_ratio={CFG7['min_ratio']}, m={M7})",
    )

    # documented learner limitation: reduced separation (ratio ~ 1.7)
    weak = plant(
        PlantConfig(n=7, k=5, ell=2, model="mlr", delta=1.0, sigma=0.1, seed=4,
                    supports=((1,), (2, 3)), norms=(1.0, 1.3), sign_regime="nonneg")
    )
    weak_result = _general_sweep(weak, 2, [(1,), (2,)], 5)
    print(
        "  reduced separation (variance ratio ~1.7, not asserted): per-subset",
        {str(list(c)): f"{w}/5" for c, w in weak_result.items()},
        "- EM substitute degrades below the ratio-4 regime, as documented",
    )


def test_criterion_8_median_of_means_coverage():
    gamma = 0.05
    b = EstimatorConfig.from_failure_prob(gamma).batches
    eps = 0.15
    m = b * 1200
    failures = 0
    for seed in range(500):
        x = derived_rng(seed, "trial", 5).standard_t(2.1, size=m)
        failures += abs(median_of_means(x, b)) > eps
    rate = failures / 500
    _report(
        8,
        rate <= gamma + 0.03,
        f"median-of-means empirical failure rate {rate:.3f} <= gamma+0.03 = "
        f"{gamma + 0.03:.2f} on t(2.1) tails (500 trials, B={b})",
    )


def test_criterion_9_determinism(tmp_path):
    from mixrec.cli import main

    cfg = {
        "instance": {"n": 10, "k": 3, "ell": 2, "model": "md", "delta": 1.0,
                     "R": math.sqrt(3), "sigma": 1.0, "seed": 6,
                     "support_size": "exact"},
        "run": {"m": 100000, "gamma": 0.05, "seed": 7},
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))

    r1, r2 = tmp_path / "r1.json", tmp_path / "r2.json"
    rc = main(["recover", "--mode", "maximal", "--config", str(cfg_path), "--out", str(r1)])
    main(["recover", "--mode", "maximal", "--config", str(cfg_path), "--out", str(r2)])
    recover_same = rc == 0 and r1.read_bytes() == r2.read_bytes()

    b1, b2 = tmp_path / "b1.csv", tmp_path / "b2.csv"
    for out in (b1, b2):
        main(["bench", "--mode", "maximal", "--config", str(cfg_path),
              "--m-grid", "5e4,1e5", "--seeds", "3", "--out", str(out)])
    bench_same = b1.read_bytes() == b2.read_bytes()
    _report(
        9,
        recover_same and bench_same,
        "repeated recover and bench runs with identical seeds produced "
        "byte-identical JSON/CSV outputs",
    )
