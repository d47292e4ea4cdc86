"""Planted instances, samplers, and oracle self-consistency."""

import numpy as np
import pytest

from mixrec.errors import EnumerationBudgetError, InfeasibleInstanceError
from mixrec.supports import maximal_elements
from mixrec.synth import (
    PlantConfig,
    PlantedInstance,
    oracle_intersection,
    oracle_membership,
    oracle_occ,
    oracle_stats,
    oracle_union,
    plant,
    sample_md,
    sample_mlc,
    sample_mlr,
    validate_instance,
)


class TestPlant:
    def test_fully_constrained_binary(self):
        inst = plant(PlantConfig(n=3, k=3, ell=1, model="mlr", binary=True,
                                 delta=1.0, R=1.0, seed=0, support_size="exact"))
        assert np.array_equal(inst.V, np.ones((1, 3)))

    def test_nonneg_regime_floors_magnitudes(self):
        inst = plant(PlantConfig(n=6, k=3, ell=2, model="mlr", delta=0.5,
                                 sign_regime="nonneg", seed=1))
        nz = inst.V[inst.V != 0]
        assert np.all(nz >= 0.5)

    def test_seeded_draws_pass_validator(self):
        for seed in range(100):
            inst = plant(PlantConfig(n=12, k=3, ell=3, model="md", seed=seed))
            validate_instance(inst)  # raises on violation

    def test_infeasible_magnitude_range(self):
        with pytest.raises(InfeasibleInstanceError):
            plant(PlantConfig(n=4, k=4, ell=1, model="md", delta=2.0, R=1.0))

    def test_infeasible_norm_gap(self):
        with pytest.raises(InfeasibleInstanceError):
            plant(PlantConfig(n=6, k=2, ell=2, model="mlr", Delta=1.0,
                              norms=(1.0, 1.3), seed=3))

    def test_nonpos_conflicts_with_binary(self):
        with pytest.raises(InfeasibleInstanceError):
            plant(PlantConfig(n=4, k=2, ell=1, model="mlr", binary=True,
                              sign_regime="nonpos"))

    def test_poisson_forces_nonneg(self):
        inst = plant(PlantConfig(n=6, k=3, ell=2, model="md", family="poisson", seed=4))
        assert np.all(inst.V >= 0)

    def test_gaussian_entry_regime_records_eta(self):
        inst = plant(PlantConfig(n=8, k=3, ell=2, model="mlr", nu=1.0, eta=0.05, seed=5))
        assert inst.nu == 1.0 and inst.eta == 0.05

    def test_json_round_trip(self):
        inst = plant(PlantConfig(n=6, k=2, ell=2, model="md", seed=6))
        back = PlantedInstance.from_json(inst.to_json())
        assert np.allclose(back.V, inst.V)
        assert back.family.name == inst.family.name
        assert back.delta == inst.delta

    def test_validator_pinpoints_assumption(self):
        inst = plant(PlantConfig(n=5, k=2, ell=2, model="mlr", sign_regime="nonneg", seed=7))
        broken = PlantedInstance(
            V=-np.abs(inst.V), model=inst.model, k=inst.k, sigma=inst.sigma,
            delta=inst.delta, R=inst.R, seed=inst.seed, sign_regime="nonneg",
        )
        with pytest.raises(InfeasibleInstanceError, match="Assumption 2"):
            validate_instance(broken)


class TestSamplers:
    def test_noiseless_mlr_is_exact(self):
        inst = plant(PlantConfig(n=4, k=2, ell=1, model="mlr", sigma=0.0, seed=8))
        s = sample_mlr(inst, 1000, 0)
        assert np.allclose(s.y, s.x @ inst.V[0])

    def test_md_gaussian_means_converge(self):
        inst = plant(PlantConfig(n=4, k=2, ell=1, model="md", sigma=1.0, seed=9))
        s = sample_md(inst, 200_000, 1)
        assert np.allclose(s.x.mean(axis=0), inst.V[0], atol=0.02)

    def test_mlc_pure_noise_labels_uniform(self):
        inst = plant(PlantConfig(n=3, k=0, ell=1, model="mlc", sigma=1.0,
                                 allow_empty=True, seed=10))
        s = sample_mlc(inst, 100_000, 2)
        assert set(np.unique(s.y)) == {-1, 1}
        assert abs((s.y == 1).mean() - 0.5) < 0.01

    def test_side_channel_labels_match_components(self):
        inst = plant(PlantConfig(n=5, k=2, ell=3, model="md", sigma=0.5, seed=11))
        s = sample_md(inst, 150_000, 3)
        # conditional means per recorded component track the planted vectors
        for j in range(3):
            mask = s.components == j
            assert np.allclose(s.x[mask].mean(axis=0), inst.V[j], atol=0.05)

    def test_mlr_conditional_variance(self):
        inst = plant(PlantConfig(n=5, k=2, ell=2, model="mlr", sigma=0.7, seed=12))
        s = sample_mlr(inst, 200_000, 4)
        for j in range(2):
            mask = s.components == j
            expect = np.linalg.norm(inst.V[j]) ** 2 + 0.49
            var = s.y[mask].var()
            assert var == pytest.approx(expect, rel=0.05)

    def test_wrong_model_rejected(self):
        inst = plant(PlantConfig(n=4, k=2, ell=1, model="md", seed=13))
        with pytest.raises(Exception):
            sample_mlr(inst, 10, 0)


class TestOracles:
    def test_single_support_occ(self):
        members = [frozenset({1, 2})]
        assert oracle_occ(members, (1, 2), "11") == 1
        for pattern in ("00", "01", "10"):
            assert oracle_occ(members, (1, 2), pattern) == 0

    def test_union_example(self):
        members = [frozenset({1, 2}), frozenset({2, 3})]
        assert oracle_union(members, (1, 3)) == 2

    def test_maximal_nested(self):
        members = [frozenset({1, 2, 3}), frozenset({1, 2})]
        assert maximal_elements(members) == {frozenset({1, 2, 3})}

    def test_oracle_stats_self_consistency(self, corpus):
        for inst in corpus[:40]:
            stats = oracle_stats(inst, 3)
            stats.occ.validate()
            members = inst.supports().members
            for c in stats.intersections.entries:
                assert stats.intersections.get(c) == oracle_intersection(members, c)
                assert stats.unions.get(c) == oracle_union(members, c)
                assert stats.membership.get(c) == oracle_membership(members, c)

    def test_budget_exceeded(self):
        inst = plant(PlantConfig(n=12, k=4, ell=4, model="md", seed=14, support_size="exact"))
        with pytest.raises(EnumerationBudgetError):
            oracle_stats(inst, 12, budget=10)
