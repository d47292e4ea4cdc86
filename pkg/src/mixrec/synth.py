"""Planted instances, samplers for the three observation models, and exact
brute-force oracles for every subset statistic.

The oracles enumerate the planted supports directly; they are the ground
truth that every estimator (and the decoding layer) is tested against.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from .errors import EnumerationBudgetError, InfeasibleInstanceError, MixrecError
from .moment_mixtures import MomentFamily
from .rng import derived_rng
from .supports import OccTable, SubsetStatTable, SupportSet, maximal_elements

MODELS = ("md", "mlr", "mlc")


@dataclass(frozen=True)
class PlantConfig:
    n: int
    k: int
    ell: int
    model: str = "md"
    delta: float = 1.0
    R: float | None = None
    sigma: float = 1.0
    family: str = "gaussian"
    upper: float | None = None
    binary: bool = False
    sign_regime: str | None = None  # 'nonneg' | 'nonpos' (Assumption 2)
    norms: tuple[float, ...] | None = None  # pin Euclidean norms per vector
    Delta: float | None = None  # required minimum norm gap (Assumption 3)
    nu: float | None = None  # Gaussian-entry regime scale
    eta: float | None = None  # prior failure probability for that regime
    support_size: str = "uniform"  # 'uniform' in [1..k], or 'exact' k
    support_sizes: tuple[int, ...] | None = None  # per-vector override
    supports: tuple[tuple[int, ...], ...] | None = None  # pin supports (1-based)
    allow_empty: bool = False
    seed: int = 0


@dataclass
class PlantedInstance:
    V: np.ndarray  # (ell, n)
    model: str
    k: int
    sigma: float
    delta: float
    R: float
    seed: int
    family: MomentFamily | None = None
    sign_regime: str | None = None
    Delta: float | None = None
    nu: float | None = None
    eta: float | None = None
    binary: bool = False

    @property
    def ell(self) -> int:
        return self.V.shape[0]

    @property
    def n(self) -> int:
        return self.V.shape[1]

    def supports(self) -> SupportSet:
        members = [frozenset(int(i) + 1 for i in np.flatnonzero(row)) for row in self.V]
        return SupportSet(n=self.n, members=members)

    def union_of_support(self) -> tuple[int, ...]:
        return tuple(sorted({i for s in self.supports().members for i in s}))

    def to_json(self) -> str:
        vectors = [
            {"indices": [int(i) + 1 for i in np.flatnonzero(row)],
             "values": [float(v) for v in row[np.flatnonzero(row)]]}
            for row in self.V
        ]
        obj = {
            "model": self.model,
            "n": self.n,
            "ell": self.ell,
            "k": self.k,
            "sigma": self.sigma,
            "delta": self.delta,
            "R": self.R,
            "seed": self.seed,
            "binary": self.binary,
            "sign_regime": self.sign_regime,
            "Delta": self.Delta,
            "nu": self.nu,
            "eta": self.eta,
            "vectors": vectors,
        }
        if self.family is not None:
            obj["family"] = {
                "name": self.family.name,
                "sigma": self.family.sigma,
                "upper": self.family.upper,
            }
        return json.dumps(obj, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PlantedInstance":
        obj = json.loads(text)
        v = np.zeros((obj["ell"], obj["n"]))
        for row, vec in zip(v, obj["vectors"]):
            for i, val in zip(vec["indices"], vec["values"]):
                row[i - 1] = val
        family = None
        if "family" in obj:
            f = obj["family"]
            family = MomentFamily(name=f["name"], sigma=f["sigma"], upper=f["upper"])
        return cls(
            V=v,
            model=obj["model"],
            k=obj["k"],
            sigma=obj["sigma"],
            delta=obj["delta"],
            R=obj["R"],
            seed=obj["seed"],
            family=family,
            sign_regime=obj.get("sign_regime"),
            Delta=obj.get("Delta"),
            nu=obj.get("nu"),
            eta=obj.get("eta"),
            binary=obj.get("binary", False),
        )


def plant(config: PlantConfig) -> PlantedInstance:
    """Draw a planted instance satisfying every requested assumption.

    Default nonzero magnitudes are uniform on [delta, R/sqrt(k)], which makes
    the norm bound hold by construction.  ``norms`` pins each vector's
    Euclidean norm exactly (equal-magnitude entries); ``nu``/``eta`` switch to
    i.i.d. N(0, nu^2) nonzeros.  The recorded delta/R are the realized
    (tight) bounds, so the instance always passes its own validator.
    """
    if config.model not in MODELS:
        raise MixrecError(f"unknown model {config.model!r}")
    if config.k > config.n or config.ell < 1 or config.k < 0:
        raise InfeasibleInstanceError("need 0 <= k <= n and ell >= 1")
    rng = derived_rng(config.seed, "plant")

    nonneg = (
        config.binary
        or config.sign_regime == "nonneg"
        or (config.model == "md" and config.family == "poisson")
    )
    if config.sign_regime == "nonpos" and (config.binary or config.family == "poisson"):
        raise InfeasibleInstanceError("nonpos sign regime conflicts with binary/poisson values")

    r_cap = config.R
    if r_cap is None:
        r_cap = config.delta * math.sqrt(max(config.k, 1)) * 2.0
    if not config.binary and config.norms is None and config.nu is None:
        if config.delta > r_cap / math.sqrt(max(config.k, 1)):
            raise InfeasibleInstanceError(
                f"magnitude range empty: delta={config.delta} exceeds R/sqrt(k)={r_cap / math.sqrt(max(config.k, 1)):.4g}"
            )
    if config.norms is not None and len(config.norms) != config.ell:
        raise InfeasibleInstanceError("norms must list one value per vector")

    if config.supports is not None and len(config.supports) != config.ell:
        raise InfeasibleInstanceError("supports must list one index set per vector")
    if config.support_sizes is not None and (
        len(config.support_sizes) != config.ell or max(config.support_sizes) > config.k
    ):
        raise InfeasibleInstanceError("support_sizes must list one size <= k per vector")

    v = np.zeros((config.ell, config.n))
    for j in range(config.ell):
        low = 0 if config.allow_empty else 1
        if config.supports is not None:
            idx = np.array([int(i) - 1 for i in config.supports[j]], dtype=int)
            size = idx.size
        else:
            if config.k == 0:
                size = 0
            elif config.support_sizes is not None:
                size = config.support_sizes[j]
            elif config.support_size == "exact":
                size = config.k
            else:
                size = int(rng.integers(low, config.k + 1))
            idx = (
                rng.choice(config.n, size=size, replace=False)
                if size
                else np.array([], dtype=int)
            )
        if size == 0:
            continue
        if config.binary:
            vals = np.ones(size)
        elif config.nu is not None:
            vals = rng.normal(0.0, config.nu, size=size)
            if nonneg:
                vals = np.abs(vals)
        elif config.norms is not None:
            mag = config.norms[j] / math.sqrt(size)
            signs = np.ones(size) if nonneg else rng.choice([-1.0, 1.0], size=size)
            vals = mag * signs
        else:
            mags = rng.uniform(config.delta, r_cap / math.sqrt(max(config.k, 1)), size=size)
            signs = np.ones(size) if nonneg else rng.choice([-1.0, 1.0], size=size)
            vals = mags * signs
        if config.sign_regime == "nonpos":
            vals = -np.abs(vals)
        v[j, idx] = vals

    nonzeros = np.abs(v[v != 0])
    realized_delta = float(nonzeros.min()) if nonzeros.size else config.delta
    norms = np.linalg.norm(v, axis=1)
    realized_r = float(norms.max()) if norms.size else 0.0

    realized_gap = _min_norm_gap(norms)
    if config.Delta is not None:
        if realized_gap is not None and realized_gap < config.Delta:
            raise InfeasibleInstanceError(
                f"requested norm gap {config.Delta} not met (realized {realized_gap:.4g}); "
                "pin norms to enforce Assumption 3"
            )

    family = None
    if config.model == "md":
        upper = config.upper
        if config.family == "uniform" and upper is None:
            upper = float(np.max(v)) + 1.0 if v.size else 1.0
        family = MomentFamily(
            name=config.family,
            sigma=config.sigma,
            upper=upper if upper is not None else 1.0,
        )
        if config.family == "uniform" and np.any(v >= family.upper):
            raise InfeasibleInstanceError("uniform family needs theta < upper for every entry")
        if config.family == "poisson" and np.any(v < 0):
            raise InfeasibleInstanceError("poisson family needs nonnegative parameters")

    instance = PlantedInstance(
        V=v,
        model=config.model,
        k=config.k,
        sigma=config.sigma,
        delta=realized_delta,
        R=max(realized_r, realized_delta),
        seed=config.seed,
        family=family,
        sign_regime=config.sign_regime,
        Delta=config.Delta if config.Delta is not None else realized_gap,
        nu=config.nu,
        eta=config.eta,
        binary=config.binary,
    )
    validate_instance(instance)
    return instance


def _min_norm_gap(norms) -> float | None:
    distinct = sorted(set(round(float(x), 12) for x in norms))
    if len(distinct) < 2:
        return None
    return min(b - a for a, b in zip(distinct[:-1], distinct[1:]))


def validate_instance(instance: PlantedInstance) -> None:
    """Check every declared assumption; failures name the violated one."""
    v = instance.V
    if np.any(np.count_nonzero(v, axis=1) > instance.k):
        raise InfeasibleInstanceError("sparsity violated: a vector has more than k nonzeros")
    nz = np.abs(v[v != 0])
    if nz.size and nz.min() < instance.delta - 1e-12:
        raise InfeasibleInstanceError(
            "Assumption 1 violated: a nonzero magnitude falls below delta"
        )
    if np.any(np.linalg.norm(v, axis=1) > instance.R + 1e-12):
        raise InfeasibleInstanceError("Assumption 1 violated: a vector norm exceeds R")
    if instance.sign_regime == "nonneg" and np.any(v < 0):
        raise InfeasibleInstanceError("Assumption 2 violated: negative entry in nonneg regime")
    if instance.sign_regime == "nonpos" and np.any(v > 0):
        raise InfeasibleInstanceError("Assumption 2 violated: positive entry in nonpos regime")
    if instance.Delta is not None:
        gap = _min_norm_gap(np.linalg.norm(v, axis=1))
        if gap is not None and gap < instance.Delta - 1e-12:
            raise InfeasibleInstanceError(
                "Assumption 3 violated: distinct norms closer than Delta"
            )
    if instance.binary and not np.all(np.isin(v, (0.0, 1.0))):
        raise InfeasibleInstanceError("binary instance has non-binary entries")


# ---------------------------------------------------------------------------
# samplers


@dataclass
class MDSamples:
    x: np.ndarray
    components: np.ndarray  # oracle-only side channel


@dataclass
class RegressionSamples:
    x: np.ndarray
    y: np.ndarray
    components: np.ndarray


@dataclass
class ClassifierSamples:
    x: np.ndarray
    y: np.ndarray
    components: np.ndarray


def sample_md(instance: PlantedInstance, m: int, seed: int) -> MDSamples:
    if instance.model != "md" or instance.family is None:
        raise MixrecError("sample_md: instance is not an MD instance")
    rng = derived_rng(seed, "samples")
    labels = rng.integers(0, instance.ell, size=m)
    theta = instance.V[labels]
    name = instance.family.name
    if name == "gaussian":
        x = theta + instance.family.sigma * rng.standard_normal(theta.shape)
    elif name == "poisson":
        x = rng.poisson(theta).astype(float)
    else:
        x = rng.uniform(theta, instance.family.upper)
    return MDSamples(x=x, components=labels)


def sample_mlr(instance: PlantedInstance, m: int, seed: int) -> RegressionSamples:
    if instance.model != "mlr":
        raise MixrecError("sample_mlr: instance is not an MLR instance")
    rng = derived_rng(seed, "samples")
    labels = rng.integers(0, instance.ell, size=m)
    x = rng.standard_normal((m, instance.n))
    y = np.einsum("ij,ij->i", x, instance.V[labels])
    if instance.sigma > 0:
        y = y + instance.sigma * rng.standard_normal(m)
    return RegressionSamples(x=x, y=y, components=labels)


def sample_mlc(instance: PlantedInstance, m: int, seed: int) -> ClassifierSamples:
    if instance.model != "mlc":
        raise MixrecError("sample_mlc: instance is not an MLC instance")
    rng = derived_rng(seed, "samples")
    labels = rng.integers(0, instance.ell, size=m)
    x = rng.standard_normal((m, instance.n))
    margin = np.einsum("ij,ij->i", x, instance.V[labels])
    if instance.sigma > 0:
        margin = margin + instance.sigma * rng.standard_normal(m)
    y = np.where(margin >= 0, 1, -1)
    return ClassifierSamples(x=x, y=y, components=labels)


def sample_model(instance: PlantedInstance, m: int, seed: int):
    return {"md": sample_md, "mlr": sample_mlr, "mlc": sample_mlc}[instance.model](
        instance, m, seed
    )


# ---------------------------------------------------------------------------
# exact oracles


def oracle_occ(supports, subset, pattern: str) -> int:
    c = sorted(int(i) for i in subset)
    count = 0
    for s in supports:
        if all((b == "1") == (i in s) for i, b in zip(c, pattern)):
            count += 1
    return count


def oracle_intersection(supports, subset) -> int:
    c = set(int(i) for i in subset)
    return sum(1 for s in supports if c <= s)


def oracle_union(supports, subset) -> int:
    c = set(int(i) for i in subset)
    return sum(1 for s in supports if c & s)


def oracle_membership(supports, subset) -> bool:
    return oracle_intersection(supports, subset) > 0


@dataclass
class OracleStats:
    occ: OccTable
    intersections: SubsetStatTable
    unions: SubsetStatTable
    membership: SubsetStatTable
    maximal: set[frozenset[int]]
    truth: SupportSet


def oracle_stats(
    instance: PlantedInstance, max_subset_size: int, budget: int = 2_000_000
) -> OracleStats:
    """Exact tables over the union of support (singletons over all of [n])."""
    truth = instance.supports()
    members = truth.members
    universe = instance.union_of_support()
    total = sum(
        math.comb(len(universe), s) * (2**s + 3)
        for s in range(0, max_subset_size + 1)
    )
    if total > budget:
        raise EnumerationBudgetError(
            f"oracle enumeration of {total} entries exceeds budget {budget}"
        )

    ell = instance.ell
    occ = OccTable(ell=ell, universe=universe)
    inter = SubsetStatTable(kind="intersection-count", ell=ell)
    union = SubsetStatTable(kind="union-count", ell=ell)
    member = SubsetStatTable(kind="membership-indicator", ell=ell)
    for i in range(1, instance.n + 1):
        inter.set((i,), oracle_intersection(members, (i,)))
        union.set((i,), oracle_union(members, (i,)))
        member.set((i,), oracle_membership(members, (i,)))
    for s in range(0, max_subset_size + 1):
        for c in combinations(universe, s):
            if s >= 1:
                inter.set(c, oracle_intersection(members, c))
                union.set(c, oracle_union(members, c))
                member.set(c, oracle_membership(members, c))
            for bits in product("01", repeat=s):
                a = "".join(bits)
                occ.set(c, a, oracle_occ(members, c, a))
    return OracleStats(
        occ=occ,
        intersections=inter,
        unions=union,
        membership=member,
        maximal=maximal_elements(truth),
        truth=truth,
    )
