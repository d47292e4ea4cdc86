"""Combinatorial support-decoding layer.

Everything here is exact integer arithmetic over subset statistics: converting
intersection/union counts into occ-counts, peeling the occ table into the
multiset of supports, and computing maximal supports from membership
indicators.  Indices are 1-based throughout, matching the serialized forms.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations, product

from .errors import (
    IncompleteStatisticsError,
    InconsistentStatisticsError,
    NotIdentifiableError,
)

IndexSet = tuple[int, ...]


def _key(subset) -> IndexSet:
    return tuple(sorted(int(i) for i in subset))


# ---------------------------------------------------------------------------
# domain types


@dataclass
class SupportSet:
    """Multiset of supports of the ``ell`` hidden vectors over [1..n]."""

    n: int
    members: list[frozenset[int]]

    @property
    def ell(self) -> int:
        return len(self.members)

    def multiset(self) -> Counter:
        return Counter(self.members)

    def validate(self, k: int | None = None) -> None:
        for s in self.members:
            if any(i < 1 or i > self.n for i in s):
                raise ValueError(f"support index outside [1..{self.n}]: {sorted(s)}")
            if k is not None and len(s) > k:
                raise ValueError(f"support larger than k={k}: {sorted(s)}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, SupportSet):
            return NotImplemented
        return self.n == other.n and self.multiset() == other.multiset()

    def to_json(self) -> str:
        members = sorted(sorted(s) for s in self.members)
        return json.dumps({"n": self.n, "supports": members})

    @classmethod
    def from_json(cls, text: str) -> "SupportSet":
        obj = json.loads(text)
        return cls(n=obj["n"], members=[frozenset(s) for s in obj["supports"]])


@dataclass
class OccTable:
    """Map (C, a) -> occ(C, a), the number of vectors matching pattern a on C."""

    ell: int
    universe: IndexSet
    entries: dict[tuple[IndexSet, str], int] = field(default_factory=dict)

    def get(self, subset, pattern: str) -> int:
        key = (_key(subset), pattern)
        if key not in self.entries:
            raise IncompleteStatisticsError("occ", key[0])
        return self.entries[key]

    def set(self, subset, pattern: str, count: int) -> None:
        subset = _key(subset)
        if len(pattern) != len(subset):
            raise ValueError("pattern length must equal subset size")
        self.entries[(subset, pattern)] = int(count)

    def sizes(self) -> set[int]:
        return {len(c) for c, _ in self.entries}

    def validate(self) -> None:
        """Row sums equal ell; refinement additivity wherever both levels exist."""
        by_subset: dict[IndexSet, dict[str, int]] = {}
        for (c, a), v in self.entries.items():
            if v < 0 or v > self.ell:
                raise InconsistentStatisticsError(c, v, self.ell)
            by_subset.setdefault(c, {})[a] = v
        for c, row in by_subset.items():
            if len(row) == 2 ** len(c) and sum(row.values()) != self.ell:
                raise InconsistentStatisticsError(c, sum(row.values()), self.ell)
        for c, row in by_subset.items():
            for j in self.universe:
                if j in c:
                    continue
                cj = _key(c + (j,))
                if cj not in by_subset:
                    continue
                pos = cj.index(j)
                for a, v in row.items():
                    children = [a[:pos] + b + a[pos:] for b in "01"]
                    if all(ch in by_subset[cj] for ch in children):
                        total = sum(by_subset[cj][ch] for ch in children)
                        if total != v:
                            raise InconsistentStatisticsError(cj, total, self.ell)

    def to_json(self) -> str:
        entries = sorted(
            ([list(c), a, v] for (c, a), v in self.entries.items()),
            key=lambda e: (len(e[0]), e[0], e[1]),
        )
        return json.dumps(
            {"ell": self.ell, "universe": list(self.universe), "entries": entries}
        )

    @classmethod
    def from_json(cls, text: str) -> "OccTable":
        obj = json.loads(text)
        table = cls(ell=int(obj["ell"]), universe=_key(obj["universe"]))
        for c, a, v in obj["entries"]:
            table.set(c, a, v)
        return table


STAT_KINDS = ("intersection-count", "union-count", "membership-indicator")


@dataclass
class SubsetStatTable:
    """Map C -> |∩ S(i)|, |∪ S(i)| or 1[|∩ S(i)| > 0], for subsets C."""

    kind: str
    ell: int
    entries: dict[IndexSet, int | bool] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in STAT_KINDS:
            raise ValueError(f"unknown table kind {self.kind!r}")

    def get(self, subset):
        key = _key(subset)
        if key == () and self.kind == "intersection-count":
            return self.ell
        if key == () and self.kind == "membership-indicator":
            return self.ell > 0
        if key not in self.entries:
            raise IncompleteStatisticsError(self.kind, key)
        return self.entries[key]

    def set(self, subset, value) -> None:
        if self.kind == "membership-indicator":
            self.entries[_key(subset)] = bool(value)
        else:
            self.entries[_key(subset)] = int(value)

    def universe(self) -> IndexSet:
        return _key({i for c in self.entries for i in c})

    def validate(self) -> None:
        """Range and monotonicity: intersections shrink and unions grow under supersets."""
        for c, v in self.entries.items():
            if self.kind != "membership-indicator" and not 0 <= v <= self.ell:
                raise InconsistentStatisticsError(c, v, self.ell)
            for d, w in self.entries.items():
                if set(c) < set(d):
                    if self.kind == "intersection-count" and w > v:
                        raise InconsistentStatisticsError(d, w, self.ell)
                    if self.kind == "union-count" and w < v:
                        raise InconsistentStatisticsError(d, w, self.ell)
                    if self.kind == "membership-indicator" and w and not v:
                        raise InconsistentStatisticsError(d, int(w), self.ell)

    def to_json(self) -> str:
        entries = sorted(
            ([list(c), v] for c, v in self.entries.items()),
            key=lambda e: (len(e[0]), e[0]),
        )
        return json.dumps({"kind": self.kind, "ell": self.ell, "entries": entries})

    @classmethod
    def from_json(cls, text: str) -> "SubsetStatTable":
        obj = json.loads(text)
        table = cls(kind=obj["kind"], ell=int(obj["ell"]))
        for c, v in obj["entries"]:
            table.set(c, v)
        return table


# ---------------------------------------------------------------------------
# occ-count conversions (inclusion-exclusion)


def occ_from_intersections(stats: SubsetStatTable, subset, pattern: str) -> int:
    """occ(C, a) from intersection counts of all subsets of C.

    occ(C, a) = sum over D ⊆ C0 of (-1)^|D| |∩_{i in C1 ∪ D} S(i)| where C1 is
    the positions of 1s in ``pattern`` and C0 = C \\ C1.
    """
    if stats.kind != "intersection-count":
        raise ValueError("table kind must be intersection-count")
    c = _key(subset)
    if len(pattern) != len(c):
        raise ValueError("pattern length must equal subset size")
    ones = tuple(i for i, b in zip(c, pattern) if b == "1")
    zeros = tuple(i for i, b in zip(c, pattern) if b == "0")
    total = 0
    for r in range(len(zeros) + 1):
        for d in combinations(zeros, r):
            total += (-1) ** r * stats.get(ones + d)
    return total


def intersections_from_unions(stats: SubsetStatTable, subset) -> int:
    """|∩_{i in C} S(i)| by Möbius inversion of the union counts over C."""
    if stats.kind != "union-count":
        raise ValueError("table kind must be union-count")
    c = _key(subset)
    if not c:
        return stats.ell
    total = 0
    for r in range(1, len(c) + 1):
        for d in combinations(c, r):
            total += (-1) ** (r + 1) * stats.get(d)
    if total < 0 or total > stats.ell:
        raise InconsistentStatisticsError(c, total, stats.ell)
    return total


def intersection_table_from_unions(stats: SubsetStatTable) -> SubsetStatTable:
    """Convert a full union-count table into an intersection-count table."""
    out = SubsetStatTable(kind="intersection-count", ell=stats.ell)
    for c in stats.entries:
        out.set(c, intersections_from_unions(stats, c))
    return out


def occ_table_from_intersections(
    stats: SubsetStatTable, universe, sizes, ell: int
) -> OccTable:
    """Build the occ table over ``universe`` at the given subset sizes."""
    universe = _key(universe)
    table = OccTable(ell=ell, universe=universe)
    for s in sorted(set(sizes)):
        for c in combinations(universe, s):
            for bits in product("01", repeat=s):
                a = "".join(bits)
                table.set(c, a, occ_from_intersections(stats, c, a))
    return table


# ---------------------------------------------------------------------------
# support recovery from occ-counts


def _insert_bit(c: IndexSet, pattern: str, j: int, bit: str) -> tuple[IndexSet, str]:
    cj = _key(c + (j,))
    pos = cj.index(j)
    return cj, pattern[:pos] + bit + pattern[pos:]


def recover_supports(occ: OccTable, ell: int, p: int | None = None, n: int | None = None) -> SupportSet:
    """Decode the exact multiset of supports from occ-counts.

    Peels one support at a time: a pattern (C, a) with occ(C, a) = w > 0 is
    expanded when occ(C ∪ {j}, (a,1)) is 0 or w for every j outside C, which
    forces all w matching vectors to share one support.  Patterns are scanned
    in lexicographic C then lexicographic a order, so multiplicity assignment
    is deterministic.

    ``occ`` must hold exact counts at sizes p and p+1 over its universe (all
    sizes up to the universe size when the universe is smaller than p+1).
    Raises :class:`NotIdentifiableError` if no pattern is expandable while
    vectors remain.
    """
    if p is None:
        p = int(math.floor(math.log2(ell))) if ell >= 1 else 0
    universe = occ.universe
    n = n if n is not None else (max(universe) if universe else 0)

    if len(universe) <= p:
        # Every support lives inside a universe no bigger than p: the full
        # pattern row on the universe already lists the supports.
        c = universe
        members: list[frozenset[int]] = []
        for bits in product("01", repeat=len(c)):
            a = "".join(bits)
            w = occ.get(c, a)
            if w > 0:
                members.extend([frozenset(i for i, b in zip(c, a) if b == "1")] * w)
        if len(members) != ell:
            raise NotIdentifiableError(p, len(members), ell)
        return SupportSet(n=n, members=members)

    work = dict(occ.entries)

    def lookup(c: IndexSet, a: str) -> int:
        if (c, a) not in work:
            raise IncompleteStatisticsError("occ", c)
        return work[(c, a)]

    level_p = sorted({c for (c, _) in work if len(c) == p})
    members = []
    count = 1
    while count <= ell:
        found = None
        for c in level_p:
            for bits in product("01", repeat=p):
                a = "".join(bits)
                w = work.get((c, a), 0)
                if w <= 0:
                    continue
                ok = True
                for j in universe:
                    if j in c:
                        continue
                    cj, aj = _insert_bit(c, a, j, "1")
                    if lookup(cj, aj) not in (0, w):
                        ok = False
                        break
                if ok:
                    found = (c, a, w)
                    break
            if found:
                break
        if found is None:
            raise NotIdentifiableError(p, count - 1, ell)

        c, a, w = found
        support = {i for i, b in zip(c, a) if b == "1"}
        for j in universe:
            if j in c:
                continue
            cj, aj = _insert_bit(c, a, j, "1")
            if lookup(cj, aj) == w:
                support.add(j)
        support = frozenset(support)
        members.extend([support] * w)

        for (s, t) in list(work):
            matches = all(
                (b == "1") == (i in support) for i, b in zip(s, t)
            )
            if matches:
                work[(s, t)] -= w
        count += w

    return SupportSet(n=n, members=members)


# ---------------------------------------------------------------------------
# p-identifiability


def is_p_identifiable(matrix, p: int) -> tuple[bool, list[tuple[int, IndexSet, str]]]:
    """Greedy peeling check with a certificate.

    ``matrix`` is an n×m binary array-like with distinct columns (rows are
    1-based indices in the certificate).  Returns ``(ok, certificate)`` where
    the certificate lists ``(column, witness_rows, witness_pattern)`` in peel
    order; on failure the certificate covers the columns peeled before the
    search stalled.

    Greedy is complete here: deleting columns never destroys a witness, so a
    submatrix with no identifiable column can never be unlocked by peeling in
    a different order.
    """
    import numpy as np

    a = np.asarray(matrix, dtype=bool)
    n, m = a.shape
    cols = [tuple(bool(x) for x in a[:, j]) for j in range(m)]
    if len(set(cols)) != m:
        raise ValueError("columns must be distinct")

    remaining = list(range(m))
    certificate: list[tuple[int, IndexSet, str]] = []
    while remaining:
        peeled = None
        for col in remaining:
            witness = _find_witness(cols, remaining, col, p)
            if witness is not None:
                peeled = (col, *witness)
                break
        if peeled is None:
            return False, certificate
        certificate.append(peeled)
        remaining.remove(peeled[0])
    return True, certificate


def _find_witness(cols, remaining, col, p):
    others = [c for c in remaining if c != col]
    if not others:
        return (), ""
    target = cols[col]
    # Rows where some other column disagrees with col; other rows discriminate
    # nothing.
    useful = [r for r in range(len(target)) if any(cols[o][r] != target[r] for o in others)]
    for size in range(1, p + 1):
        for rows in combinations(useful, size):
            if all(any(cols[o][r] != target[r] for r in rows) for o in others):
                pattern = "".join("1" if target[r] else "0" for r in rows)
                return tuple(r + 1 for r in rows), pattern
    return None


# ---------------------------------------------------------------------------
# maximal supports


def maximal_elements(supports) -> set[frozenset[int]]:
    """The unique antichain of ⊆-maximal supports, duplicates collapsed."""
    members = supports.members if isinstance(supports, SupportSet) else list(supports)
    unique = sorted({frozenset(s) for s in members}, key=len, reverse=True)
    out: list[frozenset[int]] = []
    for s in unique:
        if not any(s < t or s == t for t in out):
            out.append(s)
    return set(out)


def recover_maximal(membership: SubsetStatTable, ell: int) -> set[frozenset[int]]:
    """Maximal supports from exact membership indicators up to size ell.

    Grows every positive seed C (|C| ≤ ell-1, plus the empty seed) by all j
    with a positive indicator on C ∪ {j}, keeps a grown set only if every
    subset of size ≤ ell has a positive indicator (which certifies it lies
    inside a true support), and returns the maximal survivors.
    """
    if membership.kind != "membership-indicator":
        raise ValueError("table kind must be membership-indicator")
    universe = [i for (i,) in (c for c in membership.entries if len(c) == 1)
                if membership.get((i,))]
    universe = sorted(set(universe))

    seeds: list[IndexSet] = [()]
    for c, v in membership.entries.items():
        if v and 1 <= len(c) <= ell - 1 and all(i in universe for i in c):
            seeds.append(c)

    grown: set[frozenset[int]] = set()
    for c in seeds:
        u = set(c)
        for j in universe:
            if j not in u and membership.get(tuple(c) + (j,)):
                u.add(j)
        grown.add(frozenset(u))

    def covered(u: frozenset[int]) -> bool:
        items = sorted(u)
        for size in range(1, min(ell, len(items)) + 1):
            for sub in combinations(items, size):
                if not membership.get(sub):
                    return False
        return True

    valid = {u for u in grown if covered(u)}
    return maximal_elements(valid)
