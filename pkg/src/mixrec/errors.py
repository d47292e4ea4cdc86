"""Exception types raised across the package."""

from __future__ import annotations


class MixrecError(Exception):
    """Base class for all package-specific errors."""


class IncompleteStatisticsError(MixrecError):
    """A required subset statistic is missing from the input table."""

    def __init__(self, kind: str, subset: tuple[int, ...]):
        self.kind = kind
        self.subset = tuple(subset)
        super().__init__(f"incomplete statistics: no {kind} entry for subset {sorted(subset)}")


class InconsistentStatisticsError(MixrecError):
    """A derived count fell outside [0, ell]; upstream estimates are noisy or wrong."""

    def __init__(self, subset: tuple[int, ...], value: float, ell: int):
        self.subset = tuple(subset)
        self.value = value
        self.ell = ell
        super().__init__(
            f"inconsistent statistics: derived count {value} for subset "
            f"{sorted(subset)} outside [0, {ell}]"
        )


class NotIdentifiableError(MixrecError):
    """Occ-count decoding found no expandable pattern before all vectors were recovered."""

    def __init__(self, p: int, recovered: int, ell: int):
        self.p = p
        self.recovered = recovered
        self.ell = ell
        super().__init__(
            f"not p-identifiable at this p: decoding stalled at p={p} after recovering "
            f"{recovered} of {ell} vectors"
        )


class DegenerateFamilyError(MixrecError):
    """A leading moment-polynomial coefficient vanished."""


class EmptyConditioningEventError(MixrecError):
    """No sample satisfied the conditioning event E_C."""

    def __init__(self, subset: tuple[int, ...], event_probability: float):
        self.subset = tuple(subset)
        self.event_probability = event_probability
        super().__init__(
            f"empty conditioning event for subset {sorted(subset)} "
            f"(Pr estimate {event_probability:.3g})"
        )


class NoConsistentMatchingError(MixrecError):
    """Component matching in the perturbed-mixture test was ambiguous."""


class ClusterTieError(MixrecError):
    """Two clusters tied for largest during union-of-support clustering."""

    def __init__(self, clusters: list[list[int]]):
        self.clusters = clusters
        super().__init__(f"ambiguous largest cluster: tied clusters {clusters}")


class UnresolvedUnionError(MixrecError):
    """The off-support confirmation test contradicted the clustering."""


class LearnerConvergenceError(MixrecError):
    """EM failed to converge within the restart budget; carries the best-effort model."""

    def __init__(self, message: str, best_model=None):
        self.best_model = best_model
        super().__init__(message)


class InfeasibleInstanceError(MixrecError):
    """A planted-instance constraint combination cannot be satisfied."""


class EnumerationBudgetError(MixrecError):
    """An oracle enumeration would exceed its configured budget."""
