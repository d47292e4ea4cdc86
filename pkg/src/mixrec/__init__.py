"""Support recovery in mixtures with sparse parameters (MD / MLR / MLC)."""

from .api import SupportRecovery
from .estimators import EstimatorConfig, indicator_frequency, median_of_means
from .moment_mixtures import (
    MomentFamily,
    elementary_symmetric,
    intersection_count_md,
    intersection_nonempty_md,
    moment_coeffs,
    power_sums_from_moments,
    raw_moment_estimates,
)
from .classifier_mixtures import conditioning_threshold, negate_if_nonpositive, union_count_mlc
from .regression_mixtures import (
    ScaleMixtureModel,
    intersection_count_mlr_binary,
    intersection_nonempty_mlr,
    learn_scale_mixture,
    union_count_mlr_general,
    union_of_support_mlr,
)
from .pipeline import (
    RecoveryReport,
    RunConfig,
    exact_recovery,
    maximal_recovery,
    plug_the_oracle,
)
from .supports import (
    OccTable,
    SubsetStatTable,
    SupportSet,
    intersections_from_unions,
    is_p_identifiable,
    maximal_elements,
    occ_from_intersections,
    recover_maximal,
    recover_supports,
)
from .synth import PlantConfig, PlantedInstance, oracle_stats, plant, sample_model

__version__ = "0.1.0"

__all__ = [
    "EstimatorConfig",
    "MomentFamily",
    "OccTable",
    "PlantConfig",
    "PlantedInstance",
    "RecoveryReport",
    "RunConfig",
    "ScaleMixtureModel",
    "SubsetStatTable",
    "SupportRecovery",
    "SupportSet",
    "conditioning_threshold",
    "elementary_symmetric",
    "exact_recovery",
    "indicator_frequency",
    "intersection_count_md",
    "intersection_count_mlr_binary",
    "intersection_nonempty_md",
    "intersection_nonempty_mlr",
    "intersections_from_unions",
    "is_p_identifiable",
    "learn_scale_mixture",
    "maximal_elements",
    "maximal_recovery",
    "median_of_means",
    "moment_coeffs",
    "negate_if_nonpositive",
    "occ_from_intersections",
    "oracle_stats",
    "plant",
    "plug_the_oracle",
    "power_sums_from_moments",
    "raw_moment_estimates",
    "recover_maximal",
    "recover_supports",
    "sample_model",
    "union_count_mlc",
    "union_count_mlr_general",
    "union_of_support_mlr",
]
