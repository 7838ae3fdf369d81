"""Source-free transferability scoring for pre-trained segmentation models.

Feature bundles sampled from a model's decoder are scored by comparing
within-class distribution agreement across cases against the spread of the
features as a whole; reference estimators and a rank-correlation harness
round out the toolkit.
"""

from .baselines import (
    LabeledFeatureSet,
    MixedPosteriorWarning,
    assemble_baseline_set,
    gbc,
    leep,
    logme,
    logme_class_evidence,
    transrate,
)
from .errors import (
    BundleFormatError,
    EstimatorError,
    FormatError,
    InvalidBundleError,
    NoSharedClassError,
    PosteriorsUnavailableError,
    SingularCovarianceError,
    XferError,
)
from .gaussian import (
    GaussianSummary,
    bhattacharyya_gauss,
    fit_gaussian,
    kl_divergence_gauss,
    spd_sqrt,
    w2_distance,
)
from .interchange import (
    CaseBundle,
    Diagnostic,
    PerformanceRecord,
    ScaleSamples,
    check_bundle_set,
    read_case_bundle,
    read_performance_table,
    validate_bundle,
    write_case_bundle,
    write_performance_table,
)
from .ranking import (
    CorrelationReport,
    RankedModel,
    evaluate,
    pearson,
    rank_models,
    weighted_kendall_tau,
)
from .sampling import (
    DenseFeatureVolume,
    SamplingConfig,
    class_sample_size,
    global_sample,
    sample_dense,
    sample_from_patches,
    scale_sample_budget,
    stratified_class_sample,
)
from .scoring import (
    ModelScore,
    ScaleScore,
    ScoreConfig,
    class_consistency,
    feature_variety,
    hyperspherical_energy,
    score_model,
)
from .seeding import derive_seed, rng_for, splitmix64
from .synth import SynthSpec, generate_bank

__version__ = "0.1.0"

__all__ = [
    "BundleFormatError",
    "CaseBundle",
    "CorrelationReport",
    "DenseFeatureVolume",
    "Diagnostic",
    "EstimatorError",
    "FormatError",
    "GaussianSummary",
    "InvalidBundleError",
    "LabeledFeatureSet",
    "MixedPosteriorWarning",
    "ModelScore",
    "NoSharedClassError",
    "PerformanceRecord",
    "PosteriorsUnavailableError",
    "RankedModel",
    "SamplingConfig",
    "ScaleSamples",
    "ScaleScore",
    "ScoreConfig",
    "SingularCovarianceError",
    "SynthSpec",
    "XferError",
    "assemble_baseline_set",
    "bhattacharyya_gauss",
    "check_bundle_set",
    "class_consistency",
    "class_sample_size",
    "derive_seed",
    "evaluate",
    "feature_variety",
    "fit_gaussian",
    "gbc",
    "generate_bank",
    "global_sample",
    "hyperspherical_energy",
    "kl_divergence_gauss",
    "leep",
    "logme",
    "logme_class_evidence",
    "pearson",
    "rank_models",
    "read_case_bundle",
    "read_performance_table",
    "rng_for",
    "sample_dense",
    "sample_from_patches",
    "scale_sample_budget",
    "score_model",
    "spd_sqrt",
    "splitmix64",
    "stratified_class_sample",
    "transrate",
    "validate_bundle",
    "w2_distance",
    "weighted_kendall_tau",
    "write_case_bundle",
    "write_performance_table",
]
