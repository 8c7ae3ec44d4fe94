"""Compact random feature maps for the RBF kernel on log-covariance
descriptors, with SVM learners and a benchmark CLI."""

from .descriptors import (
    DescriptorEncoder,
    SkeletonSequence,
    covariance,
    descriptor_dim,
    make_descriptor,
    relative_displacements,
)
from .exceptions import (
    ContractError,
    DataFormatError,
    DescriptorError,
    NumericFailure,
)
from .linalg import EigenDecomposition, eigh, frob_inner, kron_trace, sym_log
from .maps import (
    MAP_KINDS,
    FastfoodMap,
    FourierMap,
    Geometric,
    KronEMap,
    KronPiMap,
    TaylorMap,
    approx_kernel_samples,
    dump_map,
    exact_taylor_features,
    fwht,
    load_map,
    pair_product_samples,
    rbf_kernel,
)
from .mlp import (
    MlpConfig,
    MlpModel,
    PerceptronMap,
    extract_feature_map,
    select_hidden_size,
    train_mlp,
)
from .stats import (
    BoundReport,
    EstimatorStats,
    McVerdict,
    bound_report,
    c_rho,
    chebyshev_bound,
    m4_gaussian,
    mc_bias_variance,
    seeded_unit_pairs,
    variance_bound,
)
from .svm import KernelSVM, LinearSVM, load_classifier, rbf_gram
from .datasets import (
    DatasetManifest,
    load_dataset,
    radial_descriptors,
    save_dataset,
    synth_dataset,
)
from .sweep import (
    DEFAULT_NUS,
    DEFAULT_REPETITIONS,
    ExperimentConfig,
    ExperimentReport,
    emit_report,
    encode_split,
    load_report,
    run_sweep,
)

__version__ = "0.1.0"
