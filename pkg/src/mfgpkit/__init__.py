"""Multi-fidelity Gaussian-process regression toolkit.

Single-fidelity GP regression with maximum-likelihood hyperparameter
estimation, linear and nonlinear recursive multi-fidelity models,
mutual-information feature ranking, dataset plumbing, and a seeded
repeated-split benchmarking harness with plot-ready reports.
"""

from ._version import __version__
from .bench import (
    ExperimentReport,
    Method,
    SyntheticTask,
    loo_report,
    make_synthetic,
    rmse,
    run_experiment,
)
from .data import (
    CsvSchema,
    Dataset,
    NormalizationStats,
    SplitPlan,
    apply_normalize,
    fit_normalize,
    from_levels,
    load_csv,
    loo_splits,
    make_splits,
    pca_project,
    to_levels,
    write_csv,
)
from .featsel import (
    BinningMethod,
    DiscreteTable,
    FeatureRanking,
    SweepConfig,
    discretize,
    make_table,
    mrmr_rank,
    mutual_information,
    sweep_subset_size,
)
from .gp import (
    FitConfig,
    GpModel,
    Hyperparameters,
    PredictiveDistribution,
    build_model,
    fit,
    mll,
    mll_gradient,
    predict,
)
from .mfgp import (
    FidelityLevel,
    ImputeConfig,
    MfgpFitConfig,
    MfgpModel,
    ensure_nested,
    fit_largp,
    fit_nargp,
    largp_from_hypers,
    load_model,
    nargp_from_hypers,
    predict_largp,
    predict_nargp,
    save_model,
)
from .numerics import (
    CholeskyFactor,
    KernelFamily,
    NargpCompositeKernel,
    RbfKernel,
    cho_solve,
    cholesky_factor,
    cross_gram,
    gram_matrix,
    kernel_eval,
    log_det,
)

__all__ = [
    "__version__",
    "BinningMethod",
    "CholeskyFactor",
    "CsvSchema",
    "Dataset",
    "DiscreteTable",
    "ExperimentReport",
    "FeatureRanking",
    "FidelityLevel",
    "FitConfig",
    "GpModel",
    "Hyperparameters",
    "ImputeConfig",
    "KernelFamily",
    "Method",
    "MfgpFitConfig",
    "MfgpModel",
    "NargpCompositeKernel",
    "NormalizationStats",
    "PredictiveDistribution",
    "RbfKernel",
    "SplitPlan",
    "SweepConfig",
    "SyntheticTask",
    "apply_normalize",
    "build_model",
    "cho_solve",
    "cholesky_factor",
    "cross_gram",
    "discretize",
    "ensure_nested",
    "fit",
    "fit_largp",
    "fit_nargp",
    "fit_normalize",
    "from_levels",
    "gram_matrix",
    "kernel_eval",
    "largp_from_hypers",
    "load_csv",
    "load_model",
    "log_det",
    "loo_report",
    "loo_splits",
    "make_splits",
    "make_synthetic",
    "make_table",
    "mll",
    "mll_gradient",
    "mrmr_rank",
    "mutual_information",
    "nargp_from_hypers",
    "pca_project",
    "predict",
    "predict_largp",
    "predict_nargp",
    "rmse",
    "run_experiment",
    "save_model",
    "sweep_subset_size",
    "to_levels",
    "write_csv",
]
