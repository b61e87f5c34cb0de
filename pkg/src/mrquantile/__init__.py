"""Two-sample Mendelian randomization with quantile-based estimation.

The flagship estimator models the Wald ratios with an asymmetric Laplace
working likelihood, selecting the quantile level of the ratio distribution
from the data; baselines (IVW, weighted linear regression with intercept,
weighted median), a parametric bootstrap, GWAS summary-statistic ingestion,
and two Monte Carlo study designs round out the toolkit.
"""

from .errors import (
    AllInstrumentsDroppedError,
    DegenerateFitError,
    EmptyFileError,
    EmptyInputError,
    MalformedRowError,
    MissingColumnError,
    MrQuantileError,
    NoOverlapError,
    NonPositiveWeightError,
    TooFewBootstrapReplicatesError,
    TooFewInstrumentsError,
    TooManyFailedReplicatesError,
)
from .estimators import (
    AldFit,
    BootstrapConfig,
    EstimateReport,
    METHODS,
    SolverConfig,
    bootstrap_se,
    fit_egger,
    fit_ivw,
    fit_mr_quantile,
    fit_weighted_median,
)
from .ratios import RatioSet, compute_ratios, median_weights, quantile_weights
from .simulation import (
    MethodAggregate,
    ReplicateRecord,
    SimulationResult,
    StrongSimConfig,
    WeakSimConfig,
    generate_strong,
    generate_weak,
    run_study,
)
from .summary_data import (
    GwasRow,
    HarmonizedSet,
    InstrumentRecord,
    Provenance,
    harmonize,
    parse_gwas_file,
)
from .wqr import (
    AldParams,
    ald_logpdf,
    check_loss,
    log_likelihood,
    update_lambda,
    update_tau,
    weighted_quantile,
)

__version__ = "0.1.0"

__all__ = [
    "AldFit",
    "AldParams",
    "AllInstrumentsDroppedError",
    "BootstrapConfig",
    "DegenerateFitError",
    "EmptyFileError",
    "EmptyInputError",
    "EstimateReport",
    "GwasRow",
    "HarmonizedSet",
    "InstrumentRecord",
    "MalformedRowError",
    "METHODS",
    "MethodAggregate",
    "MissingColumnError",
    "MrQuantileError",
    "NoOverlapError",
    "NonPositiveWeightError",
    "Provenance",
    "RatioSet",
    "ReplicateRecord",
    "SimulationResult",
    "SolverConfig",
    "StrongSimConfig",
    "TooFewBootstrapReplicatesError",
    "TooFewInstrumentsError",
    "TooManyFailedReplicatesError",
    "WeakSimConfig",
    "ald_logpdf",
    "bootstrap_se",
    "check_loss",
    "compute_ratios",
    "fit_egger",
    "fit_ivw",
    "fit_mr_quantile",
    "fit_weighted_median",
    "generate_strong",
    "generate_weak",
    "harmonize",
    "log_likelihood",
    "median_weights",
    "parse_gwas_file",
    "quantile_weights",
    "run_study",
    "update_lambda",
    "update_tau",
    "weighted_quantile",
    "__version__",
]
