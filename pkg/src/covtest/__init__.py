"""Permutation tests of covariance and correlation matrices.

The test statistics are one minus a generalized cosine between symmetric
matrices; p-values come from seeded, deterministic permutation algorithms.
"""

__version__ = "0.1.0"

from .datagen import (
    BlockDiagonalModel,
    CovarianceModel,
    Distribution,
    LinearMapModel,
    MovingAverageModel,
    sigma_alternative_cs,
    sigma_alternative_diag,
    sparse_cai_pair,
    ssnr,
)
from .errors import (
    CovtestError,
    DataError,
    DegenerateStatisticError,
    FeasibilityWarning,
    InternalError,
)
from .matrices import (
    CorrelationMethod,
    Mapping,
    generalized_cosine,
    modified_hilbert,
    sample_correlation,
    sample_covariance,
    symmetrize,
    unvech,
    vech,
    vech_star,
)
from .permutation import (
    PermutationConfig,
    TestResult,
    enumerate_two_sample_p,
    mc_p_value,
    run_compound_symmetry_test,
    run_identity_test,
    run_k_sample_test,
    run_sphericity_test,
    run_two_sample_test,
    run_uncorrelation_test,
)
from .simulate import TableSpec, run_table
from .statistics import (
    MatrixKind,
    StatisticValue,
    compound_symmetry_statistic,
    identity_correlation_statistic,
    k_sample_statistic,
    sphericity_statistic,
    two_sample_statistic,
    uncorrelation_statistic,
)

__all__ = [
    "__version__",
    "BlockDiagonalModel",
    "CovarianceModel",
    "Distribution",
    "LinearMapModel",
    "MovingAverageModel",
    "sigma_alternative_cs",
    "sigma_alternative_diag",
    "sparse_cai_pair",
    "ssnr",
    "CovtestError",
    "DataError",
    "DegenerateStatisticError",
    "FeasibilityWarning",
    "InternalError",
    "CorrelationMethod",
    "Mapping",
    "generalized_cosine",
    "modified_hilbert",
    "sample_correlation",
    "sample_covariance",
    "symmetrize",
    "unvech",
    "vech",
    "vech_star",
    "PermutationConfig",
    "TestResult",
    "enumerate_two_sample_p",
    "mc_p_value",
    "run_compound_symmetry_test",
    "run_identity_test",
    "run_k_sample_test",
    "run_sphericity_test",
    "run_two_sample_test",
    "run_uncorrelation_test",
    "TableSpec",
    "run_table",
    "MatrixKind",
    "StatisticValue",
    "compound_symmetry_statistic",
    "identity_correlation_statistic",
    "k_sample_statistic",
    "sphericity_statistic",
    "two_sample_statistic",
    "uncorrelation_statistic",
]
