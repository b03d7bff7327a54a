"""Functional calibration estimators for survey means of curves.

Horvitz-Thompson, chi-square functional calibration and maximum entropy on
the mean (MEM) calibration with Gaussian and compound-Poisson priors, plus
the Monte Carlo harness used to compare them.
"""

from .core import Grids, Kernel, KernelKind, kernel_eval, kernel_matrix, make_grids
from .sampling import (
    DimensionError,
    FunctionalSample,
    SampleIndices,
    SamplingDesign,
    ht_aux_mean,
    ht_functional_mean,
    srswor_design,
    srswor_sample,
)
from .calib_chisq import (
    FunctionalWeights,
    MeanTarget,
    SingularMatrixError,
    chisq_weights,
    pointwise_beta_hat,
    weighted_mean,
)
from .mem_core import (
    MemContext,
    calibrated_aux_mean,
    constraint_residual,
    coupling_field,
    sample_aux_sum,
    weights_from_adjustment,
)
from .mem_gaussian import (
    DEFAULT_RCOND,
    GaussianSolution,
    GaussianSystem,
    assemble_system,
    gaussian_adjustment,
    h_objective_gaussian,
    mem_gaussian_weights,
    solve_lambda,
)
from .mem_poisson import (
    MomentRangeError,
    PoissonPrior,
    PoissonSolution,
    PoissonSolveOptions,
    h_objective_poisson,
    mem_poisson_weights,
    poisson_adjustment,
    poisson_residual,
    solve_lambda_poisson,
    xi_moment,
)

__version__ = "0.1.0"
