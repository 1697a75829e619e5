"""Robust PCA with dimension-free error certificates."""

from robpca.bounds import (
    BoundParams,
    b_star,
    bound_B,
    choose_sigma,
    constant_c,
    estimate_kappa,
    estimate_s4,
    grid_size_K,
    standing_assumption_holds,
    zeta,
)
from robpca.errors import NumericalError, RobPCAError, ValidationError
from robpca.gram_estimator import (
    DeltaNet,
    MethodConfig,
    NetConfig,
    RobustGramEstimate,
    build_delta_net,
    empirical_gram,
    estimate_gram,
    fit_symmetric_matrix,
    median_of_means,
    net_coverage_check,
    positive_part,
    robust_quadratic_form,
    robust_quadratic_forms,
    truncated_mean,
)
from robpca.projector_geometry import (
    ProjectorPairAnalysis,
    analyze_pair,
    canonical_bases,
    paired_block_residuals,
    projector_distance,
    ranks_equal,
    restricted_distance,
)
from robpca.robust_pca import (
    CutoffEstimate,
    EigenvalueReport,
    ResidualReport,
    cutoff_estimate,
    eigenvalue_report,
    frobenius_certificate,
    residual_diagnostics,
    operator_norm_certificate,
    projector_error_bound,
    shrink_eigenvalues,
    top_projector,
    worst_case_certificate,
)
from robpca.spectral import (
    EigenSystem,
    SpectralFunction,
    apply_spectral_function,
    eigendecompose,
    frobenius_cross_distance_sq,
    frobenius_norm,
    identity_function,
    make_ramp,
    operator_norm,
)

__version__ = "0.1.0"
