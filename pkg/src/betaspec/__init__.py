"""Spectral limit law and CLT calibration for Beta matrices S(S + alpha*T)^-1."""

from .clt import (
    Contour,
    GaussianLimit,
    TestFunction,
    base_interval,
    build_contour,
    clt_cov,
    clt_mean,
    gaussian_limit,
    identity_fn,
    invdiff_fn,
    log_fn,
    loglinear_fn,
    nested_contours,
    polynomial_fn,
    quad_l5_fn,
)
from .lsd import (
    LsdModel,
    density_from_stieltjes,
    f_matrix_density,
    f_matrix_pushforward_check,
    lsd_atoms,
    lsd_cdf,
    lsd_density,
    lsd_model,
    mp_atom,
    mp_cdf,
    mp_density,
    mp_stieltjes,
    stieltjes_s,
    support_edges,
)
from .lss import (
    LssValue,
    Statistic,
    TestReport,
    calibrate,
    center_term,
    compute_lss,
    covariance_equality_test,
    test_function_for,
)
from .params import (
    FiniteDims,
    SpectralParams,
    analyticity_interval,
    spectral_bounds,
    validate_params,
)
from .sampling import (
    EigenSpectrum,
    EntryDistribution,
    esd_eval,
    export_spectrum,
    ks_distance,
    sample_beta_spectrum,
)
from .transforms import (
    DiscreteLaw,
    TransformState,
    fixed_point_solve,
    lemma51_residuals,
    transform_state,
)

__version__ = "0.1.0"
