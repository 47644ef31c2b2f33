from .dpposterior import (
    DataMatrix,
    DpConfig,
    NormalBase,
    PointMassBase,
    PosteriorDraws,
    draw_dp_functional,
    draw_dp_second_moment,
    sample_phi_posterior,
    stick_breaking_weights,
)
from .errors import (
    CheckError,
    ConfigError,
    DomainError,
    NumericError,
    ParameterError,
    SetidError,
    StateError,
)
from .grid import SphereGrid
from .samplekit import (
    EmpiricalSample,
    RngStream,
    draw_beta,
    draw_dirichlet,
    draw_gamma,
    draw_mvnormal,
    empirical_quantile,
    std_normal_cdf,
    std_normal_quantile,
)
from .setgeom import (
    SupportSolveResult,
    bvm_support_variance,
    contraction,
    envelope,
    hausdorff_interval,
    hausdorff_via_support,
    hj_support,
    linearization_coeffs,
    support_solve,
)
from .types import *
