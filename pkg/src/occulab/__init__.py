"""occulab: occupation-time limit laws of critical fractional Brownian motion.

A numerical laboratory around the second-order fluctuation law of
int_0^{exp(nt)} f(B^H(s)) ds at the critical index H = 1/d: exact fBm
samplers, quadrature of the limit constants, Monte Carlo goodness of fit
against the Laplace-mixture limit, and deterministic sweeps of the covariance
inequalities the law rests on.
"""

__version__ = "0.1.0"

from .fbm import (
    EmbeddingNotPSD,
    FbmPath,
    FbmSpec,
    NotPositiveDefinite,
    covariance,
    fgn_autocovariance,
    sample_cholesky,
    sample_circulant,
)
from .functions import GAUSSIAN_DIFFERENCE, PLAIN_GAUSSIAN, TestFunction
from .constants import (
    Bracket,
    DivergentIntegral,
    LimitConstant,
    UnsupportedDimension,
    bracket,
    c_fd,
    gamma_identity_check,
    norm1_residual,
)
from .occupation import GridTooLarge, OccupationConfig, OccupationSample, realize, realize_multi
from .limitlab import (
    FddReport,
    HorizonExhausted,
    LimitTarget,
    MomentSummary,
    ZProcessSample,
    run_fdd,
    run_first_order,
    run_second_order,
    simulate_z,
    target_moment,
    z_process_summary,
)
from .checks import (
    CheckReport,
    check_cov_bounds,
    check_lnd,
    check_lower_inequality,
    check_taylor_bound,
)

__all__ = [
    "__version__",
    "EmbeddingNotPSD",
    "FbmPath",
    "FbmSpec",
    "NotPositiveDefinite",
    "covariance",
    "fgn_autocovariance",
    "sample_cholesky",
    "sample_circulant",
    "GAUSSIAN_DIFFERENCE",
    "PLAIN_GAUSSIAN",
    "TestFunction",
    "Bracket",
    "DivergentIntegral",
    "LimitConstant",
    "UnsupportedDimension",
    "bracket",
    "c_fd",
    "gamma_identity_check",
    "norm1_residual",
    "GridTooLarge",
    "OccupationConfig",
    "OccupationSample",
    "realize",
    "realize_multi",
    "FddReport",
    "HorizonExhausted",
    "LimitTarget",
    "MomentSummary",
    "ZProcessSample",
    "run_fdd",
    "run_first_order",
    "run_second_order",
    "simulate_z",
    "target_moment",
    "z_process_summary",
    "CheckReport",
    "check_cov_bounds",
    "check_lnd",
    "check_lower_inequality",
    "check_taylor_bound",
]
