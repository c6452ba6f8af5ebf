"""Online estimation of the geometric median with streaming inference."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .linalg import cholesky, quad_form, rank_one_inverse_update, symmetrize
from .objective import grad_g, hessian_g, loss_g
from .hessian import HessianAccumulator, PlugInHessianAccumulator, alpha_sequence, beta_sequence
from .estimators import ASGD, ASN, WASN, StochasticNewton, make_estimator
from .covariance import CovarianceAccumulator
from .inference import (
    ConfidenceInterval,
    OnlineInference,
    TestResult,
    chi_square_test,
    confidence_interval,
    wald_statistic,
)
from .quantiles import chi_square_quantile, normal_quantile
from .simulation import (
    CovStructure,
    ExperimentConfig,
    ExperimentResult,
    GaussianStream,
    run_coverage_experiment,
    run_level_experiment,
    run_mse_experiment,
    weiszfeld,
)
