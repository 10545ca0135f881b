"""Stochastic-smoothing gradient estimation for black-box functions.

Relax an arbitrary f: R^n -> R^m by perturbing its input with one of six
standardized distributions and estimate gradients of the smoothed
function from score-weighted samples: Jacobians, scale-parameter and
scale-matrix gradients, output-covariance gradients, and k-sample-median
gradients, with variance reduction via covariate baselines, antithetic
pairs, and (randomized) quasi-Monte Carlo plans.
"""

__version__ = "0.1.0"

from .distributions import DISTRIBUTIONS, Distribution, get_distribution
from .estimators import (
    BlackBox,
    EstimateReport,
    SmoothingConfig,
    compose_objective,
    dgamma,
    dscale_matrix,
    estimate,
    jacobian,
    median_gradient,
    median_weights,
    output_covariance,
    smooth_value,
)
from .sampling import SamplePlan, Strategy, make_plan, transform
from .testbed import GridCostMap, make_function

__all__ = [
    "__version__",
    "DISTRIBUTIONS",
    "Distribution",
    "get_distribution",
    "BlackBox",
    "EstimateReport",
    "SmoothingConfig",
    "compose_objective",
    "dgamma",
    "dscale_matrix",
    "estimate",
    "jacobian",
    "median_gradient",
    "median_weights",
    "output_covariance",
    "smooth_value",
    "SamplePlan",
    "Strategy",
    "make_plan",
    "transform",
    "GridCostMap",
    "make_function",
]
