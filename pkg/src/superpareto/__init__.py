"""Diversification penalty, risk measures and equilibria for super-Pareto losses."""

from .dependence import Comonotone, GaussianNSD, Independence, Mixture, sample_joint, sample_uniforms
from .distributions import (
    GPD,
    Affine,
    ConvexTransform,
    Discrete,
    Empirical,
    LossDistribution,
    Normal,
    Pareto,
    PiecewiseConvexFn,
    TailGraft,
    Truncated,
    loss_from_dict,
    pareto1_pair_sum_sf,
    truncate,
)
from .dominance import (
    CountLaw,
    DominanceReport,
    collective_risk_experiment,
    empirical_fsd,
    one_sided_dominance_test,
    penalty_experiment,
    truncated_penalty_experiment,
)
from .risk_measures import ES, RVaR, VaR, Distortion, DistortionFn, distortion, es, is_degenerate_distortion, rvar, var
from .rng import RngStream
from .tail_estimation import default_threshold_k, hill_estimator, hill_plot

__version__ = "0.1.0"
