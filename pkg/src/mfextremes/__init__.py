"""Extremes of mean-field interacting diffusions and of their McKean-Vlasov limit.

Simulate the interacting N-particle system and i.i.d. copies of its limit,
normalise the terminal values into point patterns, and compare both against
each other and against the Poisson/GEV limit objects.
"""

from .extremes import (
    NormingConstants,
    PointPattern,
    RegionSet,
    build_point_pattern,
    count_in_region,
    empirical_norming,
    gaussian_norming,
    order_statistics,
)
from .girsanov import WeightRecord, delta_b, girsanov_weight, reweighted_expectation
from .limits import (
    TailParams,
    gev_cdf,
    lambda_weights,
    poisson_intensity,
    sample_poisson_pattern,
    sample_spacings_limit,
    topk_joint_prob,
)
from .model import (
    GaussianMeanFieldParams,
    ModelSpec,
    RankBasedParams,
    make_gaussian_model,
    make_rankbased_model,
    ou_moments,
)
from .sde import (
    LawCloud,
    SimConfig,
    TrajectoryBatch,
    build_law_cloud,
    simulate_iid_copies,
    simulate_interacting,
)

__version__ = "0.1.0"
