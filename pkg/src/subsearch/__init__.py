"""Budget-accounted optimizer interleaving local gradient ascent with
surrogate-guided global search in a subspace spanned by recent gradients."""

from .metrics import RankReport, spearman, steps_to_fraction, top1_percentile
from .objectives import LinearQuadraticRollout, PlantedQuadratic, make_planted_quadratic
from .rng import RngStream
from .sampler import TrustRegion, gaussian_sample, project_ball
from .search import (
    GradientAscent,
    RoundTrace,
    SearchConfig,
    SurrogateProvider,
    interleave,
    one_shot_round,
    random_round,
    run_round,
)
from .subspace import GradientWindow, SubspaceBasis, build_basis
from .surrogate import ContextSet

__version__ = "0.1.0"

__all__ = [
    "ContextSet",
    "GradientAscent",
    "GradientWindow",
    "LinearQuadraticRollout",
    "PlantedQuadratic",
    "RankReport",
    "RngStream",
    "RoundTrace",
    "SearchConfig",
    "SubspaceBasis",
    "SurrogateProvider",
    "TrustRegion",
    "build_basis",
    "gaussian_sample",
    "interleave",
    "make_planted_quadratic",
    "one_shot_round",
    "project_ball",
    "random_round",
    "run_round",
    "spearman",
    "steps_to_fraction",
    "top1_percentile",
]
