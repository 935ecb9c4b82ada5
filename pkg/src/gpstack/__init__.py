"""Bayesian predictive stacking for spatially-temporally misaligned regression.

Conjugate Gaussian-process candidate models on point-referenced, temporally
aggregated data are combined by leave-one-out stacking; the latent process is
predicted at exact coordinates and at polygon-interval blocks (change of
support) and feeds a downstream heteroskedastic outcome regression with full
uncertainty propagation.
"""

from .covariance import InstantPoint, ProcessParams, SpaceTimeBlock, SpaceTimePoint
from .geometry import BoundingBox, Polygon
from .loo import LooMatrix, build_loo_matrix, exact_loo, psis_loo
from .model import (
    BasisSpec,
    BlockOutcomeDataset,
    CandidateFit,
    CandidateSpec,
    PointDataset,
    PosteriorDraws,
    Priors,
    fit_candidate,
    fit_outcome_regression,
    predict_blocks,
    predict_instants,
    sample_candidate,
)
from .evaluation import WaicReport, empirical_semivariogram, waic
from .stacking import StackingWeights, candidate_grid, stacked_sample, stacking_weights

__version__ = "0.1.0"

__all__ = [
    "BasisSpec",
    "BlockOutcomeDataset",
    "BoundingBox",
    "CandidateFit",
    "CandidateSpec",
    "InstantPoint",
    "LooMatrix",
    "PointDataset",
    "Polygon",
    "PosteriorDraws",
    "Priors",
    "ProcessParams",
    "SpaceTimeBlock",
    "SpaceTimePoint",
    "StackingWeights",
    "WaicReport",
    "build_loo_matrix",
    "candidate_grid",
    "empirical_semivariogram",
    "exact_loo",
    "fit_candidate",
    "fit_outcome_regression",
    "predict_blocks",
    "predict_instants",
    "psis_loo",
    "sample_candidate",
    "stacked_sample",
    "stacking_weights",
    "waic",
]
