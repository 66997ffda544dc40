"""Spatio-temporal log-Gaussian Cox process models for areal count panels.

Five nested Poisson regression models over slope-unit graphs: fixed
covariate effects only (mod1), plus per-period intercepts (mod2), plus a
replicated intrinsic spatial field (mod3), a per-unit AR1 temporal field
(mod4), or a separable AR1 x spatial field (mod5). Inference is a
Gaussian/Laplace approximation with grid integration over
hyperparameters, validated against in-package MCMC and quadrature
oracles.
"""

from .graph import SlopeUnitGraph, besag_precision, connected_components, lattice_graph, load_graph
from .dataset import PanelDataset, aggregate_periods, count_landslides, standardize
from .model import (
    HyperState,
    LatentLayout,
    ModelFamily,
    ModelSpec,
    build_layout,
    log_hyper_prior,
    prior_precision,
    stationary_variance_ar1,
)
from .laplace import GaussianApproximation, HyperPosterior, explore_hyper, find_mode, log_marginal_hyper, posterior_summaries
from .validate import (
    ClassLabel,
    PosteriorSummary,
    aspect_effect,
    classify,
    count_calibration,
    ratio_maps,
    roc_auc,
    susceptibility,
    temporal_trends,
)
from .cv import cv_spatial_kfold, cv_temporal_loo, spatial_folds
from .mcmc import ChainConfig, quadrature_posterior, run_chain
from .simulate import SimConfig, sample_ar1, sample_besag, sample_dataset

__version__ = "0.1.0"
