"""Bayesian time-varying regression with dynamic spike-and-slab priors."""

from .datagen import CholeskySystem, Dataset, generate_example1, generate_example2, replicate
from .dists import GigParams, ParameterDomainError, sample_beta, sample_gamma, sample_gig, sample_inv_gamma
from .dlm import ConditionalDlm, DegeneracyError, FilterStats, build_conditional_dlm, ffbs_sample, kalman_filter
from .gck import BackwardStats, NumericalError, RegimePrior, backward_recursion, predictive_factor, sample_regime_path
from .priors import Hyperparameters, PriorKind, family_constant, f_star, preset, sample_Q, sample_tau2
from .sampler import McmcConfig, McmcState, PosteriorSummary, SamplerError, compute_rmse, mcmc_step, run_chain

__version__ = "0.1.0"
