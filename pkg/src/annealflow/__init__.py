"""Annealing-flow samplers: block-wise continuous normalizing flows trained along
an annealing path, with MCMC baselines, sample metrics and importance estimates."""

from .densities import (AnnealingPath, BayesianLogisticPosterior, ExpWeightedGaussian, Funnel, GaussianMixture,
                        IsotropicGaussian, TruncatedNormalRelaxed, annealed_log_density, annealed_score,
                        log_unnorm, make_gmm_on_circle, sample_reference, score)
from .errors import NumericalError, ValidationError
from .flow import AnnealingFlowModel, FlowBlock, integrate_block, load_model, log_density_change, push_forward, save_model
from .net import VelocityNet, exact_divergence, forward, hutchinson_divergence, init_network, param_gradient
from .training import TrainConfig, assemble_loss, train_block, train_model

__version__ = "0.1.0"
