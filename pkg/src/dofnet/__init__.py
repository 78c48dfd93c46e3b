"""Monte-Carlo degrees of freedom for multi-class classifiers.

Perturb the training labels' sufficient statistics, refit with shared
random seeds, and read the model's effective complexity off the divided
difference; use it in place of the raw parameter count for AIC-style
model selection (DoFAIC).
"""

from .categorical import (
    deviance,
    encode_observations,
    expected_deviance,
    log_partition,
    mean_from_natural,
    natural_params,
    optimism,
    total_deviance,
)
from .datagen import Dataset, gen_deepnet, gen_mlr, gen_xor, load_cifar10, load_mnist_idx
from .dof import CrnContext, DofEstimate, dofaic, estimate_dof, measured_optimism, naive_aic
from .estimators import (
    DeepNetClassifier,
    IdentityEstimator,
    LinearSmoother,
    MeanEstimator,
    MultinomialLogit,
)
from .harness import (
    ExperimentReport,
    SweepSpec,
    cross_validate,
    run_mlr_validation,
    run_model_selection,
    run_regularization_sweep,
    run_structure_sweep,
    run_sweep,
    run_xor,
    spearman,
)
from .network import Network, TrainConfig, forward, init_network, param_count, pretrain_sda, train
from .rng import RngStream

__version__ = "0.1.0"

__all__ = [
    "CrnContext", "Dataset", "DeepNetClassifier", "DofEstimate", "ExperimentReport",
    "IdentityEstimator", "LinearSmoother", "MeanEstimator", "MultinomialLogit",
    "Network", "RngStream", "SweepSpec", "TrainConfig", "cross_validate", "deviance",
    "dofaic", "encode_observations", "estimate_dof", "expected_deviance", "forward",
    "gen_deepnet", "gen_mlr", "gen_xor", "init_network", "load_cifar10",
    "load_mnist_idx", "log_partition", "mean_from_natural", "measured_optimism",
    "naive_aic", "natural_params", "optimism", "param_count", "pretrain_sda",
    "run_mlr_validation", "run_model_selection", "run_regularization_sweep",
    "run_structure_sweep", "run_sweep", "run_xor", "spearman", "total_deviance",
    "train",
]
