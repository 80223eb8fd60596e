"""Hyperplane-projection loss workbench.

Training with the random-linear-projections loss and its mixup variant,
squared-error baselines, balanced unique-batch generation, dataset
construction and ablation transforms, numerical property checks, and a CLI
for running the experiments end to end.
"""

from .batching import BatchSet, balanced_batches
from .data import (
    Dataset,
    SplitSpec,
    add_noise,
    gen_linear,
    gen_moons,
    gen_nonlinear,
    load_images,
    load_table,
    split_biased,
    split_random,
    standardize,
)
from .linalg import LstsqResult, least_squares_project, projection_operator
from .loss import LossOutput, cross_entropy, mixup_pairs, mse, rlp_batch, rlp_metric, rlp_mixup_batch
from .model import (
    GradientBundle,
    ModelParams,
    backward,
    build_autoencoder,
    build_moons_classifier,
    build_regression_net,
    forward,
    load_checkpoint,
    save_checkpoint,
)
from .optim import OptimizerState, make_optimizer, step
from .theory import CheckReport, run_all_checks
from .trainer import (
    MetricsRecord,
    TrainConfig,
    evaluate,
    train,
    train_baseline,
    train_rlp,
    train_rlp_mixup,
)

__version__ = "0.1.0"
