"""Minimum hyperspherical energy: energies, sphere optimization and MLP regularization."""

from .data import SyntheticDataset, make_imbalanced_blobs, sample_blobs
from .energy import (
    EnergySpec,
    EnergyValue,
    energy,
    energy_and_gradient,
    energy_gradient,
    half_space_expand,
    minibatch_energy,
    minibatch_gradient,
    normalize,
    orthonormal_reg,
    output_minibatch_energy,
    output_minibatch_gradient,
    pairwise_angles,
    validate_spec,
)
from .errors import MHEError
from .experiments import compare_regularizers, imbalance_experiment, weighted_displacement_experiment
from .mlp import MlpModel, RegularizerConfig, TrainReport, composite_loss, forward, init_mlp, train
from .optimizer import (
    OptimizerConfig,
    Trajectory,
    empirical_minimum_energy,
    minimize,
    random_sphere_init,
)
from .theory import AsymptoticReport, asymptotic_check, cap_discrepancy

__version__ = "0.1.0"
