"""Spectral stochastic emulator for stochastic simulators.

Fits sparse polynomial-chaos surrogates to sampled trajectories, compresses
them with an extended Karhunen-Loeve expansion computed as PCA in
coefficient space, infers the joint law of the KL coordinates, and exposes
marginal prediction, covariance emulation, and trajectory resampling.
"""

from .basis import Gaussian, InputModel, Lognormal, MultiIndexSet, Uniform
from .dist import JointDistModel, MarginalModel, PairCopula, VineCopula
from .emulator import (
    PceKdeBaseline,
    StochasticEmulator,
    compress_trajectories,
    emulator_from_compression,
    fit_emulator,
    fit_pce_kde_baseline,
)
from .errors import (
    ConfigurationError,
    DataError,
    DegenerateDataError,
    DomainError,
    FitError,
    IntegrationError,
    SchemaError,
    StageError,
    StochemuError,
)
from .kle import KleModel, build_joint_basis, build_kle_model, eigendecompose, project_xi, truncate
from .metrics import ErrorReport, eps_cov, eps_marg, evaluate_emulator, lower_bound_band, wasserstein2
from .pce import FitConfig, PceModel, fit_ols, fit_sparse, sobol_indices
from .testbeds import (
    TrajectorySet,
    ValidationSet,
    generate_dataset,
    get_benchmark,
    make_validation_set,
)

__version__ = "0.1.0"
