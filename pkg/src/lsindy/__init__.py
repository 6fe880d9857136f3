"""Latent sparse identification of swing-equation network dynamics."""

from .grid_model import (
    EffectiveNetwork,
    GridState,
    NetworkFileError,
    ParameterRanges,
    generate_synthetic,
    load_network,
    save_network,
    vector_field,
)
from .library import CandidateLibrary, LibrarySpec, LibraryTooLarge, build
from .metrics import EvaluationReport, average_series, relative_error, time_comparison
from .ode import IntegrationConfig, IntegrationError, Trajectory, integrate
from .reduction import LatentSnapshotSet, ReducedBasis, compute_basis, project, reconstruct
from .snapshots import SnapshotSet, add_noise, assemble
from .sparse_id import (
    HDEstimate,
    RegressionConfig,
    SparseModel,
    estimate_HD,
    fit,
    predict_derivative,
    simulate_model,
)

__version__ = "0.1.0"
