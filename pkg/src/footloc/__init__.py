"""footloc: Bayesian geolocation-error quantification for sampling LiDAR.

Fits a hierarchical measurement-error model against spatially coincident
high-accuracy point clouds to recover per-footprint and systematic location
error with full posterior uncertainty, and corrects reported footprint
coordinates.
"""

from .estimators import GeolocationErrorModel, check_focal_areas
from .exceptions import (
    ConfigError,
    EmptyFootprintError,
    EmptyInputError,
    FootlocError,
    InitializationError,
    InsufficientCoverageError,
    MissingCloudError,
    ParseError,
)
from .footprint import (
    DEFAULT_PERCENTILES,
    KernelParams,
    RhSimulator,
    RhVector,
    kernel_mass_within,
    kernel_weight,
    simulate_rh,
    weighted_quantiles,
)
from .ingest import (
    FocalArea,
    GeoPoint,
    Observation,
    clip_focal_area,
    load_dataset,
    observed_matrix,
    parse_point_cloud,
    read_observations,
)
from .model import (
    FullModelState,
    Hyperparams,
    SubModelState,
    log_likelihood_full,
    log_likelihood_sub,
    log_posterior_full,
    log_posterior_sub,
)
from .posterior import (
    Ecdf,
    GridSpec,
    KdeSurface,
    MapEstimate,
    angle_draws,
    distance_draws,
    fitted_values,
    kde2d,
    map_estimate,
    rmse_table,
    summarize_location,
)
from .samplers import (
    ChainConfig,
    ChainOutput,
    effective_sample_size,
    metropolis_update,
    ram_update,
    run_chains,
    split_rhat,
)
from .synthetic import Scene, SceneSpec, generate_scene

__version__ = "0.1.0"
