"""Monte Carlo experiment harness and CLI."""

from .config import (
    EstimatorParams,
    ExperimentParams,
    SimConfig,
    default_config,
    load_config,
    realization_rng,
    realization_seed,
)
from .experiments import (
    ExperimentResult,
    run_clipping_sweep,
    run_complexity_report,
    run_convergence_stats,
    run_noise_sweep,
    run_positions_table,
    run_rmse_surface,
)
from .link import LinkContext, simulate_observation
from .observations import ObservationModel
