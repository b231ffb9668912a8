"""Continuous-time Bayesian networks with per-node holding clocks.

Simulation, exact path likelihood, and Bayesian parameter/structure inference
for graph-coupled semi-Markov processes whose holding times follow arbitrary
parametric survival families.
"""

from .errors import (
    ClockCtbnError,
    InsufficientDataError,
    IntegrationError,
    InvalidTrajectoryError,
    ModelError,
    ParseError,
    StalledProcessError,
)
from .likelihood import (
    KeyStats,
    SuffStats,
    interval_log_likelihood,
    stats_log_likelihood,
    suff_stats,
    trajectory_log_likelihood,
    window_log_likelihood,
)
from .model import (
    Event,
    Graph,
    Model,
    Trajectory,
    Window,
    all_keys,
    derive_windows,
    parent_state_index,
    validate_trajectory,
)
from .params import (
    BoxPrior,
    GammaPrior,
    InvGammaPrior,
    dirichlet_mean,
    dirichlet_posterior,
    exponential_log_marginal,
    exponential_posterior_update,
    grid_log_posterior,
    grid_posterior,
    map_estimate,
    param_grid,
    rayleigh_log_marginal,
    rayleigh_posterior_update,
)
from .quadrature import log_romberg, log_romberg_2d
from .simulate import (
    gillespie,
    global_log_density,
    global_log_survival,
    total_hazard,
    trajectory_prefix,
    transition_probabilities,
)
from .structure import (
    StructurePosterior,
    StructurePriors,
    aupr,
    auroc,
    candidate_parent_sets,
    graph_posterior,
    local_log_marginal,
    node_windows,
    phi_log_evidence,
    sequential_posterior_update,
    theta_log_evidence,
)
from .survival import (
    FAMILY_ARITY,
    Family,
    SurvivalParams,
    hazard,
    log_density,
    log_survival,
    sample_truncated,
)

__version__ = "0.1.0"
