"""Cache placement and delivery simulation for helper-assisted wireless cells
and device-to-device cluster networks."""

from .d2d import (
    ClusterStats,
    D2DScenario,
    cache_random,
    cluster_active,
    cvc_deterministic,
    expected_active_analytic,
    rgg_build,
    rgg_served_users,
    scaling_check,
    simulate_active_clusters,
    sweep_gamma1,
    sweep_r,
)
from .errors import (
    ConfigError,
    DegenerateInstanceError,
    InfeasiblePlacementError,
    InstanceTooLargeError,
    InsufficientDataError,
    InvalidParameterError,
)
from .macro_sim import (
    MacroConfig,
    SimOutcome,
    WorkloadSpec,
    count_satisfied,
    simulate_snapshot,
    sweep_capacity,
    sweep_helper_count,
)
from .placement_coded import (
    CodedPlacement,
    build_lp,
    evaluate_coded_delay,
    group_files,
    solve_grouped,
    solve_lp,
)
from .placement_uncoded import (
    HelperSpecs,
    UncodedPlacement,
    baseline_delay,
    brute_force_place,
    evaluate_delay,
    greedy_place,
    most_popular_place,
)
from .popularity import (
    PopularityModel,
    RequestTrace,
    catalog_size,
    fit_zipf,
    sample_requests,
    zipf_model,
)
from .rng import stream
from .topology import (
    CellLayout,
    ConnectivityGraph,
    LinkRateModel,
    build_connectivity,
    place_helpers,
    place_uniform,
)

__version__ = "0.1.0"

__all__ = [
    "CellLayout",
    "ClusterStats",
    "CodedPlacement",
    "ConfigError",
    "ConnectivityGraph",
    "D2DScenario",
    "DegenerateInstanceError",
    "HelperSpecs",
    "InfeasiblePlacementError",
    "InstanceTooLargeError",
    "InsufficientDataError",
    "InvalidParameterError",
    "LinkRateModel",
    "MacroConfig",
    "PopularityModel",
    "RequestTrace",
    "SimOutcome",
    "UncodedPlacement",
    "WorkloadSpec",
    "baseline_delay",
    "brute_force_place",
    "build_connectivity",
    "build_lp",
    "cache_random",
    "catalog_size",
    "cluster_active",
    "count_satisfied",
    "cvc_deterministic",
    "evaluate_coded_delay",
    "evaluate_delay",
    "expected_active_analytic",
    "fit_zipf",
    "greedy_place",
    "group_files",
    "most_popular_place",
    "place_helpers",
    "place_uniform",
    "rgg_build",
    "rgg_served_users",
    "sample_requests",
    "scaling_check",
    "simulate_active_clusters",
    "simulate_snapshot",
    "solve_grouped",
    "solve_lp",
    "stream",
    "sweep_capacity",
    "sweep_gamma1",
    "sweep_helper_count",
    "sweep_r",
    "zipf_model",
]
