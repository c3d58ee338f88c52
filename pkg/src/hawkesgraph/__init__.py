"""Simulation and dependency-graph recovery for non-stationary multivariate
Hawkes processes."""

from .detect import (
    DetectorConfig,
    calibrate_threshold,
    detect,
    detect_subset,
    load_graph,
    pair_score,
    save_graph,
    suggest_epsilon,
    theorem_schedule,
    theorem_threshold,
)
from .expectations import (
    DriftReport,
    ExpectationReport,
    drift_matrix,
    mc_delta_drift,
    mc_indicator,
    predicted_pair,
    predicted_pattern,
    predicted_triple,
    within_envelope,
)
from .experiments import (
    InfeasibleModelError,
    ModelRanges,
    RateBoundReport,
    TrialResult,
    planted_model,
    random_model,
    rate_bound_check,
    run_trial,
    sweep,
)
from .model import (
    AssumptionCheck,
    BaselineSpec,
    DependencyGraph,
    HawkesModel,
    KernelSpec,
    ModelConstants,
    ValidationReport,
    load_model,
    save_model,
    true_graph,
    validate_model,
)
from .simulation import (
    DominatingRateError,
    Event,
    EventLog,
    build_tracker,
    child_seed,
    intensity,
    load_events,
    max_intensity_trace,
    save_events,
    simulate,
    simulate_continuation,
)
from .stats import (
    BinGrid,
    PairStatistics,
    accumulate,
    accumulate_all,
    bin_count,
    bin_events,
    jitter,
    load_stats,
    pair_delta,
    save_stats,
    triple_delta,
    window_count,
)

__version__ = "0.1.0"
