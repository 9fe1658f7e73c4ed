"""flowfit: macroscopic traffic modelling calibrated against traffic counts.

Pipeline: trip generation from zonal attributes, gravity distribution with
Furness balancing, shortest-path assignment with optional MSA congestion
feedback, GEH scoring against observed counts, and derivative-free
calibration of the per-stratum weights (mu, beta).
"""

from .assignment import (
    AssignmentResult,
    PathSet,
    UnreachableODError,
    assign_all_or_nothing,
    assign_iterative,
    total_link_flows,
)
from .calibrate import (
    CalibrationResult,
    ModelObjective,
    WeightVector,
    calibrate,
    nelder_mead,
    objective_fn,
    predict_flows,
    simulated_annealing,
    split_test,
)
from .demand import (
    DemandStratum,
    ODMatrix,
    TripEnds,
    Zone,
    derive_jobs,
    deterrence,
    distribute,
    furness_balance,
    generate_trip_ends,
    seed_matrix,
)
from .metrics import (
    EvaluationReport,
    SplitExperimentResult,
    TrafficCount,
    evaluate,
    geh_from_daily,
    geh_hourly,
    report_text,
    split_counts,
)
from .network import (
    CostMatrix,
    Link,
    Network,
    Node,
    free_flow_times,
    shortest_path_tree,
    skim_matrix,
    validate,
    volume_delay,
)

__version__ = "0.1.0"
