"""Simulation of single-server processor-sharing queues with time-varying
arrival rates and service-rate controls targeting the virtual response time."""

from ._version import VERSION as __version__
from .arrivals import ArrivalStream, attach_sizes, generate
from .controls import (
    ControlKind,
    ControlSpec,
    UnstableParametersError,
    control_rate,
    difference_matching_rate,
    light_traffic_constants,
    predict_response_fcfs,
    predict_response_ps,
    square_root_rate,
    variability_factors,
)
from .distributions import (
    DistributionSpec,
    Family,
    cdf,
    equilibrium_mean,
    erlang,
    exponential,
    lognormal,
    sample,
    sample_equilibrium,
    survival,
)
from .engine import SimulationPath, Snapshot, queue_length_at, run
from .harness import (
    ArrivalRateShape,
    CellConfig,
    CellResult,
    ControlChoice,
    ExperimentConfig,
    PairSpec,
    expand_cells,
    load_config,
    parse_config,
    run_all,
    run_cell,
)
from .metrics import (
    AlignmentError,
    EnsembleSeries,
    StabilizationReport,
    ensemble_mean,
    is_good,
    relative_amplitude,
    relative_gap,
    stabilization_report,
)
from .rates import (
    CallableRate,
    ConstantRate,
    CumulativeRate,
    RateFunction,
    SinusoidalRate,
    cumulative,
)
from .virtual_response import ReplayCapExceeded, SizePolicy, mean_response_series, probe

__all__ = [
    "__version__",
    "ArrivalStream",
    "attach_sizes",
    "generate",
    "ControlKind",
    "ControlSpec",
    "UnstableParametersError",
    "control_rate",
    "difference_matching_rate",
    "light_traffic_constants",
    "predict_response_fcfs",
    "predict_response_ps",
    "square_root_rate",
    "variability_factors",
    "DistributionSpec",
    "Family",
    "cdf",
    "equilibrium_mean",
    "erlang",
    "exponential",
    "lognormal",
    "sample",
    "sample_equilibrium",
    "survival",
    "SimulationPath",
    "Snapshot",
    "queue_length_at",
    "run",
    "ArrivalRateShape",
    "CellConfig",
    "CellResult",
    "ControlChoice",
    "ExperimentConfig",
    "PairSpec",
    "expand_cells",
    "load_config",
    "parse_config",
    "run_all",
    "run_cell",
    "AlignmentError",
    "EnsembleSeries",
    "StabilizationReport",
    "ensemble_mean",
    "is_good",
    "relative_amplitude",
    "relative_gap",
    "stabilization_report",
    "CallableRate",
    "ConstantRate",
    "CumulativeRate",
    "RateFunction",
    "SinusoidalRate",
    "cumulative",
    "ReplayCapExceeded",
    "SizePolicy",
    "mean_response_series",
    "probe",
]
