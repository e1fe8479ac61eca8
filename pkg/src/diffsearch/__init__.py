"""diffsearch: statistics of racing diffusive searchers.

A population of independent searchers starts a given distance from an
object and diffuses toward (or away from) it, subject to losses, timeouts
and relaunch delays.  The package provides closed-form renewal results,
transform-based distribution functions, Monte Carlo cross-validation,
layered-medium solvers, timeout optimisation and a small CLI.
"""

from .errors import (
    DegenerateCurtailment,
    DensityVanishes,
    DiffSearchError,
    ExponentOverflow,
    IllConditioned,
    InvalidRace,
    InversionUnstable,
    NegativeDiffusion,
    NegativeDistance,
    NegativeRate,
    NoConvergence,
    NonPositiveMu,
    ParameterError,
    UnreachableDeadline,
)
from .model import (
    Finiteness,
    FinitenessReason,
    FinitenessVerdict,
    RaceFixedPoint,
    RaceSpec,
    SearchParams,
    Segment,
    SegmentProfile,
    SimEstimate,
    Stopping,
    params_from_config,
    params_to_config,
    profile_from_config,
    race_from_config,
)
from .analytic import (
    classify_finiteness,
    deterministic_limit_mean_time,
    mean_energy_first_success,
    mean_time,
    mean_time_fixed_point,
    rest_state_probability,
)
from .fpt import (
    attempt_success_probability,
    cdf_G,
    order_statistic_cdf,
    pure_fpt_cdf_G0,
    quantile,
    quantile_clt,
    search_time_lt,
    searchers_needed,
    searchers_needed_exact,
)
from .sim import (
    RaceSimResult,
    SegmentSimResult,
    SimConfig,
    segment_attempt_success,
    simulate_race,
    simulate_segmented,
)
from .segments import (
    PhasePoint,
    PhaseSweepSpec,
    attempt_statistics,
    killed_success_probability,
    mean_energy_segmented,
    mean_time_segmented,
    phase_profile,
    phase_sweep,
)
from .optimize import (
    MinCurveRow,
    Objective,
    OptimalTimeout,
    TradeoffPoint,
    min_curves_vs_N,
    optimal_timeout,
    tradeoff_locus,
)

__version__ = "0.1.0"
