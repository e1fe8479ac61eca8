"""Monte Carlo estimators for races, energies, and segmented media.

The heavy lifting lives in :mod:`diffsearch.simkern`.  This module
validates inputs, chooses a censoring horizon, runs the kernels, and
reduces the per-replication outputs into :class:`SimEstimate` values.

Reproducibility contract: every replication derives its own random
stream from ``(seed, replication, searcher)``, so results are
bit-identical for a given seed regardless of how many threads numba
uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import analytic
from .errors import ParameterError
from .model import RaceSpec, SearchParams, SegmentProfile, SimEstimate
from . import simkern

__all__ = [
    "SimConfig",
    "RaceSimResult",
    "SegmentSimResult",
    "simulate_race",
    "simulate_segmented",
    "segment_attempt_success",
    "empirical_cdf",
]

#: fraction of censored replications above which estimates are rejected
_CENSOR_BUDGET = 1e-3


@dataclass(frozen=True)
class SimConfig:
    """Knobs shared by all simulation entry points.

    ``horizon`` censors replications that run longer than this virtual
    time; ``None`` picks ``horizon_factor`` times the analytic mean (or
    a large constant when the mean is not finite).
    """

    replications: int = 100_000
    dt: float = 1e-2
    seed: int = 20140901
    horizon: float | None = None
    horizon_factor: float = 1e3

    def __post_init__(self) -> None:
        if self.replications <= 0:
            raise ParameterError("replications", self.replications,
                                 "needs at least one replication")
        if not (self.dt > 0.0) or not math.isfinite(self.dt):
            raise ParameterError("dt", self.dt, "step size must be positive")
        if self.horizon is not None and not (self.horizon > 0.0):
            raise ParameterError("horizon", self.horizon,
                                 "censor horizon must be positive")


@dataclass(frozen=True)
class RaceSimResult:
    """Reduced race statistics plus the raw per-replication samples."""

    time: SimEstimate
    energy_stopped: SimEstimate
    energy_unstopped: SimEstimate
    mean_losses: float
    mean_timeouts: float
    censored: int
    replications: int
    race_times: np.ndarray = field(repr=False)
    energies_stopped: np.ndarray = field(repr=False)
    energies_unstopped: np.ndarray = field(repr=False)

    @property
    def censoring_fraction(self) -> float:
        return self.censored / self.replications


@dataclass(frozen=True)
class SegmentSimResult:
    time: SimEstimate
    active_time: SimEstimate
    mean_losses: float
    mean_timeouts: float
    mean_attempts: float
    censored: int
    replications: int
    search_times: np.ndarray = field(repr=False)


def _reduce(samples: np.ndarray, valid: np.ndarray) -> SimEstimate:
    kept = samples[valid]
    n = kept.size
    mean = float(kept.mean())
    var = float(kept.var(ddof=1)) if n > 1 else 0.0
    return SimEstimate(mean=mean, variance=var, samples=n)


def _pick_horizon(config: SimConfig, scale_hint: float) -> float:
    if config.horizon is not None:
        return config.horizon
    if math.isfinite(scale_hint) and scale_hint > 0.0:
        return config.horizon_factor * scale_hint
    return 1e6


def simulate_race(params: SearchParams, race: RaceSpec | int = 1,
                  config: SimConfig | None = None) -> RaceSimResult:
    """Estimate race time and both energy totals by direct simulation.

    ``race`` may be a plain integer (number of searchers, first success
    wins) or a full :class:`RaceSpec`.  The stopped energy clips every
    searcher's active time at the race end; the unstopped energy lets
    interrupted attempts run to their own end but schedules no relaunch
    after the race is over.
    """
    if isinstance(race, int):
        race = RaceSpec(n_searchers=race)
    config = config or SimConfig()
    try:
        hint = analytic.mean_time(params, race.n_searchers,
                                  0.0, _soft_overflow=True)
    except Exception:
        hint = math.inf
    horizon = _pick_horizon(config, hint)

    reps = config.replications
    out_time = np.empty(reps)
    out_jm = np.empty(reps)
    out_jp = np.empty(reps)
    out_loss = np.empty(reps)
    out_to = np.empty(reps)
    out_cens = np.empty(reps, dtype=np.bool_)
    simkern.race_kernel(
        np.uint64(config.seed), reps, race.n_searchers, race.k_required,
        params.drift, params.diffusion, params.loss_rate,
        params.timeout_rate, params.relaunch_rate, params.distance,
        config.dt, horizon,
        out_time, out_jm, out_jp, out_loss, out_to, out_cens)

    censored = int(out_cens.sum())
    if censored > _CENSOR_BUDGET * reps:
        raise ParameterError(
            "horizon", horizon,
            f"{censored}/{reps} replications were censored; raise horizon "
            "or horizon_factor")
    valid = ~out_cens
    return RaceSimResult(
        time=_reduce(out_time, valid),
        energy_stopped=_reduce(out_jm, valid),
        energy_unstopped=_reduce(out_jp, valid),
        mean_losses=float(out_loss[valid].mean()),
        mean_timeouts=float(out_to[valid].mean()),
        censored=censored,
        replications=reps,
        race_times=out_time[valid],
        energies_stopped=out_jm[valid],
        energies_unstopped=out_jp[valid],
    )


def _profile_arrays(profile: SegmentProfile):
    interior = np.asarray(profile.edges, dtype=np.float64)
    drifts = np.asarray([s.drift for s in profile.segments])
    diffusions = np.asarray([s.diffusion for s in profile.segments])
    losses = np.asarray([s.loss_rate for s in profile.segments])
    return interior, drifts, diffusions, losses


def simulate_segmented(profile: SegmentProfile,
                       config: SimConfig | None = None) -> SegmentSimResult:
    """Single-searcher search time in a piecewise-constant medium."""
    config = config or SimConfig()
    if config.horizon is not None:
        horizon = config.horizon
    else:
        from . import segments as _segments
        try:
            hint = _segments.mean_time_segmented(profile)
        except Exception:
            hint = math.inf
        horizon = _pick_horizon(config, hint)

    interior, drifts, diffusions, losses = _profile_arrays(profile)
    reps = config.replications
    out_time = np.empty(reps)
    out_active = np.empty(reps)
    out_loss = np.empty(reps)
    out_to = np.empty(reps)
    out_att = np.empty(reps)
    out_cens = np.empty(reps, dtype=np.bool_)
    simkern.segment_kernel(
        np.uint64(config.seed), reps, interior, drifts, diffusions, losses,
        profile.timeout_rate, profile.relaunch_rate, profile.distance,
        config.dt, horizon,
        out_time, out_active, out_loss, out_to, out_att, out_cens)

    censored = int(out_cens.sum())
    if censored > _CENSOR_BUDGET * reps:
        raise ParameterError(
            "horizon", horizon,
            f"{censored}/{reps} replications were censored; raise horizon "
            "or horizon_factor")
    valid = ~out_cens
    return SegmentSimResult(
        time=_reduce(out_time, valid),
        active_time=_reduce(out_active, valid),
        mean_losses=float(out_loss[valid].mean()),
        mean_timeouts=float(out_to[valid].mean()),
        mean_attempts=float(out_att[valid].mean()),
        censored=censored,
        replications=reps,
        search_times=out_time[valid],
    )


def segment_attempt_success(profile: SegmentProfile, attempts: int = 100_000,
                            dt: float = 1e-2, seed: int = 20140901) -> SimEstimate:
    """Fraction of single attempts that reach the object before loss or
    time-out; the Bernoulli counterpart of the killed success probability."""
    interior, drifts, diffusions, losses = _profile_arrays(profile)
    out = np.zeros(attempts, dtype=np.int64)
    # individual attempts are short; a generous per-attempt cap only
    # guards the r = 0 corner
    cap = 1e7 if profile.timeout_rate == 0.0 else 1e4 / profile.timeout_rate
    simkern.segment_attempt_kernel(
        np.uint64(seed), attempts, interior, drifts, diffusions, losses,
        profile.timeout_rate, profile.distance, dt, cap, out)
    p = float(out.mean())
    return SimEstimate(mean=p, variance=p * (1.0 - p), samples=attempts)


def empirical_cdf(samples: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Right-continuous empirical distribution function on ``times``."""
    sorted_samples = np.sort(np.asarray(samples))
    times = np.asarray(times)
    return np.searchsorted(sorted_samples, times, side="right") / sorted_samples.size
