"""Timeout tuning: time-energy tradeoff loci and minimum-achievable curves.

The mean relaunch deadline 1/r is the one knob the source controls, and
the interesting statistics pull it in different directions: a short
deadline wastes attempts that were about to succeed, a long one leaves
lost searchers undetected.  This module scans and minimises the mean
search time and the two energy accounts over that knob.

Time and stopped-energy objectives are closed-form, so their minima come
from a golden-section search (on log of the mean timeout, where the
curves are gently shaped).  The unstopped energy has no closed form and
is minimised over a simulation grid driven by common random numbers, so
the objective is a deterministic function of the timeout and the grid
argmin is reproducible; the residual sampling noise is reported next to
each minimum.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ExponentOverflow, ParameterError
from .model import RaceSpec, SearchParams
from . import analytic
from .sim import SimConfig, simulate_race

__all__ = [
    "Objective",
    "TradeoffPoint",
    "OptimalTimeout",
    "MinCurveRow",
    "tradeoff_locus",
    "optimal_timeout",
    "min_curves_vs_N",
]

_PRESCAN_POINTS = 32
_XTOL_RELATIVE = 1e-4


class Objective(enum.Enum):
    """What to minimise over the timeout rate."""

    MEAN_TIME = "mean_time"
    MEAN_ENERGY_MINUS = "mean_energy_minus"
    MEAN_ENERGY_PLUS = "mean_energy_plus"


@dataclass(frozen=True)
class TradeoffPoint:
    """One point of the time-energy locus traced by varying 1/r."""

    timeout_mean: float
    mean_time: float
    mean_energy_minus: float
    mean_energy_plus: float | None = None

    def __post_init__(self):
        for name in ("timeout_mean", "mean_time", "mean_energy_minus"):
            if getattr(self, name) < 0.0:
                raise ParameterError(name, getattr(self, name),
                                     "locus components must be >= 0")
        if self.mean_energy_plus is not None and self.mean_energy_plus < 0.0:
            raise ParameterError("mean_energy_plus", self.mean_energy_plus,
                                 "locus components must be >= 0")


@dataclass(frozen=True)
class OptimalTimeout:
    """Minimiser of one objective over the timeout rate.

    ``flag`` is "ok" for a proper interior minimum, "no-minimum-in-bracket"
    when the objective is monotone over the bracket (the better boundary is
    returned), and "degenerate-flat" when the objective does not depend on
    the timeout at all (zero search distance).  ``noise_floor`` is the 95%
    half-width of the objective estimate at the optimum; it is 0 for the
    closed-form objectives.
    """

    objective: Objective
    timeout_rate: float
    timeout_mean: float
    value: float
    flag: str = "ok"
    evaluations: int = 0
    noise_floor: float = 0.0


@dataclass(frozen=True)
class MinCurveRow:
    """Per-objective minima over the timeout grid for one fleet size."""

    n_searchers: int
    min_time: float
    timeout_mean_at_min_time: float
    min_energy_minus: float
    timeout_mean_at_min_energy_minus: float
    min_energy_plus: float
    timeout_mean_at_min_energy_plus: float
    time_noise: float = 0.0
    energy_minus_noise: float = 0.0
    energy_plus_noise: float = 0.0


# ---------------------------------------------------------------------------
# locus
# ---------------------------------------------------------------------------

def _check_r_grid(r_grid: Sequence[float]) -> np.ndarray:
    grid = np.asarray(list(r_grid), dtype=float)
    if grid.size == 0:
        raise ParameterError("r_grid", r_grid, "grid must be non-empty")
    if np.any(grid <= 0.0):
        raise ParameterError("r_grid", r_grid, "timeout rates must be > 0")
    if np.any(np.diff(grid) <= 0.0):
        raise ParameterError("r_grid", r_grid,
                             "grid must be strictly increasing")
    return grid


def tradeoff_locus(params_base: SearchParams, n_searchers: int,
                   r_grid: Sequence[float], *,
                   include_energy_plus: bool = False,
                   config: SimConfig | None = None) -> list[TradeoffPoint]:
    """Trace (mean time, mean stopped energy) as the timeout varies.

    The time and stopped-energy columns are closed-form and bit
    reproducible.  With ``include_energy_plus`` each grid point also
    carries a simulated unstopped-energy estimate (common random
    numbers across the grid).
    """
    grid = _check_r_grid(r_grid)
    points = []
    for r in grid:
        params = replace(params_base, timeout_rate=float(r))
        fp = analytic.mean_time_fixed_point(params, n_searchers)
        energy = analytic.mean_energy_first_success(params, n_searchers,
                                                    fp.attraction)
        plus = None
        if include_energy_plus:
            result = simulate_race(params, RaceSpec(n_searchers),
                                   config or SimConfig())
            plus = result.energy_unstopped.mean
        points.append(TradeoffPoint(
            timeout_mean=1.0 / float(r),
            mean_time=fp.mean_time,
            mean_energy_minus=energy,
            mean_energy_plus=plus,
        ))
    return points


# ---------------------------------------------------------------------------
# scalar minimisation over the timeout
# ---------------------------------------------------------------------------

def _objective_fn(params_base: SearchParams, n_searchers: int,
                  objective: Objective, race: RaceSpec,
                  config: SimConfig) -> Callable[[float], tuple[float, float]]:
    """Map timeout rate -> (objective value, 95% noise half-width)."""

    def analytic_value(r: float) -> tuple[float, float]:
        params = replace(params_base, timeout_rate=r)
        try:
            fp = analytic.mean_time_fixed_point(params, n_searchers)
            if objective is Objective.MEAN_TIME:
                return fp.mean_time, 0.0
            return analytic.mean_energy_first_success(
                params, n_searchers, fp.attraction), 0.0
        except ExponentOverflow:
            # an astronomically slow regime: dominated by any finite value
            return math.inf, 0.0

    def simulated_value(r: float) -> tuple[float, float]:
        params = replace(params_base, timeout_rate=r)
        result = simulate_race(params, race, config)
        est = result.energy_unstopped
        return est.mean, est.ci_half_width

    if objective is Objective.MEAN_ENERGY_PLUS:
        return simulated_value
    return analytic_value


def optimal_timeout(params_base: SearchParams, n_searchers: int,
                    objective: Objective,
                    r_bounds: tuple[float, float], *,
                    race: RaceSpec | None = None,
                    config: SimConfig | None = None) -> OptimalTimeout:
    """Minimise one objective over the timeout rate within a bracket.

    Works on x = log(1/r).  A coarse scan locates the basin first; if it
    sees several interior local minima the scan is refined directly
    (golden section assumes unimodality), and a minimum sitting on the
    bracket edge is returned as-is with a flag instead of pretending the
    boundary is stationary.
    """
    r_lo, r_hi = r_bounds
    if not (0.0 < r_lo < r_hi):
        raise ParameterError("r_bounds", r_bounds,
                             "need 0 < r_lo < r_hi")
    race = race or RaceSpec(n_searchers)
    config = config or SimConfig(replications=20_000)
    fn = _objective_fn(params_base, n_searchers, objective, race, config)

    xs = np.linspace(math.log(1.0 / r_hi), math.log(1.0 / r_lo),
                     _PRESCAN_POINTS)

    if params_base.distance == 0.0:
        mid = float(math.exp(-0.5 * (xs[0] + xs[-1])))
        return OptimalTimeout(objective, mid, 1.0 / mid, 0.0,
                              flag="degenerate-flat")

    def result(x: float, value: float, noise: float, flag: str,
               evals: int) -> OptimalTimeout:
        r_star = float(math.exp(-x))
        return OptimalTimeout(objective, r_star, 1.0 / r_star, value,
                              flag=flag, evaluations=evals,
                              noise_floor=noise)

    evals = 0

    def f(x: float) -> tuple[float, float]:
        nonlocal evals
        evals += 1
        return fn(float(math.exp(-x)))

    scanned = [f(x) for x in xs]
    values = np.array([v for v, _ in scanned])
    best = int(np.argmin(values))

    if best in (0, len(xs) - 1):
        return result(float(xs[best]), float(values[best]),
                      scanned[best][1], "no-minimum-in-bracket", evals)

    interior_minima = [
        i for i in range(1, len(xs) - 1)
        if values[i] < values[i - 1] and values[i] < values[i + 1]
    ]
    strict_basin = (values[best] < values[best - 1]
                    and values[best] < values[best + 1])

    xtol = _XTOL_RELATIVE * max(1.0, abs(float(xs[best])))
    if (len(interior_minima) > 1 or not strict_basin
            or objective is Objective.MEAN_ENERGY_PLUS):
        # several basins, a plateau, or a noisy objective: refine the scan
        lo, hi = float(xs[best - 1]), float(xs[best + 1])
        value, noise = scanned[best]
        while hi - lo > xtol:
            sub = np.linspace(lo, hi, 17)
            sub_vals = [f(x) for x in sub]
            j = int(np.argmin([v for v, _ in sub_vals]))
            value, noise = sub_vals[j]
            lo = float(sub[max(j - 1, 0)])
            hi = float(sub[min(j + 1, len(sub) - 1)])
        return result(0.5 * (lo + hi), value, noise, "ok", evals)

    res = minimize_scalar(
        lambda x: f(x)[0],
        bracket=(float(xs[best - 1]), float(xs[best]), float(xs[best + 1])),
        method="golden", options={"xtol": _XTOL_RELATIVE},
    )
    return result(float(res.x), float(res.fun), 0.0, "ok", evals)


def min_curves_vs_N(params_base: SearchParams, k_required: int,
                    n_list: Sequence[int], *,
                    r_grid: Sequence[float] | None = None,
                    config: SimConfig | None = None) -> list[MinCurveRow]:
    """Minimum achievable time/energy and the minimising timeouts per
    fleet size.

    For a first-success race the time and stopped-energy minima come
    from the closed-form engine; any quorum deeper than one (and the
    unstopped energy always) is estimated on the timeout grid with
    common random numbers, so rows are reproducible at fixed seed.
    """
    if any(k_required > n for n in n_list):
        raise ParameterError("k_required", k_required,
                             "quorum cannot exceed the smallest fleet")
    grid = _check_r_grid(r_grid if r_grid is not None
                         else np.geomspace(0.004, 0.4, 13))
    config = config or SimConfig(replications=20_000)
    bounds = (float(grid[0]), float(grid[-1]))

    rows = []
    for n in n_list:
        sums = {}
        for r in grid:
            params = replace(params_base, timeout_rate=float(r))
            result = simulate_race(params, RaceSpec(n, k_required), config)
            sums[float(r)] = result

        def grid_min(extract):
            best_r = min(sums, key=lambda r: extract(sums[r]).mean)
            est = extract(sums[best_r])
            return est.mean, 1.0 / best_r, est.ci_half_width

        jp, jp_at, jp_noise = grid_min(lambda res: res.energy_unstopped)

        if k_required == 1:
            t_opt = optimal_timeout(params_base, n, Objective.MEAN_TIME,
                                    bounds)
            jm_opt = optimal_timeout(params_base, n,
                                     Objective.MEAN_ENERGY_MINUS, bounds)
            rows.append(MinCurveRow(
                n_searchers=n,
                min_time=t_opt.value,
                timeout_mean_at_min_time=t_opt.timeout_mean,
                min_energy_minus=jm_opt.value,
                timeout_mean_at_min_energy_minus=jm_opt.timeout_mean,
                min_energy_plus=jp,
                timeout_mean_at_min_energy_plus=jp_at,
                energy_plus_noise=jp_noise,
            ))
        else:
            t, t_at, t_noise = grid_min(lambda res: res.time)
            jm, jm_at, jm_noise = grid_min(lambda res: res.energy_stopped)
            rows.append(MinCurveRow(
                n_searchers=n,
                min_time=t, timeout_mean_at_min_time=t_at,
                min_energy_minus=jm,
                timeout_mean_at_min_energy_minus=jm_at,
                min_energy_plus=jp,
                timeout_mean_at_min_energy_plus=jp_at,
                time_noise=t_noise,
                energy_minus_noise=jm_noise,
                energy_plus_noise=jp_noise,
            ))
    return rows
