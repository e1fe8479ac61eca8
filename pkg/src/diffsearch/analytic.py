"""Closed-form renewal results for racing diffusive searchers.

The central quantity is the mean time until the first of ``n`` concurrent
searchers reaches the object.  Each searcher's renewal cycle is an attempt
(diffusion from the starting distance, cut short at the combined
curtailment rate ``loss + timeout + attraction``) followed, on failure, by
the delays needed for the source to notice and relaunch.  A race with
``n > 1`` searchers folds the effect of the other searchers into an
attraction rate ``a`` that must satisfy a self-consistency condition,
solved here by damped fixed-point iteration with a bracketed-root
fallback.
"""

from __future__ import annotations

import math

from scipy.optimize import brentq

from .errors import DegenerateCurtailment, ExponentOverflow, NoConvergence
from .model import (
    MAX_EXPONENT,
    Finiteness,
    FinitenessReason,
    FinitenessVerdict,
    RaceFixedPoint,
    SearchParams,
    curtailment_exponent,
)

__all__ = [
    "mean_time",
    "mean_time_fixed_point",
    "mean_energy_first_success",
    "classify_finiteness",
    "deterministic_limit_mean_time",
    "rest_state_probability",
]

# fixed-point iteration controls
_DAMPING = 0.5
_REL_TOL = 1e-10
_MAX_ITER = 10_000


def _check_curtailment(p: SearchParams, attraction: float) -> float:
    if attraction < 0.0:
        raise ValueError(f"attraction must be >= 0, got {attraction}")
    u = p.loss_rate + p.timeout_rate + attraction
    if u <= 0.0:
        raise DegenerateCurtailment(
            "loss, timeout and attraction are all zero; attempts are never "
            "cut short and the renewal formulas do not apply"
        )
    return u


def mean_time(params: SearchParams, n: int = 1, attraction: float = 0.0,
              *, _soft_overflow: bool = False) -> float:
    """Mean time for the first of ``n`` searchers to reach the object,
    given the race attraction rate ``a``.

    Evaluates ``(mu + r + a) / (n (mu + a) (r + a)) * (e^X - 1)`` with
    ``X = (D/c) (b + sqrt(b^2 + 2 c (lambda + r + a)))``.  For ``n = 1``
    use ``attraction = 0``; for ``n > 1`` the attraction normally comes
    from :func:`mean_time_fixed_point`.

    Returns ``inf`` when lost searchers can never be recycled
    (``timeout_rate + attraction == 0`` with a positive loss rate).
    Raises :class:`ExponentOverflow` when ``e^X`` exceeds double range.
    """
    if params.distance == 0.0:
        return 0.0
    u = _check_curtailment(params, attraction)
    if params.diffusion == 0.0:
        return deterministic_limit_mean_time(params)
    x = curtailment_exponent(params, u)
    if x > MAX_EXPONENT:
        if _soft_overflow:
            return math.inf
        raise ExponentOverflow(x)
    mu, r, a = params.relaunch_rate, params.timeout_rate, attraction
    if r + a == 0.0:
        # losses happen but nothing ever tells the source; no relaunch.
        return math.inf
    pref = (mu + r + a) / (n * (mu + a) * (r + a))
    return pref * math.expm1(x)


def mean_energy_first_success(params: SearchParams, n: int = 1,
                              attraction: float | None = None) -> float:
    """Mean total searching time spent by all ``n`` searchers up to the
    instant the first one reaches the object, assuming the rest are then
    stopped.

    ``(e^X - 1) / (lambda + r + a)`` with the same exponent as
    :func:`mean_time`.  When ``attraction`` is omitted it is solved
    self-consistently for the ``n``-searcher race.
    """
    if params.distance == 0.0:
        return 0.0
    if attraction is None:
        attraction = mean_time_fixed_point(params, n).attraction
    u = _check_curtailment(params, attraction)
    if params.diffusion == 0.0:
        if params.drift >= 0.0:
            return math.inf
        return math.expm1(params.distance * u / -params.drift) / u
    x = curtailment_exponent(params, u)
    if x > MAX_EXPONENT:
        raise ExponentOverflow(x)
    return math.expm1(x) / u


def mean_time_fixed_point(params: SearchParams, n: int) -> RaceFixedPoint:
    """Solve the self-consistency ``a = (n-1) / (n (1 + E[T]))`` and return
    the attraction together with the race mean time.

    For ``n = 1`` the attraction is exactly zero.  Damped iteration
    (factor 0.5) from ``a = 0``; if it fails to converge in 10^4 rounds a
    bracketed root solve on the residual is used, and only if that also
    fails is :class:`NoConvergence` raised.
    """
    if not isinstance(n, int) or n < 1:
        raise ValueError(f"n must be an integer >= 1, got {n}")
    if n == 1:
        return RaceFixedPoint(attraction=0.0,
                              mean_time=mean_time(params, 1, 0.0))
    if params.distance == 0.0:
        # races end instantly; the attraction saturates at (n-1)/n
        return RaceFixedPoint(attraction=(n - 1) / n, mean_time=0.0)

    a_hi = (n - 1) / n  # attraction if the race ended in zero time

    def fmap(a: float) -> float:
        t = mean_time(params, n, a, _soft_overflow=True)
        return (n - 1) / (n * (1.0 + t))

    # start strictly inside the bracket when a=0 would be degenerate
    a = 0.0
    if params.loss_rate + params.timeout_rate == 0.0:
        a = 0.5 * a_hi
    prev_t = None
    for it in range(1, _MAX_ITER + 1):
        target = fmap(a)
        a_next = (1.0 - _DAMPING) * a + _DAMPING * target
        if abs(a_next - a) <= _REL_TOL * max(a_next, 1e-300):
            a = a_next
            prev_t = mean_time(params, n, a, _soft_overflow=True)
            residual = abs(a - fmap(a))
            return RaceFixedPoint(attraction=a, mean_time=prev_t,
                                  iterations=it, residual=residual)
        a = a_next

    # fallback: the residual a - fmap(a) changes sign on (0, a_hi]
    lo = 1e-300 if params.loss_rate + params.timeout_rate == 0.0 else 0.0
    try:
        root = brentq(lambda x: x - fmap(x), lo, a_hi, xtol=1e-14,
                      rtol=8.9e-16, maxiter=200)
    except ValueError as exc:
        raise NoConvergence(
            "race attraction fixed point did not converge",
            iterations=_MAX_ITER) from exc
    t = mean_time(params, n, root, _soft_overflow=True)
    return RaceFixedPoint(attraction=float(root), mean_time=t,
                          iterations=_MAX_ITER,
                          residual=abs(root - fmap(root)))


def classify_finiteness(params: SearchParams, n: int = 1,
                        attraction: float | None = None) -> Finiteness:
    """Classify whether the mean search time is finite.

    With no randomness the searcher reaches the object iff the drift
    points at it.  With randomness, any curtailment (loss, timeout or race
    attraction) makes the mean finite regardless of drift; without any
    curtailment only a drift toward the object does.
    """
    if attraction is None:
        attraction = 0.0 if n == 1 else mean_time_fixed_point(params, n).attraction
    u = params.loss_rate + params.timeout_rate + attraction
    if params.diffusion == 0.0:
        if params.drift < 0.0:
            return Finiteness(FinitenessVerdict.FINITE,
                              FinitenessReason.DETERMINISTIC_TOWARD_OBJECT)
        return Finiteness(FinitenessVerdict.INFINITE,
                          FinitenessReason.DETERMINISTIC_AWAY_OR_ZERO_DRIFT)
    if u > 0.0:
        return Finiteness(FinitenessVerdict.FINITE,
                          FinitenessReason.RANDOMISED_WITH_CURTAILMENT)
    # diffusing freely with no curtailment: only the drift can help
    if params.drift < 0.0:
        return Finiteness(FinitenessVerdict.FINITE,
                          FinitenessReason.DETERMINISTIC_TOWARD_OBJECT)
    return Finiteness(FinitenessVerdict.INFINITE,
                      FinitenessReason.NO_CURTAILMENT)


def deterministic_limit_mean_time(params: SearchParams) -> float:
    """Zero-diffusion limit of the single-searcher mean time.

    For drift ``b < 0`` the searcher travels ballistically and the mean is
    ``((mu + r) / (mu r)) * (e^{D (lambda + r) / |b|} - 1)``; for
    ``b >= 0`` it never arrives and the mean is infinite.
    """
    if params.drift >= 0.0:
        return math.inf
    if params.distance == 0.0:
        return 0.0
    u = params.loss_rate + params.timeout_rate
    mu, r = params.relaunch_rate, params.timeout_rate
    x = params.distance * u / -params.drift
    if u == 0.0:
        return params.distance / -params.drift
    if r == 0.0:
        return math.inf if params.loss_rate > 0.0 else params.distance / -params.drift
    if x > MAX_EXPONENT:
        raise ExponentOverflow(x)
    return (mu + r) / (mu * r) * math.expm1(x)


def rest_state_probability(mean_race_time: float) -> float:
    """Long-run fraction of time the repeating race spends resting.

    One unit of rest per race gives ``P = 1 / (1 + E[T])``; equivalently
    ``E[T] = 1/P - 1``.
    """
    if mean_race_time < 0.0:
        raise ValueError("mean race time must be >= 0")
    if math.isinf(mean_race_time):
        return 0.0
    return 1.0 / (1.0 + mean_race_time)
