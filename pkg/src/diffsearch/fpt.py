"""First-passage and renewal transform machinery for a single searcher.

An attempt is a diffusion from the starting distance toward the object,
exposed to the combined curtailment hazard (loss + timeout).  The full
search time alternates failed attempts with relaunch delays until an
attempt succeeds.  This module provides the attempt-level closed forms,
the Laplace transform of the full search time, its numerically inverted
distribution function, and the order-statistic / quorum results built on
top of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr  # standard normal CDF, vectorised
from scipy.stats import binom

from . import analytic
from .errors import (
    DegenerateCurtailment,
    DensityVanishes,
    ExponentOverflow,
    InversionUnstable,
    UnreachableDeadline,
)
from .laplace import InversionConfig, euler_inversion, talbot_inversion
from .model import MAX_EXPONENT, SearchParams, curtailment_exponent

__all__ = [
    "FptResult",
    "CltQuantile",
    "MeanConsistency",
    "pure_fpt_cdf_G0",
    "attempt_lt",
    "attempt_success_probability",
    "search_time_lt",
    "cdf_G",
    "pdf_g",
    "quantile",
    "order_statistic_cdf",
    "quantile_clt",
    "searchers_needed",
    "mean_time_consistency",
]

#: treat probabilities below this as numerically zero
_PROB_FLOOR = 1e-12
#: oscillation tolerance before the inversion is declared unstable
_OSC_TOL = 1e-6


@dataclass(frozen=True)
class FptResult:
    """Search-time distribution on a time grid."""

    times: np.ndarray
    cdf: np.ndarray
    pdf: np.ndarray | None = None


@dataclass(frozen=True)
class CltQuantile:
    """Normal approximation for the time of the ceil(p*n)-th success."""

    mean: float
    variance: float


@dataclass(frozen=True)
class MeanConsistency:
    """Closed-form mean vs the mean integrated from the inverted CDF."""

    closed_form: float
    from_cdf: float

    @property
    def rel_diff(self) -> float:
        return abs(self.from_cdf - self.closed_form) / abs(self.closed_form)


# --------------------------------------------------------------------------
# attempt level
# --------------------------------------------------------------------------


def pure_fpt_cdf_G0(params: SearchParams, t) -> np.ndarray:
    """Distribution function of the bare first-passage time to the object,
    with no curtailment.

    ``G0(t) = Phi(-(D + b t)/sqrt(c t)) + e^{-2 b D / c} Phi((b t - D)/sqrt(c t))``.
    For drift away from the object this is defective with total mass
    ``e^{-2 b D / c}``; no renormalisation is applied.
    """
    if params.diffusion <= 0.0:
        raise ValueError("pure first-passage CDF needs diffusion > 0")
    t = np.asarray(t, dtype=float)
    b, c, d = params.drift, params.diffusion, params.distance
    if d == 0.0:
        return np.ones_like(t)
    out = np.zeros_like(t)
    pos = t > 0.0
    tp = t[pos]
    sig = np.sqrt(c * tp)
    mirror_exp = -2.0 * b * d / c
    # guard the mirror term: it multiplies a Phi that underfows first
    mirror = np.exp(min(mirror_exp, MAX_EXPONENT)) if mirror_exp <= MAX_EXPONENT else np.inf
    out[pos] = ndtr(-(d + b * tp) / sig) + mirror * ndtr((b * tp - d) / sig)
    return np.clip(out, 0.0, 1.0)


def _drift_root_cplx(b: float, y: np.ndarray) -> np.ndarray:
    """Complex ``b + sqrt(b^2 + y)`` stable against cancellation for b < 0."""
    s = np.sqrt(b * b + y)
    if b >= 0.0:
        return b + s
    return y / (s - b)


def attempt_lt(params: SearchParams, s) -> np.ndarray:
    """Laplace transform of the bare first-passage time,
    ``exp(-(D/c) (b + sqrt(b^2 + 2 c s)))``; accepts complex ``s``."""
    if params.diffusion <= 0.0:
        raise ValueError("attempt transform needs diffusion > 0")
    s = np.asarray(s, dtype=complex)
    root = _drift_root_cplx(params.drift, 2.0 * params.diffusion * s)
    return np.exp(-(params.distance / params.diffusion) * root)


def attempt_success_probability(params: SearchParams) -> float:
    """Probability that one attempt reaches the object before being cut
    short at the combined rate ``loss + timeout``."""
    if params.diffusion <= 0.0:
        raise ValueError("attempt success probability needs diffusion > 0")
    if params.distance == 0.0:
        return 1.0
    u = params.loss_rate + params.timeout_rate
    x = curtailment_exponent(params, u)
    return math.exp(-x)


# --------------------------------------------------------------------------
# full search time
# --------------------------------------------------------------------------


def search_time_lt(params: SearchParams, s) -> np.ndarray:
    """Laplace transform ``E[e^{-s T}]`` of the single-searcher search time.

    Renewal form ``psi / (1 - eta * delta)`` where ``psi`` transforms a
    successful attempt, ``eta`` a failed one, and ``delta`` the relaunch
    delays (a timeout costs one relaunch delay; a loss first waits for the
    timeout to reveal it).  Requires a positive combined curtailment rate.
    """
    u = params.loss_rate + params.timeout_rate
    if u <= 0.0:
        raise DegenerateCurtailment(
            "search-time transform needs loss_rate + timeout_rate > 0"
        )
    scalar = np.isscalar(s) or np.ndim(s) == 0
    s = np.asarray(s, dtype=complex)
    if params.distance == 0.0:
        out = np.ones_like(s)
        return out.item() if scalar else out

    lam, r, mu = params.loss_rate, params.timeout_rate, params.relaunch_rate
    phi = attempt_lt(params, s + u)
    psi = phi
    eta = (u / (s + u)) * (1.0 - phi)
    relaunch = mu / (s + mu)
    if r > 0.0:
        reveal = np.where(np.abs(s) == 0.0, 1.0, r / (s + r))
    else:
        # a lost searcher is never revealed: that branch contributes no mass
        reveal = np.where(np.abs(s) == 0.0, 0.0, 0.0 * s)
    delta = (r / u) * relaunch + (lam / u) * reveal * relaunch
    out = psi / (1.0 - eta * delta)
    return out.item() if scalar else out


def _cdf_transform(params: SearchParams):
    def transform(s):
        return search_time_lt(params, s) / s
    return transform


def _postprocess_cdf(raw: np.ndarray) -> tuple[np.ndarray, float]:
    """Clamp and monotonise an inverted CDF; return it with the worst
    violation seen (oscillation amplitude or out-of-range excursion)."""
    viol = 0.0
    if raw.size:
        viol = max(viol, float(-raw.min()), float(raw.max() - 1.0))
        drops = np.diff(raw)
        if drops.size:
            viol = max(viol, float(-drops.min()))
    fixed = np.maximum.accumulate(np.clip(raw, 0.0, 1.0))
    return fixed, max(viol, 0.0)


def cdf_G(params: SearchParams, times, config: InversionConfig | None = None,
          with_pdf: bool = False) -> FptResult:
    """Distribution function of the search time on a grid of times >= 0.

    The transform of the CDF is inverted by Euler summation; if the result
    oscillates beyond tolerance the Talbot rule is tried, and if that also
    oscillates :class:`InversionUnstable` is raised.  Values are clamped
    to [0, 1] and monotonised (violations within tolerance only).
    """
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if t.size == 0:
        raise ValueError("empty time grid")
    if np.any(np.diff(t) <= 0.0) or t[0] < 0.0:
        raise ValueError("times must be strictly increasing and >= 0")
    if params.distance == 0.0:
        ones = np.ones_like(t)
        return FptResult(times=t, cdf=ones,
                         pdf=np.zeros_like(t) if with_pdf else None)

    pos = t > 0.0
    transform = _cdf_transform(params)
    raw = np.zeros_like(t)
    raw[pos] = euler_inversion(transform, t[pos], config)
    fixed, viol = _postprocess_cdf(raw)
    if viol > _OSC_TOL:
        raw[pos] = talbot_inversion(transform, t[pos], config)
        fixed, viol = _postprocess_cdf(raw)
        if viol > _OSC_TOL:
            raise InversionUnstable(viol)
    pdf = None
    if with_pdf:
        pdf = np.zeros_like(t)
        pdf[pos] = np.maximum(
            euler_inversion(lambda s: search_time_lt(params, s), t[pos], config),
            0.0,
        )
    return FptResult(times=t, cdf=fixed, pdf=pdf)


def _cdf_at(params: SearchParams, t: float,
            config: InversionConfig | None = None) -> float:
    if t <= 0.0:
        return 0.0
    val = float(euler_inversion(_cdf_transform(params), np.array([t]), config)[0])
    return min(max(val, 0.0), 1.0)


def pdf_g(params: SearchParams, times,
          config: InversionConfig | None = None) -> np.ndarray:
    """Search-time density on a grid, inverted from the raw transform."""
    t = np.atleast_1d(np.asarray(times, dtype=float))
    out = np.zeros_like(t)
    pos = t > 0.0
    out[pos] = euler_inversion(lambda s: search_time_lt(params, s),
                               t[pos], config)
    return np.maximum(out, 0.0)


def _time_scale(params: SearchParams) -> float:
    """A finite characteristic time even when the closed form overflows."""
    try:
        m = analytic.mean_time(params, 1, 0.0)
        if math.isfinite(m) and m > 0.0:
            return m
    except (ExponentOverflow, DegenerateCurtailment):
        pass
    d, c = params.distance, params.diffusion
    scale = d * d / c if c > 0.0 else 0.0
    if params.drift != 0.0:
        scale = max(scale, d / abs(params.drift))
    return max(scale, 1.0)


def quantile(params: SearchParams, p: float,
             config: InversionConfig | None = None) -> float:
    """Time by which the search succeeds with probability ``p``.

    Bisection on the inverted CDF; converges when ``|G(t) - p| <= 1e-9``
    or the bracket is narrower than ``1e-6`` of the mean search time.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0, 1), got {p}")
    if params.distance == 0.0:
        return 0.0
    scale = _time_scale(params)
    lo, hi = 0.0, scale
    for _ in range(200):
        if _cdf_at(params, hi, config) >= p:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise ValueError(
            f"success probability never reaches {p}; the distribution may be defective"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g = _cdf_at(params, mid, config)
        if abs(g - p) <= 1e-9 or (hi - lo) <= 1e-6 * scale:
            return mid
        if g < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# --------------------------------------------------------------------------
# many searchers
# --------------------------------------------------------------------------


def order_statistic_cdf(params: SearchParams, k: int, n: int, t,
                        config: InversionConfig | None = None) -> np.ndarray:
    """P[at least k of n independent searchers have succeeded by time t].

    Binomial tail ``sum_{j>=k} C(n,j) G^j (1-G)^{n-j}`` over the
    single-searcher CDF G.
    """
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    order = np.argsort(t_arr)
    g = cdf_G(params, t_arr[order], config).cdf
    out = np.empty_like(g)
    out[order] = binom.sf(k - 1, n, g)
    if np.isscalar(t) or np.ndim(t) == 0:
        return float(out[0])
    return out


def quantile_clt(params: SearchParams, p: float, n: int,
                 config: InversionConfig | None = None) -> CltQuantile:
    """Asymptotic normal law for the success time of the ceil(p*n)-th of
    ``n`` searchers: mean ``G^{-1}(p)``, variance ``p(1-p) / (n g^2)``."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0, 1), got {p}")
    if n < 1:
        raise ValueError("n must be >= 1")
    tp = quantile(params, p, config)
    dens = float(pdf_g(params, np.array([tp]), config)[0])
    if dens <= _PROB_FLOOR:
        raise DensityVanishes(
            f"search-time density at the {p}-quantile is numerically zero"
        )
    return CltQuantile(mean=tp, variance=p * (1.0 - p) / (n * dens * dens))


def searchers_needed(params: SearchParams, deadline: float, k: int,
                     config: InversionConfig | None = None) -> int:
    """Approximate number of searchers so that ``k`` successes arrive by
    the deadline: ``ceil(k / G(deadline))``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if deadline <= 0.0:
        raise ValueError("deadline must be > 0")
    g = _cdf_at(params, deadline, config)
    if g < _PROB_FLOOR:
        raise UnreachableDeadline(
            f"success probability by {deadline} is below {_PROB_FLOOR}"
        )
    # tiny slack so exact ratios (e.g. 3 / 0.5) are not pushed up a notch
    return int(math.ceil(k / g - 1e-9))


def searchers_needed_exact(params: SearchParams, deadline: float, k: int,
                           confidence: float = 0.5,
                           config: InversionConfig | None = None) -> int:
    """Smallest fleet size whose k-th success arrives by the deadline
    with at least the given probability (default: median criterion).

    The binomial tail is increasing in the fleet size, so a bracket
    doubling plus bisection finds the threshold with one CDF inversion.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")
    if deadline <= 0.0:
        raise ValueError("deadline must be > 0")
    g = _cdf_at(params, deadline, config)
    if g < _PROB_FLOOR:
        raise UnreachableDeadline(
            f"success probability by {deadline} is below {_PROB_FLOOR}"
        )

    def enough(n: int) -> bool:
        return binom.sf(k - 1, n, g) >= confidence

    lo, hi = k, max(k, int(math.ceil(k / g)))
    while not enough(hi):
        lo = hi + 1
        hi *= 2
        if hi > 10_000_000:
            raise UnreachableDeadline(
                f"more than 1e7 searchers needed by {deadline}")
    if enough(lo):
        return lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if enough(mid):
            hi = mid
        else:
            lo = mid
    return hi


# --------------------------------------------------------------------------
# cross-checks
# --------------------------------------------------------------------------


def mean_time_consistency(params: SearchParams,
                          config: InversionConfig | None = None,
                          points: int = 2001) -> MeanConsistency:
    """Integrate ``1 - G`` numerically and compare with the closed-form
    mean; the relative difference is a health check on the whole
    transform-inversion chain."""
    closed = analytic.mean_time(params, 1, 0.0)
    if not math.isfinite(closed) or closed <= 0.0:
        raise ValueError("consistency check needs a finite positive mean")
    # substitution t = closed * x / (1 - x) maps [0,1) onto [0,inf); the
    # endpoints carry known values (survival 1 at t=0, integrand 0 at x=1)
    # and must be kept, or the first trapezoid panel loses real mass
    x = np.linspace(0.0, 1.0, points + 2)
    t = closed * x[1:-1] / (1.0 - x[1:-1])
    surv = np.empty_like(x)
    surv[0], surv[-1] = 1.0, 0.0
    surv[1:-1] = 1.0 - cdf_G(params, t, config).cdf
    jac = np.empty_like(x)
    jac[0], jac[-1] = closed, 0.0
    jac[1:-1] = closed / (1.0 - x[1:-1]) ** 2
    integ = float(np.trapezoid(surv * jac, x))
    return MeanConsistency(closed_form=closed, from_cdf=integ)
