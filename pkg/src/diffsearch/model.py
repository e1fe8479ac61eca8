"""Domain types, validation and shared numeric conventions.

A searcher starts a distance ``distance`` away from the object and diffuses
with drift ``drift`` (positive values point *away* from the object) and
diffusion coefficient ``diffusion``.  While searching it can be lost or
destroyed at rate ``loss_rate``; its life span is cut short by a timeout of
rate ``timeout_rate``; once the source learns a searcher is gone it waits an
exponential relaunch delay of rate ``relaunch_rate`` before sending out a
replacement from the starting distance.  All rates are stored as rates (per
unit time); mean-based inputs such as a mean timeout are converted at the
configuration boundary.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

from .errors import (
    InvalidRace,
    NegativeDiffusion,
    NegativeDistance,
    NegativeRate,
    NonPositiveMu,
)

__all__ = [
    "SearchParams",
    "Stopping",
    "RaceSpec",
    "Segment",
    "SegmentProfile",
    "SimEstimate",
    "RaceFixedPoint",
    "Finiteness",
    "FinitenessReason",
    "FinitenessVerdict",
    "drift_root",
    "curtailment_exponent",
    "params_from_config",
    "params_to_config",
    "profile_from_config",
    "profile_to_config",
    "race_from_config",
]


# --------------------------------------------------------------------------
# numeric conventions
# --------------------------------------------------------------------------

#: exp() overflows IEEE doubles just above this exponent.
MAX_EXPONENT = 709.0


def drift_root(b: float, y: float) -> float:
    """Stable evaluation of ``b + sqrt(b*b + y)`` for ``y >= 0``.

    For negative ``b`` the direct form cancels catastrophically (both terms
    nearly equal in magnitude); multiplying by the conjugate gives
    ``y / (sqrt(b*b + y) - b)`` where the denominator is a sum of positive
    terms.
    """
    if y < 0:
        raise ValueError(f"y must be >= 0, got {y}")
    s = math.sqrt(b * b + y)
    if b >= 0.0:
        return b + s
    if s == b:  # only when y == 0 and b == 0
        return 0.0
    return y / (s - b)


def curtailment_exponent(params: "SearchParams", u: float) -> float:
    """Exponent ``(D / c) * (b + sqrt(b^2 + 2 c u))`` of the renewal formulas.

    ``u`` is the total curtailment rate applied to an attempt (loss +
    timeout + any race attraction).  Requires ``diffusion > 0``.
    """
    if params.diffusion <= 0.0:
        raise ZeroDivisionError("curtailment exponent needs diffusion > 0")
    return (params.distance / params.diffusion) * drift_root(
        params.drift, 2.0 * params.diffusion * u
    )


# --------------------------------------------------------------------------
# core parameter bundles
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SearchParams:
    """Homogeneous-medium search parameters.

    Attributes
    ----------
    drift : float
        Drift of the distance process; positive drifts move the searcher
        away from the object.  Any sign is allowed.
    diffusion : float
        Diffusion coefficient of the distance process, >= 0.
    loss_rate : float
        Rate at which an active searcher is destroyed or lost, >= 0.
    timeout_rate : float
        Rate of the timeout that ends a searcher's life span, >= 0.
    relaunch_rate : float
        Rate of the relaunch delay after the source learns a searcher is
        gone, > 0.
    distance : float
        Starting distance from the object, >= 0.
    """

    drift: float
    diffusion: float
    loss_rate: float
    timeout_rate: float
    relaunch_rate: float
    distance: float

    def __post_init__(self):
        for name in ("drift", "diffusion", "loss_rate", "timeout_rate",
                     "relaunch_rate", "distance"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(float(v)):
                raise ValueError(f"{name}={v!r} must be a finite number")
            object.__setattr__(self, name, float(v))
        if self.diffusion < 0.0:
            raise NegativeDiffusion(self.diffusion)
        if self.loss_rate < 0.0:
            raise NegativeRate("loss_rate", self.loss_rate)
        if self.timeout_rate < 0.0:
            raise NegativeRate("timeout_rate", self.timeout_rate)
        if self.relaunch_rate <= 0.0:
            raise NonPositiveMu(self.relaunch_rate)
        if self.distance < 0.0:
            raise NegativeDistance(self.distance)

    def with_timeout(self, timeout_rate: float) -> "SearchParams":
        """Copy of these parameters with a different timeout rate."""
        return replace(self, timeout_rate=timeout_rate)


class Stopping(enum.Enum):
    """Whether unfinished searchers can be stopped once the quorum is met."""

    STOP_ALL = "stop_all"
    NO_STOP = "no_stop"


@dataclass(frozen=True)
class RaceSpec:
    """A race of ``n_searchers`` concurrent searchers, done when
    ``k_required`` distinct searchers have found the object."""

    n_searchers: int
    k_required: int = 1
    stopping: Stopping = Stopping.STOP_ALL

    def __post_init__(self):
        if not isinstance(self.n_searchers, int) or self.n_searchers < 1:
            raise InvalidRace("n_searchers", self.n_searchers,
                              "need an integer >= 1")
        if not isinstance(self.k_required, int) or not (
                1 <= self.k_required <= self.n_searchers):
            raise InvalidRace("k_required", self.k_required,
                              "need an integer in [1, n_searchers]")
        if not isinstance(self.stopping, Stopping):
            raise InvalidRace("stopping", self.stopping,
                              "need a Stopping enum member")


# --------------------------------------------------------------------------
# layered (piecewise-constant) medium
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    """One homogeneous layer of the medium: ``width`` may be ``inf`` only
    for the outermost layer."""

    width: float
    drift: float
    diffusion: float
    loss_rate: float

    def __post_init__(self):
        if not (self.width > 0.0):
            raise ValueError(f"segment width must be > 0, got {self.width}")
        if self.diffusion <= 0.0:
            raise NegativeDiffusion(self.diffusion)
        if self.loss_rate < 0.0:
            raise NegativeRate("loss_rate", self.loss_rate)


@dataclass(frozen=True)
class SegmentProfile:
    """Piecewise-constant medium: segment 1 touches the object at 0, the
    last segment extends to infinity.  Timeout and relaunch act globally."""

    segments: tuple[Segment, ...]
    timeout_rate: float
    relaunch_rate: float
    distance: float

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if len(segs) < 1:
            raise ValueError("need at least one segment")
        for s in segs[:-1]:
            if math.isinf(s.width):
                raise ValueError("only the last segment may be unbounded")
        if not math.isinf(segs[-1].width):
            raise ValueError("last segment must be unbounded (width=inf)")
        if self.timeout_rate < 0.0:
            raise NegativeRate("timeout_rate", self.timeout_rate)
        if self.relaunch_rate <= 0.0:
            raise NonPositiveMu(self.relaunch_rate)
        if self.distance < 0.0:
            raise NegativeDistance(self.distance)

    @property
    def edges(self) -> tuple[float, ...]:
        """Inner boundaries of the segments: edges[k] is the right edge of
        segment k (0-based); the last segment has no finite right edge."""
        out, z = [], 0.0
        for s in self.segments[:-1]:
            z += s.width
            out.append(z)
        return tuple(out)

    def segment_index(self, z: float) -> int:
        """0-based index of the segment containing position ``z >= 0``."""
        if z < 0.0:
            raise ValueError("position must be >= 0")
        acc = 0.0
        for i, s in enumerate(self.segments[:-1]):
            acc += s.width
            if z < acc:
                return i
        return len(self.segments) - 1

    def homogeneous(self) -> bool:
        s0 = self.segments[0]
        return all(
            (s.drift, s.diffusion, s.loss_rate)
            == (s0.drift, s0.diffusion, s0.loss_rate)
            for s in self.segments[1:]
        )


# --------------------------------------------------------------------------
# result containers
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SimEstimate:
    """Monte Carlo estimate with a normal-approximation 95% half width."""

    mean: float
    variance: float
    samples: int
    ci_half_width: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.ci_half_width is None:
            hw = 1.96 * math.sqrt(self.variance / self.samples) \
                if self.samples > 0 else math.inf
            object.__setattr__(self, "ci_half_width", hw)


@dataclass(frozen=True)
class RaceFixedPoint:
    """Self-consistent race attraction and the resulting mean search time."""

    attraction: float
    mean_time: float
    iterations: int = 0
    residual: float = 0.0


class FinitenessVerdict(enum.Enum):
    FINITE = "finite"
    INFINITE = "infinite"


class FinitenessReason(enum.Enum):
    DETERMINISTIC_TOWARD_OBJECT = "deterministic_toward_object"
    DETERMINISTIC_AWAY_OR_ZERO_DRIFT = "deterministic_away_or_zero_drift"
    RANDOMISED_WITH_CURTAILMENT = "randomised_with_curtailment"
    NO_CURTAILMENT = "no_curtailment"


@dataclass(frozen=True)
class Finiteness:
    verdict: FinitenessVerdict
    reason: FinitenessReason

    @property
    def finite(self) -> bool:
        return self.verdict is FinitenessVerdict.FINITE


# --------------------------------------------------------------------------
# configuration (JSON) boundary
# --------------------------------------------------------------------------

_PARAM_KEYS = {"b", "c", "lambda", "r", "mu", "D", "timeout_mean"}


def _timeout_rate_from(cfg: dict, where: str) -> float:
    has_r = "r" in cfg
    has_mean = "timeout_mean" in cfg
    if has_r and has_mean:
        raise ValueError(f"{where}: give either 'r' or 'timeout_mean', not both")
    if has_mean:
        tm = float(cfg["timeout_mean"])
        if tm <= 0.0:
            raise NegativeRate("timeout_mean", tm)
        return 1.0 / tm
    if has_r:
        return float(cfg["r"])
    raise KeyError(f"{where}: missing 'r' (or 'timeout_mean')")


def params_from_config(cfg: dict) -> SearchParams:
    """Build :class:`SearchParams` from a JSON-style mapping.

    Recognised keys: ``b`` (drift), ``c`` (diffusion), ``lambda`` (loss
    rate), ``r`` (timeout rate) or ``timeout_mean`` (its reciprocal),
    ``mu`` (relaunch rate), ``D`` (starting distance).
    """
    missing = {"b", "c", "lambda", "mu", "D"} - set(cfg)
    if missing:
        raise KeyError(f"config missing keys: {sorted(missing)}")
    return SearchParams(
        drift=float(cfg["b"]),
        diffusion=float(cfg["c"]),
        loss_rate=float(cfg["lambda"]),
        timeout_rate=_timeout_rate_from(cfg, "config"),
        relaunch_rate=float(cfg["mu"]),
        distance=float(cfg["D"]),
    )


def params_to_config(p: SearchParams) -> dict:
    return {
        "b": p.drift,
        "c": p.diffusion,
        "lambda": p.loss_rate,
        "r": p.timeout_rate,
        "mu": p.relaunch_rate,
        "D": p.distance,
    }


def race_from_config(cfg: dict) -> RaceSpec:
    """Read ``N``, ``k`` and ``stopping`` from a JSON-style mapping."""
    n = int(cfg.get("N", 1))
    k = int(cfg.get("k", 1))
    raw = str(cfg.get("stopping", "stop_all")).strip().lower()
    aliases = {
        "stop_all": Stopping.STOP_ALL, "stopall": Stopping.STOP_ALL,
        "no_stop": Stopping.NO_STOP, "nostop": Stopping.NO_STOP,
    }
    if raw not in aliases:
        raise InvalidRace("stopping", cfg.get("stopping"),
                          "expected stop_all or no_stop")
    return RaceSpec(n_searchers=n, k_required=k, stopping=aliases[raw])


def profile_from_config(cfg: dict) -> SegmentProfile:
    """Build a :class:`SegmentProfile` from a mapping with a ``segments``
    list; each entry has ``b``, ``c``, ``lambda`` and (except the last)
    ``width``."""
    entries = cfg["segments"]
    if not entries:
        raise ValueError("segments list is empty")
    segs = []
    for i, e in enumerate(entries):
        last = i == len(entries) - 1
        width = float(e.get("width", math.inf)) if last else float(e["width"])
        segs.append(Segment(
            width=width if not last else math.inf,
            drift=float(e["b"]),
            diffusion=float(e["c"]),
            loss_rate=float(e["lambda"]),
        ))
    return SegmentProfile(
        segments=tuple(segs),
        timeout_rate=_timeout_rate_from(cfg, "segments config"),
        relaunch_rate=float(cfg["mu"]),
        distance=float(cfg["D"]),
    )


def profile_to_config(prof: SegmentProfile) -> dict:
    segs = []
    for i, s in enumerate(prof.segments):
        e = {"b": s.drift, "c": s.diffusion, "lambda": s.loss_rate}
        if i < len(prof.segments) - 1:
            e["width"] = s.width
        segs.append(e)
    return {
        "segments": segs,
        "r": prof.timeout_rate,
        "mu": prof.relaunch_rate,
        "D": prof.distance,
    }
