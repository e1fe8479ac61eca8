"""Analytic solver for search in a piecewise-constant medium.

Within each segment the attempt-level quantities solve constant
coefficient second-order ODEs, so the global solution is a composition
of per-segment exponential pairs.  Three boundary problems share one
differential operator ``(c/2) y'' + b y' - (lam + r) y``:

* ``u`` (no source, u(0)=1, u bounded): per-attempt success probability,
* ``w`` (source 1, w(0)=0, bounded): mean attempt duration,
* ``v`` (source lam_k, v(0)=0, bounded): probability the attempt ends in
  a loss rather than a time-out.

The mean search time then follows from renewal-reward over attempts:
each failed cycle costs its duration plus the loss-reveal and relaunch
delays, and success takes 1/u(D) cycles on average.

Two equivalent assemblies are provided.  The direct one composes 2x2
transfer matrices of the fundamental exponentials across segments; it
is exact but overflows once a segment holds many e-foldings of the
growing root.  The robust one propagates the boundedness condition
backwards as an affine relation ``y' = R y + S`` (a discrete Riccati
sweep) and reconstructs forwards, accumulating the success probability
in log space; it never overflows and degrades gracefully to an exact
zero when the success probability underflows.  The direct assembly is
tried first and the sweep takes over when the exponents are too large.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateCurtailment, IllConditioned, ParameterError
from .model import Segment, SegmentProfile

__all__ = [
    "PhaseSweepSpec",
    "PhasePoint",
    "killed_success_probability",
    "log_success_probability",
    "attempt_statistics",
    "mean_time_segmented",
    "mean_energy_segmented",
    "phase_profile",
    "phase_sweep",
]

#: condition estimate of the transfer product is exp of the summed root
#: spread; past this the shooting value cancels below ~1e-11 relative
_TRANSFER_CONDITION_LIMIT = 1e5


# ---------------------------------------------------------------------------
# preparation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Prepared:
    """Profile flattened to arrays, with the start distance on an edge."""

    lefts: np.ndarray      # left edge of each segment
    widths: np.ndarray     # widths; last is +inf
    drifts: np.ndarray
    diffusions: np.ndarray
    losses: np.ndarray
    kappas: np.ndarray     # lam_k + r
    start_index: int       # number of segments strictly below the start


def _prepare(profile: SegmentProfile) -> _Prepared:
    """Flatten the profile, splitting the segment containing the start
    distance so that the start always falls on a segment edge."""
    distance = profile.distance
    lefts, widths = [], []
    drifts, diffusions, losses = [], [], []

    def push(left: float, width: float, seg: Segment) -> None:
        lefts.append(left)
        widths.append(width)
        drifts.append(seg.drift)
        diffusions.append(seg.diffusion)
        losses.append(seg.loss_rate)

    edge = 0.0
    for seg in profile.segments:
        right = edge + seg.width
        if edge < distance < right:
            push(edge, distance - edge, seg)
            push(distance, right - distance, seg)
        else:
            push(edge, seg.width, seg)
        edge = right

    return _Prepared(
        lefts=np.asarray(lefts),
        widths=np.asarray(widths),
        drifts=np.asarray(drifts),
        diffusions=np.asarray(diffusions),
        losses=np.asarray(losses),
        kappas=np.asarray(losses) + profile.timeout_rate,
        start_index=sum(1 for left in lefts if left < distance),
    )


def _roots(b: float, c: float, kappa: float) -> tuple[float, float]:
    """Characteristic roots p >= 0 >= q of (c/2)y'' + b y' - kappa y,
    computed without subtractive cancellation."""
    disc = math.sqrt(b * b + 2.0 * c * kappa)
    if b <= 0.0:
        p = (-b + disc) / c
        q = -2.0 * kappa / (c * p) if p > 0.0 else 0.0
    else:
        q = (-b - disc) / c
        p = -2.0 * kappa / (c * q) if q < 0.0 else 0.0
    return p, q


# ---------------------------------------------------------------------------
# robust assembly: backward affine sweep + forward reconstruction
# ---------------------------------------------------------------------------

def _backward_sweep(prep: _Prepared, sources: Sequence[np.ndarray]):
    """Propagate the boundedness condition y' = R y + S down from the
    tail.  Returns per-edge arrays R[j], S[i][j] (relation at the left
    edge of segment j) for each source vector in ``sources``."""
    n = prep.widths.size
    n_src = len(sources)
    R = np.empty(n)
    S = np.empty((n_src, n))

    p_t, q_t = _roots(prep.drifts[-1], prep.diffusions[-1], prep.kappas[-1])
    R[-1] = q_t
    for i in range(n_src):
        part = sources[i][-1] / prep.kappas[-1] if prep.kappas[-1] > 0.0 else 0.0
        S[i, -1] = -q_t * part

    for j in range(n - 2, -1, -1):
        p, q = _roots(prep.drifts[j], prep.diffusions[j], prep.kappas[j])
        w = prep.widths[j]
        rr = R[j + 1]
        decay = math.exp((q - p) * w)      # <= 1, may underflow to 0
        denom = (p - rr) - decay * (q - rr)
        if denom == 0.0 or not math.isfinite(denom):
            raise IllConditioned(
                f"degenerate interface relation in segment {j}")
        R[j] = (q * (p - rr) - p * decay * (q - rr)) / denom
        shrink = math.exp(-p * w)          # <= 1
        for i in range(n_src):
            part = sources[i][j] / prep.kappas[j] if prep.kappas[j] > 0.0 else 0.0
            num = ((p - q) * (rr * part + S[i, j + 1]) * shrink
                   - q * part * (p - rr)
                   + p * part * decay * (q - rr))
            S[i, j] = num / denom
    return R, S


def _solve_backward(prep: _Prepared, sources: Sequence[np.ndarray]):
    """Return (log_q, [phi_i(D)]) via the affine sweep."""
    R, S = _backward_sweep(prep, sources)
    n_src = len(sources)
    top = prep.start_index

    # success probability in log space: per-segment ratio of the
    # bounded homogeneous solution, exp(q w) times an O(1) correction
    log_q = 0.0
    for j in range(top):
        p, q = _roots(prep.drifts[j], prep.diffusions[j], prep.kappas[j])
        w = prep.widths[j]
        rr = R[j + 1]
        decay = math.exp((q - p) * w)
        denom = (p - rr) - decay * (q - rr)
        mix = (rr - q) / denom
        log_q += q * w + math.log1p(mix * (1.0 - decay))

    # forward reconstruction of the source problems, tracking the grown
    # coefficient A exp(p w) instead of A so nothing overflows
    values = []
    for i in range(n_src):
        phi = 0.0
        for j in range(top):
            p, q = _roots(prep.drifts[j], prep.diffusions[j], prep.kappas[j])
            w = prep.widths[j]
            part = sources[i][j] / prep.kappas[j] if prep.kappas[j] > 0.0 else 0.0
            rr = R[j + 1]
            sr = S[i, j + 1]
            decay = math.exp((q - p) * w)
            denom = (p - rr) - decay * (q - rr)
            cst = rr * part + sr
            grown = (cst - math.exp(q * w) * (q - rr) * (phi - part)) / denom
            phi = grown + (phi - part - grown * math.exp(-p * w)) \
                * math.exp(q * w) + part
        values.append(phi)
    return log_q, values


# ---------------------------------------------------------------------------
# direct assembly: 2x2 transfer matrices (shooting on the initial slope)
# ---------------------------------------------------------------------------

def _transfer(p: float, q: float, w: float):
    """Map (y, y') across one homogeneous segment of width w."""
    ep, eq = math.exp(p * w), math.exp(q * w)
    d = p - q
    return np.array([
        [(p * eq - q * ep) / d, (ep - eq) / d],
        [p * q * (eq - ep) / d, (p * ep - q * eq) / d],
    ])


def _solve_transfer(prep: _Prepared, sources: Sequence[np.ndarray]):
    """Return (log_q, [phi_i(D)]) by composing transfer matrices and
    shooting on the unknown initial slope.  Raises IllConditioned when
    the exponent budget is exceeded."""
    n = prep.widths.size
    roots = [_roots(prep.drifts[j], prep.diffusions[j], prep.kappas[j])
             for j in range(n)]
    spread = sum((roots[j][0] - roots[j][1]) * prep.widths[j]
                 for j in range(n - 1))
    if math.exp(min(spread, 700.0)) > _TRANSFER_CONDITION_LIMIT:
        raise IllConditioned(
            f"transfer product condition ~exp({spread:.1f}) exceeds "
            f"{_TRANSFER_CONDITION_LIMIT:g}")

    q_tail = roots[-1][1]
    top = prep.start_index

    def shoot(source: np.ndarray | None):
        """Value at the start distance for one boundary problem."""
        y0 = 0.0 if source is not None else 1.0
        # affine propagation: state (y, y') = hom * slope + inhom
        hom = np.array([0.0, 1.0])
        inhom = np.array([y0, 0.0])
        tail_part = 0.0
        value_hom = value_inhom = None
        for j in range(n - 1):
            if j == top:
                value_hom, value_inhom = hom[0], inhom[0]
            p, q = roots[j]
            part = 0.0
            if source is not None and prep.kappas[j] > 0.0:
                part = source[j] / prep.kappas[j]
            m = _transfer(p, q, prep.widths[j])
            hom = m @ hom
            inhom = m @ (inhom - np.array([part, 0.0])) + np.array([part, 0.0])
        if top == n - 1:
            value_hom, value_inhom = hom[0], inhom[0]
        if source is not None and prep.kappas[-1] > 0.0:
            tail_part = source[-1] / prep.kappas[-1]
        # boundedness in the tail: y' - q y = -q * particular
        num = -q_tail * tail_part - (inhom[1] - q_tail * inhom[0])
        den = hom[1] - q_tail * hom[0]
        if den == 0.0 or not math.isfinite(den):
            raise IllConditioned("transfer shooting is singular")
        slope = num / den
        if value_hom is None:
            value_hom, value_inhom = hom[0], inhom[0]
        return value_hom * slope + value_inhom

    q_val = shoot(None)
    if not (q_val > 0.0):
        raise IllConditioned("success probability lost to cancellation")
    values = [shoot(src) for src in sources]
    return math.log(q_val), values


# ---------------------------------------------------------------------------
# public interface
# ---------------------------------------------------------------------------

def _solve(profile: SegmentProfile, with_sources: bool):
    prep = _prepare(profile)
    if with_sources and not np.all(prep.kappas > 0.0):
        raise DegenerateCurtailment(
            "mean attempt time needs a curtailment rate (loss or timeout) "
            "in every segment")
    if np.any((prep.kappas == 0.0) & (prep.drifts == 0.0)):
        raise DegenerateCurtailment(
            "a driftless segment with no curtailment has no exponential "
            "solution basis")
    sources: list[np.ndarray] = []
    if with_sources:
        sources = [np.ones_like(prep.losses), prep.losses.copy()]
    try:
        return _solve_transfer(prep, sources)
    except IllConditioned:
        return _solve_backward(prep, sources)


def log_success_probability(profile: SegmentProfile) -> float:
    """Natural log of the per-attempt success probability."""
    if profile.distance == 0.0:
        return 0.0
    log_q, _ = _solve(profile, with_sources=False)
    return log_q


def killed_success_probability(profile: SegmentProfile) -> float:
    """Probability that one attempt reaches the object before being
    lost or timed out; underflows to exactly 0.0 for hopeless media."""
    return math.exp(log_success_probability(profile))


@dataclass(frozen=True)
class AttemptStatistics:
    success_probability: float
    log_success_probability: float
    mean_duration: float
    loss_probability: float


def attempt_statistics(profile: SegmentProfile) -> AttemptStatistics:
    """Per-attempt success probability, mean active duration, and the
    probability the attempt ends by loss."""
    if profile.distance == 0.0:
        return AttemptStatistics(1.0, 0.0, 0.0, 0.0)
    log_q, (mean_dur, loss_prob) = _solve(profile, with_sources=True)
    return AttemptStatistics(
        success_probability=math.exp(log_q),
        log_success_probability=log_q,
        mean_duration=mean_dur,
        loss_probability=min(max(loss_prob, 0.0), 1.0),
    )


def mean_time_segmented(profile: SegmentProfile) -> float:
    """Mean search time of a single searcher in the segmented medium,
    ``math.inf`` when the success probability underflows."""
    if profile.distance == 0.0:
        return 0.0
    stats = attempt_statistics(profile)
    q = stats.success_probability
    if q <= 0.0:
        return math.inf
    if profile.timeout_rate <= 0.0 and stats.loss_probability > 0.0:
        return math.inf          # a lost searcher is never revealed
    reveal = (stats.loss_probability / profile.timeout_rate
              if stats.loss_probability > 0.0 else 0.0)
    relaunch = (1.0 - q) / profile.relaunch_rate
    return (stats.mean_duration + reveal + relaunch) / q


def mean_energy_segmented(profile: SegmentProfile) -> float:
    """Mean total active search time until success (energy analogue)."""
    if profile.distance == 0.0:
        return 0.0
    stats = attempt_statistics(profile)
    if stats.success_probability <= 0.0:
        return math.inf
    return stats.mean_duration / stats.success_probability


# ---------------------------------------------------------------------------
# phase-transition sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseSweepSpec:
    """Grid for the defence-versus-approach scaling study.

    Segment k (1-based, k < m) has loss rate exp(1/(k rho)) and drift
    -exp((1+epsilon)/(k rho)); the unbounded tail segment m uses the
    same expressions with k = m.
    """

    rho_grid: tuple[float, ...]
    epsilon_list: tuple[float, ...]
    m: int = 20
    segment_size: float = 1.0
    diffusion: float = 1.0
    timeout_rate: float = 0.05
    relaunch_rate: float = 0.025
    distance: float = 10.0

    def __post_init__(self) -> None:
        if self.m < 2:
            raise ParameterError("m", self.m, "need at least two segments")
        if not self.rho_grid or any(rho <= 0.0 for rho in self.rho_grid):
            raise ParameterError("rho_grid", self.rho_grid,
                                 "need at least one positive rho")
        if not self.epsilon_list or any(e < 0.0 for e in self.epsilon_list):
            raise ParameterError("epsilon_list", self.epsilon_list,
                                 "need at least one epsilon >= 0")


@dataclass(frozen=True)
class PhasePoint:
    rho: float
    epsilon: float
    mean_time: float          # +inf when divergent
    status: str               # "ok" | "infinite" | "error: ..."


def phase_profile(rho: float, epsilon: float,
                  spec: PhaseSweepSpec) -> SegmentProfile:
    """Build the segmented profile for one (rho, epsilon) grid point."""
    segments = []
    for k in range(1, spec.m + 1):
        width = spec.segment_size if k < spec.m else math.inf
        segments.append(Segment(
            width=width,
            drift=-math.exp((1.0 + epsilon) / (k * rho)),
            diffusion=spec.diffusion,
            loss_rate=math.exp(1.0 / (k * rho)),
        ))
    return SegmentProfile(
        segments=tuple(segments),
        timeout_rate=spec.timeout_rate,
        relaunch_rate=spec.relaunch_rate,
        distance=spec.distance,
    )


def phase_sweep(spec: PhaseSweepSpec) -> list[PhasePoint]:
    """Mean search time over the (rho, epsilon) grid; solver failures
    are reported per point rather than aborting the sweep."""
    points = []
    for epsilon in spec.epsilon_list:
        for rho in spec.rho_grid:
            try:
                value = mean_time_segmented(phase_profile(rho, epsilon, spec))
                status = "ok" if math.isfinite(value) else "infinite"
            except Exception as exc:  # noqa: BLE001 - per-point reporting
                value = math.nan
                status = f"error: {exc}"
            points.append(PhasePoint(rho, epsilon, value, status))
    return points
