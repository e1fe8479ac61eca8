"""Numba kernels for the race and segmented-medium simulators.

Design notes, in brief:

* Every (replication, searcher) pair owns a private xoroshiro128+ stream
  seeded through splitmix64 from ``(seed, replication, searcher)``.  The
  draw sequence is therefore a pure function of those integers, so the
  output is bit-identical no matter how replications are scheduled
  across threads.
* Gaussian increments come from a 128-layer ziggurat built at import
  time; the layer index, sign, and mantissa are carved out of disjoint
  bits of one 64-bit draw.
* Brownian increments compose exactly for piecewise-constant
  coefficients, and the bridge crossing probability between step
  endpoints is exact for any step length.  Steps therefore stretch to
  ``z^2 / (46 c)`` when the searcher is far from the object (crossing
  odds below e^-23 per step) and shrink back to the configured ``dt``
  near it, which is where the time resolution actually matters.  The
  only discretisation effect left is that an absorption detected inside
  a step is stamped at the step's end.
* Curtailment (loss or time-out) is presampled per attempt and steps
  are shortened to end exactly on the curtailment instant.  A waiting
  searcher (lost, timed out, relaunching) is not stepped at all; its
  wake-up time is drawn directly.
* Attempt intervals are recorded so the energy integrals can be clipped
  exactly at the race end without replaying any path.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

__all__ = ["race_kernel", "segment_kernel", "segment_attempt_kernel"]

_U53 = 1.0 / 9007199254740992.0  # 2**-53

# ---------------------------------------------------------------------------
# ziggurat tables (128 layers, Marsaglia-Tsang constants)
# ---------------------------------------------------------------------------

_ZIG_R = 3.442619855899
_ZIG_V = 9.91256303526217e-3


def _build_ziggurat():
    xt = np.zeros(129)
    yt = np.zeros(129)
    f = np.exp(-0.5 * _ZIG_R * _ZIG_R)
    xt[0] = _ZIG_V / f          # pseudo-width of the base strip
    xt[1] = _ZIG_R
    yt[0] = f
    yt[1] = f
    for i in range(2, 128):
        y = _ZIG_V / xt[i - 1] + np.exp(-0.5 * xt[i - 1] ** 2)
        xt[i] = np.sqrt(-2.0 * np.log(y))
        yt[i] = y
    xt[128] = 0.0
    yt[128] = 1.0
    # the recurrence must close at the density's maximum
    top = _ZIG_V / xt[127] + np.exp(-0.5 * xt[127] ** 2)
    if abs(top - 1.0) > 1e-8:
        raise AssertionError(f"ziggurat tables failed to close: {top!r}")
    return xt, yt


_ZIG_X, _ZIG_Y = _build_ziggurat()


# ---------------------------------------------------------------------------
# counter-seeded xoroshiro128+ stream
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _splitmix64(x):
    x = (x + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = x
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return x, z


@njit(cache=True)
def _stream_init(seed, rep, searcher):
    """Derive a [s0, s1] xoroshiro state from the run key."""
    x = np.uint64(seed) ^ (np.uint64(rep) * np.uint64(0xA0761D6478BD642F))
    x ^= np.uint64(searcher) * np.uint64(0xE7037ED1A0B428DB)
    x, s0 = _splitmix64(x)
    x, s1 = _splitmix64(x)
    if s0 == np.uint64(0) and s1 == np.uint64(0):
        s1 = np.uint64(0x9E3779B97F4A7C15)
    return s0, s1


@njit(cache=True, inline="always")
def _rotl(x, k):
    return ((x << np.uint64(k)) | (x >> np.uint64(64 - k))) & np.uint64(
        0xFFFFFFFFFFFFFFFF
    )


@njit(cache=True, inline="always")
def _next_u64(state):
    s0 = state[0]
    s1 = state[1]
    result = (s0 + s1) & np.uint64(0xFFFFFFFFFFFFFFFF)
    s1 ^= s0
    state[0] = _rotl(s0, 24) ^ s1 ^ ((s1 << np.uint64(16)) & np.uint64(0xFFFFFFFFFFFFFFFF))
    state[1] = _rotl(s1, 37)
    return result


@njit(cache=True, inline="always")
def _uniform(state):
    """Uniform on [0, 1)."""
    return float(_next_u64(state) >> np.uint64(11)) * _U53


@njit(cache=True, inline="always")
def _exponential(state, mean):
    u = _uniform(state)
    return -mean * np.log1p(-u)


@njit(cache=True)
def _normal(state):
    """Standard normal via the ziggurat; layer, sign, and mantissa all
    come from disjoint bits of a single 64-bit word."""
    while True:
        bits = _next_u64(state)
        layer = int(bits & np.uint64(127))
        u = float(bits >> np.uint64(11)) * _U53
        x = u * _ZIG_X[layer]
        if x < _ZIG_X[layer + 1]:
            return -x if bits & np.uint64(128) else x
        if layer == 0:
            # Marsaglia tail beyond R
            while True:
                xt = -np.log1p(-_uniform(state)) / _ZIG_R
                yt = -np.log1p(-_uniform(state))
                if yt + yt > xt * xt:
                    tail = _ZIG_R + xt
                    return -tail if bits & np.uint64(128) else tail
        else:
            y = _ZIG_Y[layer] + _uniform(state) * (_ZIG_Y[layer + 1] - _ZIG_Y[layer])
            if y < np.exp(-0.5 * x * x):
                return -x if bits & np.uint64(128) else x


@njit(cache=True)
def _grow(arr, length):
    out = np.empty(2 * arr.shape[0], dtype=np.float64)
    out[:length] = arr[:length]
    return out


@njit(cache=True, inline="always")
def _step_cap(z, dt, b, inv_46c):
    """Largest safe step at distance ``z``: crossing odds within the
    step stay below ~e^-23 and the drift moves at most a quarter of the
    way to the object, so the base resolution ``dt`` rules only near
    the boundary, where it matters."""
    cap = z * z * inv_46c
    if b != 0.0:
        drift_cap = 0.25 * z / abs(b)
        if drift_cap < cap:
            cap = drift_cap
    return cap if cap > dt else dt


# ---------------------------------------------------------------------------
# homogeneous race kernel
# ---------------------------------------------------------------------------

@njit(cache=True)
def _simulate_searcher(seed, rep, searcher, b, c, lam, r, mu, distance,
                       dt, bound, horizon, starts, widths):
    """Run one searcher until success, the stop bound, or the horizon.

    ``bound`` is the latest instant at which this searcher could still
    influence the race (the k-th best finish seen so far): once the
    clock passes it no further attempt is started, and the finish time
    is reported as +inf.  Attempts already underway run to their own
    end so the unstopped energy stays exact.

    Returns (n_attempts, starts, widths, finish_time, n_loss,
    n_timeout).  ``starts[j]``/``widths[j]`` delimit the j-th active
    interval; on success the last interval ends at ``finish_time``.
    """
    state = np.empty(2, dtype=np.uint64)
    state[0], state[1] = _stream_init(seed, rep, searcher)

    mean_loss = 1.0 / lam if lam > 0.0 else 0.0
    mean_to = 1.0 / r if r > 0.0 else 0.0
    inv_46c = 1.0 / (46.0 * c)
    cutoff = min(bound, horizon)

    now = 0.0
    n_att = 0
    n_loss = 0
    n_to = 0

    while True:
        if now >= cutoff:
            return n_att, starts, widths, np.inf, n_loss, n_to
        # presample this attempt's curtailment clock
        e_loss = _exponential(state, mean_loss) if lam > 0.0 else np.inf
        e_to = _exponential(state, mean_to) if r > 0.0 else np.inf
        curtail = min(e_loss, e_to)

        z = distance
        elapsed = 0.0
        succeeded = False
        truncated = False
        while True:
            step = _step_cap(z, dt, b, inv_46c)
            ends_attempt = False
            if elapsed + step >= curtail:
                step = curtail - elapsed
                ends_attempt = True
            if now + elapsed + step >= horizon:
                step = horizon - now - elapsed
                ends_attempt = False
                truncated = True
            if step > 0.0:
                z_new = z + b * step + np.sqrt(c * step) * _normal(state)
                elapsed += step
                if z_new <= 0.0:
                    succeeded = True
                elif z * z_new < 25.0 * c * step:
                    # Brownian bridge: crossing probability between endpoints
                    if _uniform(state) < np.exp(-2.0 * z * z_new / (c * step)):
                        succeeded = True
                z = z_new
            if succeeded or ends_attempt or truncated:
                break

        if n_att >= starts.shape[0]:
            starts = _grow(starts, n_att)
            widths = _grow(widths, n_att)
        starts[n_att] = now
        widths[n_att] = elapsed
        n_att += 1
        now += elapsed

        if succeeded:
            return n_att, starts, widths, now, n_loss, n_to
        if truncated:
            return n_att, starts, widths, np.inf, n_loss, n_to
        # curtailed: reveal delay for a loss, then the relaunch delay
        if e_loss < e_to:
            n_loss += 1
            now += _exponential(state, mean_to) if r > 0.0 else np.inf
        else:
            n_to += 1
        now += _exponential(state, 1.0 / mu)


@njit(cache=True, parallel=True)
def race_kernel(seed, reps, n_searchers, k_required, b, c, lam, r, mu,
                distance, dt, horizon,
                out_time, out_jminus, out_jplus, out_loss, out_to,
                out_censored):
    """Simulate ``reps`` independent races and fill the per-rep outputs."""
    for rep in prange(reps):
        all_starts = []
        all_widths = []
        all_counts = np.empty(n_searchers, dtype=np.int64)
        # k smallest finish times seen so far, ascending
        best = np.full(k_required, np.inf)
        losses = 0
        timeouts = 0
        for i in range(n_searchers):
            st = np.empty(256, dtype=np.float64)
            wd = np.empty(256, dtype=np.float64)
            cnt, st, wd, fin, nl, nt = _simulate_searcher(
                seed, rep, i, b, c, lam, r, mu, distance, dt,
                best[k_required - 1], horizon, st, wd)
            all_starts.append(st)
            all_widths.append(wd)
            all_counts[i] = cnt
            losses += nl
            timeouts += nt
            if fin < best[k_required - 1]:
                pos = k_required - 1
                while pos > 0 and best[pos - 1] > fin:
                    best[pos] = best[pos - 1]
                    pos -= 1
                best[pos] = fin
        t_race = best[k_required - 1]
        censored = not np.isfinite(t_race)
        if censored:
            t_race = horizon
        jminus = 0.0
        jplus = 0.0
        for i in range(n_searchers):
            st = all_starts[i]
            wd = all_widths[i]
            for j in range(all_counts[i]):
                if st[j] < t_race:
                    jplus += wd[j]
                    span = t_race - st[j]
                    jminus += wd[j] if wd[j] < span else span
        out_time[rep] = t_race
        out_jminus[rep] = jminus
        out_jplus[rep] = jplus
        out_loss[rep] = losses
        out_to[rep] = timeouts
        out_censored[rep] = censored


# ---------------------------------------------------------------------------
# segmented-medium kernels
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _segment_of(z, edges):
    """Index of the segment containing distance ``z`` (edges ascending)."""
    k = 0
    for i in range(edges.shape[0]):
        if z >= edges[i]:
            k = i + 1
        else:
            break
    return k


@njit(cache=True, inline="always")
def _segment_step_cap(z, seg, edges, dt, b, c):
    """Macro-step cap inside a segment: stay clear of both the object
    and the nearest coefficient change."""
    d = z
    if seg > 0:
        lower = z - edges[seg - 1]
        if lower < d:
            d = lower
    if seg < edges.shape[0]:
        upper = edges[seg] - z
        if upper < d:
            d = upper
    cap = d * d / (46.0 * c)
    if b != 0.0:
        drift_cap = 0.25 * d / abs(b)
        if drift_cap < cap:
            cap = drift_cap
    return cap if cap > dt else dt


@njit(cache=True)
def _simulate_segment_searcher(seed, rep, edges, drifts, diffusions,
                               loss_rates, r, mu, distance, dt, horizon):
    """One searcher in a piecewise-constant medium, to its own success.

    The loss hazard depends on position, so it is tracked through an
    integrated-hazard threshold instead of a presampled clock.  Returns
    (search_time, active_time, n_loss, n_timeout, n_attempts, censored).
    """
    state = np.empty(2, dtype=np.uint64)
    state[0], state[1] = _stream_init(seed, rep, 0)

    mean_to = 1.0 / r if r > 0.0 else 0.0
    now = 0.0
    active = 0.0
    n_loss = 0
    n_to = 0
    n_att = 0

    while True:
        if now >= horizon:
            return now, active, n_loss, n_to, n_att, True
        e_to = _exponential(state, mean_to) if r > 0.0 else np.inf
        loss_budget = _exponential(state, 1.0)  # unit-rate hazard threshold
        hazard = 0.0
        z = distance
        elapsed = 0.0
        n_att += 1
        succeeded = False
        lost = False
        while True:
            seg = _segment_of(z, edges)
            b = drifts[seg]
            c = diffusions[seg]
            lam = loss_rates[seg]
            step = _segment_step_cap(z, seg, edges, dt, b, c)
            timed_out = False
            if elapsed + step >= e_to:
                step = e_to - elapsed
                timed_out = True
            if now + elapsed + step >= horizon:
                step = horizon - now - elapsed
                timed_out = False
            if step > 0.0:
                # loss hazard accrues at the start-of-step rate
                if lam > 0.0 and hazard + lam * step >= loss_budget:
                    elapsed += (loss_budget - hazard) / lam
                    lost = True
                    break
                hazard += lam * step
                z_new = z + b * step + np.sqrt(c * step) * _normal(state)
                elapsed += step
                if z_new <= 0.0:
                    succeeded = True
                elif z * z_new < 25.0 * c * step:
                    if _uniform(state) < np.exp(-2.0 * z * z_new / (c * step)):
                        succeeded = True
                z = z_new
            if succeeded or timed_out or now + elapsed >= horizon:
                break

        active += elapsed
        now += elapsed
        if succeeded:
            return now, active, n_loss, n_to, n_att, False
        if now >= horizon:
            return now, active, n_loss, n_to, n_att, True
        if lost:
            n_loss += 1
            now += _exponential(state, mean_to) if r > 0.0 else np.inf
        else:
            n_to += 1
        now += _exponential(state, 1.0 / mu)


@njit(cache=True, parallel=True)
def segment_kernel(seed, reps, edges, drifts, diffusions, loss_rates,
                   r, mu, distance, dt, horizon,
                   out_time, out_active, out_loss, out_to, out_att,
                   out_censored):
    for rep in prange(reps):
        t, act, nl, nt, na, cens = _simulate_segment_searcher(
            seed, rep, edges, drifts, diffusions, loss_rates, r, mu,
            distance, dt, horizon)
        out_time[rep] = t
        out_active[rep] = act
        out_loss[rep] = nl
        out_to[rep] = nt
        out_att[rep] = na
        out_censored[rep] = cens


@njit(cache=True, parallel=True)
def segment_attempt_kernel(seed, attempts, edges, drifts, diffusions,
                           loss_rates, r, distance, dt, attempt_horizon,
                           out_success):
    """Outcome of independent single attempts (1 success, 0 curtailed)."""
    for rep in prange(attempts):
        state = np.empty(2, dtype=np.uint64)
        state[0], state[1] = _stream_init(seed, rep, 1)
        mean_to = 1.0 / r if r > 0.0 else 0.0
        e_to = _exponential(state, mean_to) if r > 0.0 else np.inf
        loss_budget = _exponential(state, 1.0)
        hazard = 0.0
        z = distance
        elapsed = 0.0
        succeeded = False
        while True:
            seg = _segment_of(z, edges)
            b = drifts[seg]
            c = diffusions[seg]
            lam = loss_rates[seg]
            step = _segment_step_cap(z, seg, edges, dt, b, c)
            ends = False
            if elapsed + step >= e_to:
                step = e_to - elapsed
                ends = True
            if elapsed + step >= attempt_horizon:
                step = attempt_horizon - elapsed
                ends = True
            if step > 0.0:
                if lam > 0.0 and hazard + lam * step >= loss_budget:
                    break
                hazard += lam * step
                z_new = z + b * step + np.sqrt(c * step) * _normal(state)
                elapsed += step
                if z_new <= 0.0:
                    succeeded = True
                elif z * z_new < 25.0 * c * step:
                    if _uniform(state) < np.exp(-2.0 * z * z_new / (c * step)):
                        succeeded = True
                z = z_new
            if succeeded or ends:
                break
        out_success[rep] = 1 if succeeded else 0
