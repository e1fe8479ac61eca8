"""Independent reference implementations used only by the tests.

Nothing here shares code with the package: races are sampled at the
attempt level from exact first-passage laws (no time discretisation),
the transform is inverted with mpmath's arbitrary-precision Talbot rule,
and the two-segment boundary problem is solved as a dense linear system.
Agreement between these and the package is therefore evidence, not
tautology.
"""

import math

import numpy as np
from mpmath import mp, mpf, exp, invertlaplace, sqrt


# ---------------------------------------------------------------------------
# exact attempt-level race sampling
# ---------------------------------------------------------------------------

def _sample_searcher(rng, b, c, lam, r, mu, distance,
                     block=2048, max_blocks=256):
    """Attempt starts, active durations and the success time for one
    searcher, drawn from exact laws: inverse-Gaussian (or Levy, or
    defective inverse-Gaussian) first passage against an exponential
    curtailment clock."""
    u = lam + r
    starts, durations = [], []
    t_acc = 0.0
    for _ in range(max_blocks):
        curtail = rng.exponential(1.0 / u, block)
        if b > 0.0:
            hit = rng.random(block) < math.exp(-2.0 * b * distance / c)
            tau = np.where(hit, rng.wald(distance / b,
                                         distance * distance / c, block),
                           np.inf)
        elif b < 0.0:
            tau = rng.wald(distance / -b, distance * distance / c, block)
        else:
            z = rng.standard_normal(block)
            tau = (distance * distance) / (c * z * z)
        succeeded = tau <= curtail
        active = np.where(succeeded, tau, curtail)
        lost = (~succeeded) & (rng.random(block) < lam / u)
        overhead = rng.exponential(1.0 / mu, block) + np.where(
            lost, rng.exponential(1.0 / r, block), 0.0)
        winners = np.nonzero(succeeded)[0]
        if winners.size:
            j = winners[0]
            active = active[:j + 1]
            cycle = np.zeros(j + 1)
            if j:
                cycle[1:] = np.cumsum(active[:-1] + overhead[:j])
            starts.append(t_acc + cycle)
            durations.append(active)
            total = t_acc + cycle[-1] + active[-1]
            return (np.concatenate(starts), np.concatenate(durations), total)
        cycle = np.cumsum(np.concatenate(([0.0], (active + overhead)[:-1])))
        starts.append(t_acc + cycle)
        durations.append(active)
        t_acc += float(np.sum(active + overhead))
    raise RuntimeError("searcher did not finish within the block budget")


def race_samples_exact(params, n_searchers, k_required, reps, seed):
    """Per-replication (race time, stopped energy, unstopped energy)
    from the exact attempt-level sampler."""
    rng = np.random.default_rng(seed)
    out = np.empty((reps, 3))
    for i in range(reps):
        data = [_sample_searcher(rng, params.drift, params.diffusion,
                                 params.loss_rate, params.timeout_rate,
                                 params.relaunch_rate, params.distance)
                for _ in range(n_searchers)]
        totals = np.array([d[2] for d in data])
        t_race = np.sort(totals)[k_required - 1]
        stopped = sum(float(np.clip(t_race - a, 0.0, s).sum())
                      for a, s, _ in data)
        unstopped = sum(float(s[a < t_race].sum()) for a, s, _ in data)
        out[i] = (t_race, stopped, unstopped)
    return out[:, 0], out[:, 1], out[:, 2]


# ---------------------------------------------------------------------------
# arbitrary-precision transform inversion
# ---------------------------------------------------------------------------

def cdf_reference(params, t, dps=30, degree=40):
    """Single-searcher success-time CDF via mpmath Talbot inversion of
    the renewal transform, written out independently here."""
    with mp.workdps(dps):
        b, c = mpf(params.drift), mpf(params.diffusion)
        lam, r = mpf(params.loss_rate), mpf(params.timeout_rate)
        mu, distance = mpf(params.relaunch_rate), mpf(params.distance)
        u = lam + r

        def phi0(s):
            return exp(-(distance / c) * (b + sqrt(b * b + 2 * c * s)))

        def transform(s):
            psi = phi0(s + u)
            eta = (u / (s + u)) * (1 - phi0(s + u))
            delta = ((r / u) * (mu / (s + mu))
                     + (lam / u) * (r / (s + r)) * (mu / (s + mu)))
            return psi / (1 - eta * delta) / s

        return float(invertlaplace(transform, mpf(t), method="talbot",
                                   degree=degree))


# ---------------------------------------------------------------------------
# dense solve of the two-segment boundary problem
# ---------------------------------------------------------------------------

def two_segment_reference(profile):
    """(success probability, mean attempt duration, loss probability)
    for a two-segment profile, from a direct mpmath linear solve of the
    coupled boundary conditions (value match, slope match, boundedness).
    """
    assert len(profile.segments) == 2
    inner, outer = profile.segments
    with mp.workdps(40):
        r = mpf(profile.timeout_rate)
        width = mpf(inner.width)
        distance = mpf(profile.distance)

        def roots(seg):
            bb, cc = mpf(seg.drift), mpf(seg.diffusion)
            kap = mpf(seg.loss_rate) + r
            disc = sqrt(bb * bb + 2 * cc * kap)
            return (-bb + disc) / cc, (-bb - disc) / cc

        p1, q1 = roots(inner)
        p2, q2 = roots(outer)
        kap1 = mpf(inner.loss_rate) + r
        kap2 = mpf(outer.loss_rate) + r

        def solve(src1, src2):
            """Bounded solution of the piecewise ODE with constant
            sources; returns its value at the start distance."""
            part1, part2 = src1 / kap1, src2 / kap2
            # unknowns: A1, B1 (inner), B2 (outer; growing mode dropped)
            e_p, e_q = exp(p1 * width), exp(q1 * width)
            f_q = exp(q2 * width)
            m = mp.matrix([
                [1, 1, 0],                          # value at the object
                [e_p, e_q, -f_q],                   # value match at edge
                [p1 * e_p, q1 * e_q, -q2 * f_q],    # slope match at edge
            ])
            rhs = mp.matrix([
                -part1,                              # y(0) = 0 (+src shift)
                part2 - part1,
                mpf(0),
            ])
            a1, b1, b2 = mp.lu_solve(m, rhs)
            if distance <= width:
                return a1 * exp(p1 * distance) + b1 * exp(q1 * distance) \
                    + part1
            return b2 * exp(q2 * distance) + part2

        def solve_u():
            e_p, e_q = exp(p1 * width), exp(q1 * width)
            f_q = exp(q2 * width)
            m = mp.matrix([
                [1, 1, 0],
                [e_p, e_q, -f_q],
                [p1 * e_p, q1 * e_q, -q2 * f_q],
            ])
            rhs = mp.matrix([mpf(1), mpf(0), mpf(0)])
            a1, b1, b2 = mp.lu_solve(m, rhs)
            if distance <= width:
                return a1 * exp(p1 * distance) + b1 * exp(q1 * distance)
            return b2 * exp(q2 * distance)

        q = solve_u()
        w = solve(mpf(1), mpf(1))
        v = solve(mpf(inner.loss_rate), mpf(outer.loss_rate))
        return float(q), float(w), float(v)
