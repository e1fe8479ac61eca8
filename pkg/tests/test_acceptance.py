"""End-to-end acceptance gate.

Each test covers one acceptance criterion, prints exactly one
``ACCEPTANCE <id> <label>: PASS|FAIL`` line (run with ``-s`` to watch
them as they complete) and then asserts.  The sixteen heavyweight races
behind the first three criteria are simulated once, lazily, and shared.
"""

import math
import os
import subprocess
import sys
import time
from dataclasses import replace

import numpy as np
import pytest

from diffsearch import fpt, optimize, segments
from diffsearch.analytic import (
    classify_finiteness,
    deterministic_limit_mean_time,
    mean_energy_first_success,
    mean_time,
    mean_time_fixed_point,
)
from diffsearch.model import (
    FinitenessReason,
    FinitenessVerdict,
    RaceSpec,
    SearchParams,
    Segment,
    SegmentProfile,
)
from diffsearch.sim import SimConfig, segment_attempt_success, simulate_race

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

# the four parameter sets the CLI figure families are built around
CAPTIONS = {
    "fig2a": SearchParams(0.2, 1.0, 0.01, 0.1, 0.05, 10.0),
    "fig2b": SearchParams(0.0, 1.0, 0.15, 0.1, 0.05, 10.0),
    "fig3": SearchParams(0.15, 1.25, 0.001, 0.02, 0.1, 10.0),
    "fig45": SearchParams(0.0, 1.0, 0.0025, 1.0 / 78.0, 0.1, 10.0),
}
SET_ORDER = ("fig2a", "fig2b", "fig3", "fig45")
FLEETS = (1, 2, 5, 10)
RACE_REPS = 100_000
RACE_DT = 1e-2
SET_BUDGET_S = 300.0

_RACES = {}
_WALL = {}


def shared_race(name, n):
    """100k-replication race for one caption set, cached across tests."""
    key = (name, n)
    if key not in _RACES:
        cfg = SimConfig(replications=RACE_REPS, dt=RACE_DT,
                        seed=815_000 + 100 * SET_ORDER.index(name) + n)
        start = time.perf_counter()
        _RACES[key] = simulate_race(CAPTIONS[name], n, cfg)
        _WALL[name] = _WALL.get(name, 0.0) + time.perf_counter() - start
    return _RACES[key]


def report(ident, label, violations):
    status = "PASS" if not violations else "FAIL"
    line = f"ACCEPTANCE {ident} {label}: {status}"
    if violations:
        line += " -- " + "; ".join(violations)
    print(line, flush=True)
    assert not violations, line


def test_a01_race_time_formula_vs_simulation():
    violations = []
    for name in SET_ORDER:
        for n in FLEETS:
            res = shared_race(name, n)
            predicted = mean_time_fixed_point(CAPTIONS[name], n).mean_time
            gap = abs(predicted - res.time.mean)
            band = 3.0 * res.time.ci_half_width
            if gap > band:
                violations.append(
                    f"{name} N={n}: formula {predicted:.6g} vs simulated "
                    f"{res.time.mean:.6g} ({gap / band:.2f}x the 3-half-"
                    f"width band)")
    for name in SET_ORDER:
        if _WALL[name] > SET_BUDGET_S:
            violations.append(
                f"{name}: {_WALL[name]:.0f}s of simulation (> "
                f"{SET_BUDGET_S:.0f}s)")
    report("A01", "mean race time, fixed-point formula vs simulation",
           violations)


def test_a02_race_energy_formula_vs_simulation():
    violations = []
    for name in SET_ORDER:
        for n in FLEETS:
            res = shared_race(name, n)
            predicted = mean_energy_first_success(CAPTIONS[name], n)
            gap = abs(predicted - res.energy_stopped.mean)
            band = 3.0 * res.energy_stopped.ci_half_width
            if gap > band:
                violations.append(
                    f"{name} N={n}: formula {predicted:.6g} vs simulated "
                    f"{res.energy_stopped.mean:.6g} ({gap / band:.2f}x the "
                    f"3-half-width band)")
    report("A02", "stopped race energy, formula vs simulation", violations)


def test_a03_search_time_distribution_matches_samples():
    params = CAPTIONS["fig45"]
    samples = shared_race("fig45", 1).race_times
    xs, counts = np.unique(samples, return_counts=True)
    model = fpt.cdf_G(params, xs).cdf
    after = np.cumsum(counts) / samples.size
    before = after - counts / samples.size
    ks = float(np.max(np.maximum(np.abs(model - after),
                                 np.abs(model - before))))
    violations = [] if ks <= 0.02 else \
        [f"Kolmogorov distance {ks:.4f} > 0.02"]
    report("A03", f"inverted CDF vs {samples.size} samples "
           f"(KS={ks:.4f})", violations)


def test_a04_fleet_sizing_rule_of_thumb():
    params = CAPTIONS["fig45"]
    budgets = np.geomspace(100.0, 1500.0, 12)
    violations = []
    if budgets.size < 10:
        violations.append("budget sweep has fewer than 10 points")
    for budget in budgets:
        exact = fpt.searchers_needed_exact(params, float(budget), 3)
        asym = fpt.searchers_needed(params, float(budget), 3)
        allowed = 2 if exact >= 5 else 3
        if abs(asym - exact) > allowed:
            violations.append(
                f"B={budget:.0f}: ceil rule {asym} vs median fleet {exact}")
    report("A04", "fleet sizing, ceil rule vs exact median criterion",
           violations)


def test_a05_finiteness_trichotomy_and_deterministic_limit():
    mu, dist = 0.1, 10.0
    cases = [
        (SearchParams(-0.3, 0.0, 0.0, 0.0, mu, dist),
         FinitenessVerdict.FINITE,
         FinitenessReason.DETERMINISTIC_TOWARD_OBJECT),
        (SearchParams(0.3, 0.0, 0.0, 0.0, mu, dist),
         FinitenessVerdict.INFINITE,
         FinitenessReason.DETERMINISTIC_AWAY_OR_ZERO_DRIFT),
        (SearchParams(0.3, 1.0, 0.01, 0.05, mu, dist),
         FinitenessVerdict.FINITE,
         FinitenessReason.RANDOMISED_WITH_CURTAILMENT),
        (SearchParams(0.3, 1.0, 0.0, 0.0, mu, dist),
         FinitenessVerdict.INFINITE,
         FinitenessReason.NO_CURTAILMENT),
    ]
    violations = []
    for p, verdict, reason in cases:
        got = classify_finiteness(p)
        if got.verdict is not verdict or got.reason is not reason:
            violations.append(
                f"b={p.drift} c={p.diffusion} u="
                f"{p.loss_rate + p.timeout_rate}: {got.verdict.value}/"
                f"{got.reason.value}")
    creeping = SearchParams(-0.5, 1e-6, 0.01, 0.05, mu, dist)
    ballistic = deterministic_limit_mean_time(creeping)
    rel = abs(mean_time(creeping) - ballistic) / ballistic
    if rel > 1e-3:
        violations.append(f"c->0 limit off by {rel:.2e} (> 1e-3)")
    report("A05", "finiteness trichotomy and the zero-diffusion limit",
           violations)


def homogeneous_profile(p, cuts=()):
    edges = [0.0, *cuts, math.inf]
    segs = tuple(
        Segment(width=b - a, drift=p.drift, diffusion=p.diffusion,
                loss_rate=p.loss_rate)
        for a, b in zip(edges, edges[1:]))
    return SegmentProfile(segments=segs, timeout_rate=p.timeout_rate,
                          relaunch_rate=p.relaunch_rate, distance=p.distance)


def test_a06_segment_solver_cross_checks():
    violations = []
    for name in SET_ORDER:
        p = CAPTIONS[name]
        reference = mean_time(p)
        single = segments.mean_time_segmented(homogeneous_profile(p))
        rel = abs(single - reference) / reference
        if rel > 1e-8:
            violations.append(f"{name}: one segment off by {rel:.2e}")
        fine = segments.mean_time_segmented(
            homogeneous_profile(p, np.linspace(0.9, 12.3, 14)))
        rel = abs(fine - single) / single
        if rel > 1e-9:
            violations.append(f"{name}: refinement moved mean by {rel:.2e}")
    layered = SegmentProfile(
        segments=(Segment(4.0, -0.15, 1.0, 0.01),
                  Segment(math.inf, 0.05, 1.5, 0.002)),
        timeout_rate=0.02, relaunch_rate=0.1, distance=10.0)
    q = segments.killed_success_probability(layered)
    mc = segment_attempt_success(layered, attempts=100_000, seed=424)
    z = abs(q - mc.mean) / math.sqrt(mc.variance / mc.samples)
    if z > 3.0:
        violations.append(f"two-layer success probability z={z:.2f} (> 3)")
    report("A06", "segmented solver vs closed form, refinement and "
           "Bernoulli trials", violations)


def test_a07_defended_medium_phase_boundary():
    spec = segments.PhaseSweepSpec(
        rho_grid=tuple(float(r) for r in np.geomspace(0.03, 100.0, 16)),
        epsilon_list=(0.0, 1.0))
    points = segments.phase_sweep(spec)
    by_eps = {
        eps: sorted((pt for pt in points if pt.epsilon == eps),
                    key=lambda pt: pt.rho)
        for eps in (0.0, 1.0)
    }

    def diverges(pt):
        return pt.status != "ok" or pt.mean_time > 1e6

    violations = []
    divergent = [pt.rho for pt in by_eps[0.0] if diverges(pt)]
    settled = [pt.rho for pt in by_eps[0.0] if not diverges(pt)]
    if not divergent:
        violations.append("loss-matched drift never diverges")
    elif settled and max(divergent) > min(settled):
        violations.append("divergence is not confined to small rho")
    stuck = [pt.rho for pt in by_eps[1.0]
             if pt.status != "ok" or not math.isfinite(pt.mean_time)]
    if stuck:
        violations.append(
            f"epsilon=1 not finite at rho={[f'{r:.3g}' for r in stuck]}")
    else:
        lower = [pt.mean_time for pt in by_eps[1.0][:8]]
        drops = [a > b * (1.0 + 1e-9) for a, b in zip(lower, lower[1:])]
        if any(drops):
            violations.append(
                "epsilon=1 mean time grows as rho shrinks on the small-rho "
                "half")
    report("A07", "phase boundary of the defended medium", violations)


def test_a08_energy_split_widens_with_fleet_size():
    params = replace(CAPTIONS["fig3"], timeout_rate=0.005)
    runs = [
        simulate_race(params, n,
                      SimConfig(replications=RACE_REPS, dt=RACE_DT,
                                seed=830_100 + n))
        for n in (2, 4, 8)
    ]
    violations = []
    for a, b in zip(runs, runs[1:]):
        up = b.energy_unstopped.mean - a.energy_unstopped.mean
        need = 2.0 * math.hypot(a.energy_unstopped.ci_half_width,
                                b.energy_unstopped.ci_half_width)
        if up <= need:
            violations.append(
                f"unstopped energy gap {up:.1f} <= {need:.1f}")
        down = a.energy_stopped.mean - b.energy_stopped.mean
        need = 2.0 * math.hypot(a.energy_stopped.ci_half_width,
                                b.energy_stopped.ci_half_width)
        if down <= need:
            violations.append(
                f"stopped energy gap {down:.1f} <= {need:.1f}")
    report("A08", "energy split widens with fleet size", violations)


def test_a09_optimised_energy_is_fleet_size_invariant():
    rows = optimize.min_curves_vs_N(
        CAPTIONS["fig45"], 3, (4, 8, 16),
        r_grid=np.geomspace(0.004, 0.4, 13),
        config=SimConfig(replications=10_000, seed=909))
    stopped = [row.min_energy_minus for row in rows]
    unstopped = [row.min_energy_plus for row in rows]
    violations = []
    spread = max(stopped) / min(stopped) - 1.0
    if spread >= 0.15:
        violations.append(
            f"best stopped energy varies {spread:.1%} (>= 15%) over "
            f"fleet sizes")
    if not all(a < b for a, b in zip(unstopped, unstopped[1:])):
        violations.append(
            "best unstopped energy not increasing: "
            + ", ".join(f"{v:.1f}" for v in unstopped))
    report("A09", "optimised energies across fleet sizes", violations)


def test_a10_cli_runs_are_reproducible_across_worker_counts(tmp_path):
    overrides = ["b=0.0", "c=1.0", "lambda=0.0025",
                 "r=0.01282051282051282", "mu=0.1", "D=10", "N=4", "k=2"]

    def run_cli(seed, threads, out):
        argv = [sys.executable, "-m", "diffsearch.cli", "simulate",
                "--seed", str(seed), "--replications", "20000",
                "--out", str(out)]
        for item in overrides:
            argv += ["--override", item]
        env = dict(os.environ, NUMBA_NUM_THREADS=str(threads))
        proc = subprocess.run(argv, capture_output=True, text=True,
                              env=env, cwd=str(tmp_path))
        assert proc.returncode == 0, proc.stderr
        return ((out / "samples.csv").read_bytes(),
                (out / "summary.json").read_bytes())

    first = run_cli(77, 1, tmp_path / "a")
    rerun = run_cli(77, 2, tmp_path / "b")
    reseeded = run_cli(78, 1, tmp_path / "c")
    violations = []
    if first != rerun:
        violations.append(
            "same seed, different worker count: outputs differ")
    if first == reseeded:
        violations.append("different seed produced identical outputs")
    report("A10", "bit-identical CLI reruns at fixed seed", violations)


def test_a11_quorum_time_matches_normal_approximation():
    params = CAPTIONS["fig45"]
    clt = fpt.quantile_clt(params, 0.3, 50)
    res = simulate_race(params, RaceSpec(50, 15),
                        SimConfig(replications=10_000, dt=RACE_DT,
                                  seed=1111))
    mean_rel = abs(res.time.mean - clt.mean) / clt.mean
    var_rel = abs(res.time.variance - clt.variance) / clt.variance
    violations = []
    if mean_rel > 0.05:
        violations.append(f"mean off by {mean_rel:.1%} (> 5%)")
    if var_rel > 0.15:
        violations.append(f"variance off by {var_rel:.1%} (> 15%)")
    report("A11", "15-of-50 quorum time vs normal approximation",
           violations)
