"""Command-line surface: ad-hoc evaluation, figure data, simulation runs.

Three subcommands:

* ``eval``      — closed-form statistics for one parameter set,
* ``figure``    — regenerate a study dataset (fig2/fig3/fig4/fig5/fig7)
                  as plot-ready CSV,
* ``simulate``  — Monte Carlo run with per-replication samples.

Every command that writes files also writes a ``manifest.json`` listing
the resolved configuration, the seed, and each artifact, so a run can be
reproduced bit-exactly.  CSVs use a header row, ``.`` decimals, and
``NA`` for infinite or failed points.  Files are written to a temporary
name and renamed into place, so readers never observe a partial file.

Exit codes: 0 success, 1 numeric failure, 2 configuration failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import asdict, replace

import numpy as np

from . import analytic, fpt, optimize, segments, sim
from .errors import DiffSearchError, ParameterError
from .model import (
    RaceSpec,
    SearchParams,
    Stopping,
    params_from_config,
    params_to_config,
    profile_from_config,
    profile_to_config,
    race_from_config,
)

try:
    from importlib.metadata import version as _pkg_version
    _VERSION = _pkg_version("diffsearch")
except Exception:  # pragma: no cover - source tree without install
    _VERSION = "unknown"

_FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig7")

#: caption parameter sets for the figure datasets
_FIG2A = SearchParams(0.2, 1.0, 0.01, 0.1, 0.05, 10.0)
_FIG2B = SearchParams(0.0, 1.0, 0.15, 0.1, 0.05, 10.0)
_FIG3 = SearchParams(0.15, 1.25, 0.001, 0.02, 0.1, 10.0)
_FIG45 = SearchParams(0.0, 1.0, 0.0025, 1.0 / 78.0, 0.1, 10.0)


# ---------------------------------------------------------------------------
# small IO helpers
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return "NA"
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x) or math.isinf(x):
            return "NA"
        return repr(x)
    return str(x)


def _write_atomic(path: str, write_body) -> None:
    """Write via a sibling temp file and rename, so the final path only
    ever holds a complete file."""
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            write_body(handle)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    def body(handle):
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    _write_atomic(path, body)


def _json_default(obj):
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return str(obj)


def _write_json(path: str, payload: dict) -> None:
    _write_atomic(path, lambda h: json.dump(payload, h, indent=2,
                                            default=_json_default))


class _Manifest:
    """Collects run facts and writes the reproduction record last."""

    def __init__(self, command: str, out_dir: str, config_echo: dict):
        self.command = command
        self.out_dir = out_dir
        self.config_echo = config_echo
        self.artifacts: list[str] = []
        self.notes: list[str] = []
        self._t0 = time.monotonic()

    def add(self, path: str) -> str:
        self.artifacts.append(os.path.basename(path))
        return path

    def write(self) -> str:
        path = os.path.join(self.out_dir, "manifest.json")
        _write_json(path, {
            "command": self.command,
            "tool_version": _VERSION,
            "config": self.config_echo,
            "artifacts": self.artifacts,
            "notes": self.notes,
            "wall_time_s": round(time.monotonic() - self._t0, 3),
        })
        return path


# ---------------------------------------------------------------------------
# configuration plumbing
# ---------------------------------------------------------------------------

def _parse_override(text: str):
    """``key=value`` with value as int, float, comma list, or string."""
    if "=" not in text:
        raise ParameterError("override", text, "expected key=value")
    key, raw = text.split("=", 1)
    def scalar(tok: str):
        for cast in (int, float):
            try:
                return cast(tok)
            except ValueError:
                continue
        return tok
    if "," in raw:
        return key.strip(), [scalar(tok) for tok in raw.split(",") if tok]
    return key.strip(), scalar(raw)


def _load_config(args) -> dict:
    cfg: dict = {}
    if args.config:
        with open(args.config, "r") as handle:
            cfg = json.load(handle)
    for text in args.override or []:
        key, value = _parse_override(text)
        cfg[key] = value
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "replications", None) is not None:
        cfg["replications"] = args.replications
    if getattr(args, "dt", None) is not None:
        cfg["dt"] = args.dt
    return cfg


def _sim_config(cfg: dict, default_reps: int = 100_000) -> sim.SimConfig:
    return sim.SimConfig(
        replications=int(cfg.get("replications", default_reps)),
        dt=float(cfg.get("dt", 1e-2)),
        seed=int(cfg.get("seed", 20140901)),
    )


def _out_dir(args, default: str) -> str:
    out = args.out or default
    os.makedirs(out, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def _quorum_median(params: SearchParams, k: int, n: int) -> float:
    """Median race time for the k-th of n searchers: invert the binomial
    tail once on the success level, then one quantile evaluation."""
    from scipy.optimize import brentq
    from scipy.stats import binom
    level = brentq(lambda p: binom.sf(k - 1, n, p) - 0.5, 1e-12, 1 - 1e-12)
    return fpt.quantile(params, float(level))


def _cmd_eval(args) -> int:
    cfg = _load_config(args)
    if "segments" in cfg:
        profile = profile_from_config(cfg)
        stats = segments.attempt_statistics(profile)
        mean_time = segments.mean_time_segmented(profile)
        mean_energy = segments.mean_energy_segmented(profile)
        payload = {
            "profile": profile_to_config(profile),
            "attempt_success_probability": stats.success_probability,
            "mean_attempt_duration": stats.mean_duration,
            "attempt_loss_probability": stats.loss_probability,
            "mean_time": mean_time if math.isfinite(mean_time) else None,
            "mean_energy_minus": (mean_energy if math.isfinite(mean_energy)
                                  else None),
        }
        if args.json:
            print(json.dumps(payload, indent=2, default=_json_default))
        else:
            print(f"segmented medium with {len(profile.segments)} segments, "
                  f"start distance {profile.distance:g}")
            print(f"  attempt success probability  {stats.success_probability:.9g}")
            print(f"  mean attempt duration        {stats.mean_duration:.9g}")
            print(f"  attempt loss probability     {stats.loss_probability:.9g}")
            mean_str = ("infinite" if payload["mean_time"] is None
                        else f"{payload['mean_time']:.9g}")
            energy_str = ("infinite" if payload["mean_energy_minus"] is None
                          else f"{payload['mean_energy_minus']:.9g}")
            print(f"  mean search time             {mean_str}")
            print(f"  mean energy (stopped)        {energy_str}")
        return 0

    params = params_from_config(cfg)
    race = race_from_config(cfg)
    fp = analytic.mean_time_fixed_point(params, race.n_searchers)
    energy = analytic.mean_energy_first_success(params, race.n_searchers,
                                                fp.attraction)
    q = fpt.attempt_success_probability(params)
    verdict = analytic.classify_finiteness(params, race.n_searchers,
                                           fp.attraction)
    payload = {
        "params": params_to_config(params),
        "N": race.n_searchers,
        "k": race.k_required,
        "attempt_success_probability": q,
        "attraction": fp.attraction,
        "mean_time_first_success": fp.mean_time,
        "mean_energy_minus_first_success": energy,
        "finiteness": verdict.verdict.value,
        "finiteness_reason": verdict.reason.value,
    }
    if race.k_required > 1:
        payload["median_time_quorum"] = _quorum_median(
            params, race.k_required, race.n_searchers)
    if args.json:
        print(json.dumps(payload, indent=2, default=_json_default))
    else:
        p = params
        print(f"params: b={p.drift:g} c={p.diffusion:g} lambda={p.loss_rate:g} "
              f"r={p.timeout_rate:g} mu={p.relaunch_rate:g} D={p.distance:g}")
        print(f"race:   N={race.n_searchers} k={race.k_required} "
              f"stopping={race.stopping.value}")
        print(f"  attempt success probability  {q:.9g}")
        print(f"  attraction                   {fp.attraction:.9g}")
        print(f"  mean time  E[T]              {fp.mean_time:.9g}")
        print(f"  mean energy E[J-]            {energy:.9g}")
        if "median_time_quorum" in payload:
            print(f"  median k-quorum race time    "
                  f"{payload['median_time_quorum']:.9g}")
        print(f"  finiteness                   {verdict.verdict.value} "
              f"({verdict.reason.value})")
    return 0


# ---------------------------------------------------------------------------
# figure datasets
# ---------------------------------------------------------------------------

def _listify(raw) -> list:
    """Accept a scalar where a one-element list is meant (overrides like
    ``N_list=4`` parse as a plain number)."""
    if isinstance(raw, (str, bytes)) or not hasattr(raw, "__iter__"):
        return [raw]
    return list(raw)


def _grid_from(cfg: dict, key: str, default) -> np.ndarray:
    raw = _listify(cfg.get(key, default))
    return np.asarray([float(v) for v in raw], dtype=float)


def _figure_fig2(cfg: dict, manifest: _Manifest) -> None:
    n_list = [int(v) for v in _listify(cfg.get("N_list", (1, 2, 5, 10)))]
    grid = _grid_from(cfg, "r_grid", np.geomspace(1e-3, 2.0, 61))
    for tag, base in (("a", _FIG2A), ("b", _FIG2B)):
        params = _apply_param_overrides(base, cfg)
        rows = []
        for n in n_list:
            for point in optimize.tradeoff_locus(params, n, grid):
                rows.append([n, point.timeout_mean, point.mean_time,
                             point.mean_energy_minus])
        path = manifest.add(os.path.join(manifest.out_dir, f"fig2{tag}.csv"))
        _write_csv(path, ["n", "timeout_mean", "mean_time",
                          "mean_energy_minus"], rows)


def _figure_fig3(cfg: dict, manifest: _Manifest) -> None:
    params_base = _apply_param_overrides(_FIG3, cfg)
    n_list = [int(v) for v in _listify(cfg.get("N_list", (1, 2, 4, 8)))]
    grid = _grid_from(cfg, "r_grid", np.geomspace(1.0 / 300.0, 0.4, 21))
    config = _sim_config(cfg, default_reps=10_000)
    rows = []
    for n in n_list:
        for r in grid:
            params = replace(params_base, timeout_rate=float(r))
            fp = analytic.mean_time_fixed_point(params, n)
            minus = analytic.mean_energy_first_success(params, n,
                                                       fp.attraction)
            if n == 1:
                # a lone searcher has nobody left running after success
                plus, ci = minus, None
            else:
                result = sim.simulate_race(params, RaceSpec(n), config)
                plus = result.energy_unstopped.mean
                ci = result.energy_unstopped.ci_half_width
            rows.append([n, 1.0 / float(r), minus, plus, ci])
    path = manifest.add(os.path.join(manifest.out_dir, "fig3.csv"))
    _write_csv(path, ["n", "timeout_mean", "energy_minus", "energy_plus",
                      "energy_plus_ci"], rows)


def _figure_fig4(cfg: dict, manifest: _Manifest) -> None:
    params_base = _apply_param_overrides(_FIG45, cfg)
    k = int(cfg.get("k", 3))
    n_list = [int(v) for v in _listify(cfg.get("N_list", (4, 8, 16)))]
    grid = _grid_from(cfg, "r_grid", np.geomspace(0.004, 0.4, 13))
    config = _sim_config(cfg, default_reps=10_000)
    rows = [
        [row.n_searchers,
         row.min_time, row.timeout_mean_at_min_time, row.time_noise,
         row.min_energy_minus, row.timeout_mean_at_min_energy_minus,
         row.energy_minus_noise,
         row.min_energy_plus, row.timeout_mean_at_min_energy_plus,
         row.energy_plus_noise]
        for row in optimize.min_curves_vs_N(params_base, k, n_list,
                                            r_grid=grid, config=config)
    ]
    path = manifest.add(os.path.join(manifest.out_dir, "fig4.csv"))
    _write_csv(path, ["n", "min_time", "timeout_mean_at_min_time",
                      "time_noise", "min_energy_minus",
                      "timeout_mean_at_min_energy_minus",
                      "energy_minus_noise", "min_energy_plus",
                      "timeout_mean_at_min_energy_plus",
                      "energy_plus_noise"], rows)


def _figure_fig5(cfg: dict, manifest: _Manifest) -> None:
    params = _apply_param_overrides(_FIG45, cfg)
    k = int(cfg.get("k", 3))
    deadlines = _grid_from(cfg, "B_grid", np.geomspace(100.0, 1500.0, 12))
    rows = []
    for deadline in deadlines:
        exact = fpt.searchers_needed_exact(params, float(deadline), k)
        asymptotic = fpt.searchers_needed(params, float(deadline), k)
        rows.append([float(deadline), k, exact, asymptotic])
    path = manifest.add(os.path.join(manifest.out_dir, "fig5.csv"))
    _write_csv(path, ["B", "k", "N_exact", "N_asymptotic"], rows)


def _figure_fig7(cfg: dict, manifest: _Manifest) -> None:
    rho_grid = _grid_from(cfg, "rho_grid", np.geomspace(0.03, 100.0, 16))
    eps_list = _grid_from(cfg, "eps_list", (0.0, 0.25, 0.5, 1.0))
    spec = segments.PhaseSweepSpec(
        rho_grid=tuple(float(v) for v in rho_grid),
        epsilon_list=tuple(float(v) for v in eps_list),
        m=int(cfg.get("m", 20)),
        segment_size=float(cfg.get("segment_size", 1.0)),
        diffusion=float(cfg.get("c", 1.0)),
        timeout_rate=float(cfg.get("r", 0.05)),
        relaunch_rate=float(cfg.get("mu", 0.025)),
        distance=float(cfg.get("D", 10.0)),
    )
    points = segments.phase_sweep(spec)
    rows = [[pt.rho, pt.epsilon, pt.mean_time, pt.status] for pt in points]
    if any(pt.status.startswith("error") for pt in points):
        manifest.notes.append("some sweep points failed; see status column")
    path = manifest.add(os.path.join(manifest.out_dir, "fig7.csv"))
    _write_csv(path, ["rho", "epsilon", "mean_time", "status"], rows)


def _apply_param_overrides(base: SearchParams, cfg: dict) -> SearchParams:
    """Caption defaults with any of b/c/lambda/r/mu/D replaced."""
    merged = params_to_config(base)
    for key in ("b", "c", "lambda", "mu", "D", "r"):
        if key in cfg:
            merged[key] = cfg[key]
    if "timeout_mean" in cfg:
        merged.pop("r", None)
        merged["timeout_mean"] = cfg["timeout_mean"]
    return params_from_config(merged)


_FIGURE_BUILDERS = {
    "fig2": _figure_fig2,
    "fig3": _figure_fig3,
    "fig4": _figure_fig4,
    "fig5": _figure_fig5,
    "fig7": _figure_fig7,
}


def _cmd_figure(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, f"diffsearch-{args.id}")
    manifest = _Manifest(f"figure {args.id}", out, cfg)
    _FIGURE_BUILDERS[args.id](cfg, manifest)
    path = manifest.write()
    for name in manifest.artifacts:
        print(os.path.join(out, name))
    print(path)
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _cmd_simulate(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, "diffsearch-sim")
    manifest = _Manifest("simulate", out, cfg)
    config = _sim_config(cfg)

    if "segments" in cfg:
        profile = profile_from_config(cfg)
        result = sim.simulate_segmented(profile, config)
        samples_path = manifest.add(os.path.join(out, "samples.csv"))
        _write_csv(samples_path, ["search_time"],
                   [[v] for v in result.search_times])
        summary = {
            "mean_time": asdict(result.time),
            "mean_active_time": asdict(result.active_time),
            "mean_losses": result.mean_losses,
            "mean_timeouts": result.mean_timeouts,
            "mean_attempts": result.mean_attempts,
            "censored": result.censored,
            "replications": result.replications,
        }
    else:
        params = params_from_config(cfg)
        race = race_from_config(cfg)
        result = sim.simulate_race(params, race, config)
        samples_path = manifest.add(os.path.join(out, "samples.csv"))
        _write_csv(
            samples_path,
            ["race_time", "energy_stopped", "energy_unstopped"],
            [list(row) for row in zip(result.race_times,
                                      result.energies_stopped,
                                      result.energies_unstopped)],
        )
        summary = {
            "params": params_to_config(params),
            "race": {"N": race.n_searchers, "k": race.k_required,
                     "stopping": race.stopping.value},
            "mean_time": asdict(result.time),
            "mean_energy_stopped": asdict(result.energy_stopped),
            "mean_energy_unstopped": asdict(result.energy_unstopped),
            "mean_losses": result.mean_losses,
            "mean_timeouts": result.mean_timeouts,
            "censored": result.censored,
            "replications": result.replications,
        }
    summary["seed"] = config.seed
    summary["dt"] = config.dt
    summary_path = manifest.add(os.path.join(out, "summary.json"))
    _write_json(summary_path, summary)
    manifest.write()

    mean = summary["mean_time"]["mean"]
    hw = summary["mean_time"]["ci_half_width"]
    print(f"mean search time {mean:.6g} +/- {hw:.2g} (95% CI, "
          f"{summary['replications']} replications)")
    print(samples_path)
    print(summary_path)
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffsearch",
        description="search-time and energy statistics for relaunching "
                    "diffusive searchers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out: bool):
        p.add_argument("--config", help="JSON parameter file")
        p.add_argument("--override", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        p.add_argument("--seed", type=int, help="simulation seed")
        p.add_argument("--replications", type=int,
                       help="Monte Carlo replications")
        p.add_argument("--dt", type=float, help="simulation base time step")
        if needs_out:
            p.add_argument("--out", help="output directory")

    p_eval = sub.add_parser("eval", help="closed-form statistics")
    common(p_eval, needs_out=False)
    p_eval.add_argument("--json", action="store_true",
                        help="machine-readable output")
    p_eval.set_defaults(func=_cmd_eval)

    p_fig = sub.add_parser("figure", help="regenerate a study dataset")
    p_fig.add_argument("id", choices=_FIGURES)
    common(p_fig, needs_out=True)
    p_fig.set_defaults(func=_cmd_figure)

    p_sim = sub.add_parser("simulate", help="Monte Carlo run")
    common(p_sim, needs_out=True)
    p_sim.set_defaults(func=_cmd_simulate)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (KeyError, json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DiffSearchError as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
