import csv
import json
import math
import os

import pytest

from diffsearch import analytic, segments
from diffsearch.cli import _parse_override, main
from diffsearch.errors import ParameterError
from diffsearch.model import (
    SearchParams,
    Segment,
    SegmentProfile,
    profile_to_config,
)

FIG45 = SearchParams(0.0, 1.0, 0.0025, 1.0 / 78.0, 0.1, 10.0)

FIG45_ARGS = ["--override", "b=0", "--override", "c=1",
              "--override", "lambda=0.0025", "--override", "mu=0.1",
              "--override", "D=10", "--override", "r=0.012820512820512820"]


def run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def read_csv(path):
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    return rows[0], rows[1:]


def test_parse_override_shapes():
    assert _parse_override("N=4") == ("N", 4)
    assert _parse_override("dt=0.5") == ("dt", 0.5)
    assert _parse_override("stopping=no_stop") == ("stopping", "no_stop")
    assert _parse_override("r_grid=0.1,0.2") == ("r_grid", [0.1, 0.2])
    assert _parse_override("N_list=4,") == ("N_list", [4])
    with pytest.raises(ParameterError):
        _parse_override("no-equals-sign")


def test_eval_human_readable(capsys):
    code, out, _ = run(capsys, ["eval", *FIG45_ARGS])
    assert code == 0
    assert "418.636929" in out
    assert "finite" in out


def test_eval_json_payload(capsys):
    code, out, _ = run(capsys, ["eval", "--json", *FIG45_ARGS])
    assert code == 0
    payload = json.loads(out)
    assert payload["mean_time_first_success"] == pytest.approx(
        418.63692867838736, rel=1e-12)
    assert payload["attempt_success_probability"] == pytest.approx(
        0.17369440524115903, rel=1e-12)
    assert payload["attraction"] == 0.0
    assert payload["finiteness"] == "finite"
    assert "median_time_quorum" not in payload


def test_eval_race_uses_fixed_point(capsys):
    code, out, _ = run(capsys, ["eval", "--json", *FIG45_ARGS,
                                "--override", "N=5"])
    assert code == 0
    payload = json.loads(out)
    fp = analytic.mean_time_fixed_point(FIG45, 5)
    assert payload["mean_time_first_success"] == pytest.approx(
        fp.mean_time, rel=1e-10)
    assert payload["attraction"] == pytest.approx(fp.attraction, rel=1e-10)


def test_eval_quorum_median(capsys):
    code, out, _ = run(capsys, ["eval", "--json", *FIG45_ARGS,
                                "--override", "N=50", "--override", "k=15"])
    assert code == 0
    payload = json.loads(out)
    assert payload["median_time_quorum"] > 0.0


def test_eval_missing_key_exits_2(capsys):
    code, _, err = run(capsys, ["eval", "--override", "b=0",
                                "--override", "c=1",
                                "--override", "lambda=0.1",
                                "--override", "r=0.1",
                                "--override", "D=10"])
    assert code == 2
    assert "mu" in err


def test_eval_overflow_exits_1(capsys):
    code, _, err = run(capsys, ["eval", *FIG45_ARGS, "--override", "D=6000"])
    assert code == 1
    assert "ExponentOverflow" in err


def test_eval_config_file_with_override(tmp_path, capsys):
    cfg = tmp_path / "base.json"
    cfg.write_text(json.dumps({"b": 0.0, "c": 1.0, "lambda": 0.0025,
                               "mu": 0.1, "D": 10.0, "timeout_mean": 78.0}))
    code, out, _ = run(capsys, ["eval", "--json", "--config", str(cfg),
                                "--override", "D=5"])
    assert code == 0
    assert json.loads(out)["params"]["D"] == 5


def test_eval_broken_config_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(capsys, ["eval", "--config", str(bad)])
    assert code == 2
    code, _, err = run(capsys, ["eval", "--config",
                                str(tmp_path / "missing.json")])
    assert code == 2


def test_eval_segmented_config(tmp_path, capsys):
    profile = SegmentProfile(
        segments=(Segment(width=4.0, drift=-0.1, diffusion=1.0,
                          loss_rate=0.01),
                  Segment(width=math.inf, drift=0.05, diffusion=1.5,
                          loss_rate=0.002)),
        timeout_rate=0.02, relaunch_rate=0.1, distance=10.0)
    cfg = tmp_path / "layers.json"
    cfg.write_text(json.dumps(profile_to_config(profile)))
    code, out, _ = run(capsys, ["eval", "--json", "--config", str(cfg)])
    assert code == 0
    payload = json.loads(out)
    stats = segments.attempt_statistics(profile)
    assert payload["attempt_success_probability"] == pytest.approx(
        stats.success_probability, rel=1e-12)
    assert payload["mean_time"] == pytest.approx(
        segments.mean_time_segmented(profile), rel=1e-12)


# -- figure datasets ----------------------------------------------------------

def test_figure_fig5_dataset(tmp_path, capsys):
    out = tmp_path / "fig5"
    code, stdout, _ = run(capsys, ["figure", "fig5", "--out", str(out)])
    assert code == 0
    header, rows = read_csv(out / "fig5.csv")
    assert header == ["B", "k", "N_exact", "N_asymptotic"]
    assert len(rows) == 12
    first = rows[0]
    assert float(first[0]) == pytest.approx(100.0)
    assert (int(first[2]), int(first[3])) == (12, 14)
    assert all(int(r[2]) <= int(r[3]) for r in rows)
    manifest = json.loads((out / "manifest.json").read_text())
    assert "fig5.csv" in manifest["artifacts"]
    assert not [f for f in os.listdir(out) if f.endswith(".part")]
    assert str(out / "fig5.csv") in stdout


def test_figure_fig7_captures_errors_as_na(tmp_path, capsys):
    out = tmp_path / "fig7"
    code, _, _ = run(capsys, ["figure", "fig7", "--out", str(out),
                              "--override", "rho_grid=0.001,0.5,50",
                              "--override", "eps_list=0,1",
                              "--override", "m=6"])
    assert code == 0
    header, rows = read_csv(out / "fig7.csv")
    assert header == ["rho", "epsilon", "mean_time", "status"]
    assert len(rows) == 6
    failed = [r for r in rows if r[3].startswith("error")]
    assert failed and all(r[2] == "NA" for r in failed)
    assert any(r[3] == "ok" for r in rows)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["notes"]


def test_figure_fig2_matches_formulas(tmp_path, capsys):
    out = tmp_path / "fig2"
    code, _, _ = run(capsys, ["figure", "fig2", "--out", str(out),
                              "--override", "N_list=1",
                              "--override", "r_grid=0.05,0.1,0.4"])
    assert code == 0
    for tag, base in (("a", SearchParams(0.2, 1.0, 0.01, 0.1, 0.05, 10.0)),
                      ("b", SearchParams(0.0, 1.0, 0.15, 0.1, 0.05, 10.0))):
        header, rows = read_csv(out / f"fig2{tag}.csv")
        assert header == ["n", "timeout_mean", "mean_time",
                          "mean_energy_minus"]
        assert len(rows) == 3
        r_mid = base.with_timeout(0.1)
        mid = rows[1]
        assert float(mid[1]) == pytest.approx(10.0)
        assert float(mid[2]) == pytest.approx(analytic.mean_time(r_mid),
                                              rel=1e-12)


def test_figure_fig3_single_searcher_columns_identical(tmp_path, capsys):
    out = tmp_path / "fig3"
    code, _, _ = run(capsys, ["figure", "fig3", "--out", str(out),
                              "--override", "N_list=1",
                              "--override", "r_grid=0.01,0.05,0.2"])
    assert code == 0
    header, rows = read_csv(out / "fig3.csv")
    assert header == ["n", "timeout_mean", "energy_minus", "energy_plus",
                      "energy_plus_ci"]
    for row in rows:
        assert row[2] == row[3]       # byte-for-byte equal columns
        assert row[4] == "NA"


# -- simulate -----------------------------------------------------------------

SIM_ARGS = [*FIG45_ARGS, "--override", "N=3", "--replications", "400"]


def test_simulate_writes_samples_and_summary(tmp_path, capsys):
    out = tmp_path / "sim"
    code, stdout, _ = run(capsys, ["simulate", "--out", str(out),
                                   "--seed", "5", *SIM_ARGS])
    assert code == 0
    header, rows = read_csv(out / "samples.csv")
    assert header == ["race_time", "energy_stopped", "energy_unstopped"]
    assert len(rows) == 400
    summary = json.loads((out / "summary.json").read_text())
    assert summary["seed"] == 5
    assert summary["replications"] == 400
    assert summary["race"] == {"N": 3, "k": 1, "stopping": "stop_all"}
    assert "mean search time" in stdout


def test_simulate_same_seed_same_bytes(tmp_path, capsys):
    outs = []
    for name in ("one", "two"):
        out = tmp_path / name
        code, _, _ = run(capsys, ["simulate", "--out", str(out),
                                  "--seed", "9", *SIM_ARGS])
        assert code == 0
        outs.append(out)
    for fname in ("samples.csv", "summary.json"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()
    diff = tmp_path / "three"
    code, _, _ = run(capsys, ["simulate", "--out", str(diff),
                              "--seed", "10", *SIM_ARGS])
    assert (outs[0] / "samples.csv").read_bytes() != \
        (diff / "samples.csv").read_bytes()


def test_simulate_single_replication(tmp_path, capsys):
    out = tmp_path / "single"
    code, _, _ = run(capsys, ["simulate", "--out", str(out), "--seed", "2",
                              *FIG45_ARGS, "--replications", "1"])
    assert code == 0
    _, rows = read_csv(out / "samples.csv")
    assert len(rows) == 1


def test_simulate_segmented_profile(tmp_path, capsys):
    profile = SegmentProfile(
        segments=(Segment(width=4.0, drift=-0.1, diffusion=1.0,
                          loss_rate=0.01),
                  Segment(width=math.inf, drift=0.05, diffusion=1.5,
                          loss_rate=0.002)),
        timeout_rate=0.02, relaunch_rate=0.1, distance=10.0)
    cfg = tmp_path / "layers.json"
    cfg.write_text(json.dumps(profile_to_config(profile)))
    out = tmp_path / "segsim"
    code, _, _ = run(capsys, ["simulate", "--out", str(out),
                              "--config", str(cfg),
                              "--replications", "300", "--seed", "4"])
    assert code == 0
    header, rows = read_csv(out / "samples.csv")
    assert header == ["search_time"]
    assert len(rows) == 300
    summary = json.loads((out / "summary.json").read_text())
    assert summary["mean_attempts"] > 1.0


def test_unknown_figure_id_is_usage_error(capsys):
    with pytest.raises(SystemExit):
        main(["figure", "fig9"])
