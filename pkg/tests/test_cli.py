import json

import numpy as np
import pytest

from dronesurv import cli
from dronesurv.config import (
    ConfigSyntaxError,
    ConfigValueError,
    RunConfig,
    UnknownKeyError,
    from_dict,
    parse_config,
    serialize,
)
from dronesurv.detection import optimal_altitude_for_min_power
from dronesurv.montecarlo import Scenario


def test_empty_document_gives_defaults():
    cfg = parse_config("")
    assert cfg == RunConfig()
    assert cfg.scenario == Scenario()
    assert parse_config("# only a comment\n") == RunConfig()


def test_partial_document_keeps_other_defaults():
    cfg = parse_config("deployment:\n  altitude_h: 600\nseed: 9\n")
    assert cfg.scenario.altitude_h == 600.0 and cfg.scenario.seed == 9
    assert cfg.scenario.side_l == Scenario().side_l


def test_inverted_power_range_names_section():
    with pytest.raises(ConfigValueError, match="^power"):
        parse_config("power:\n  p_min_dbm: 30\n  p_max_dbm: 10\n")


@pytest.mark.parametrize(
    "doc, path",
    [
        ("bogus: 1\n", "bogus"),
        ("environment:\n  a9: 1\n", "environment.a9"),
        ("sweep:\n  h: {start: 1, stop: 2, step: 1, extra: 3}\n", "sweep.h.extra"),
    ],
)
def test_unknown_keys_are_named(doc, path):
    with pytest.raises(UnknownKeyError, match=path.replace(".", r"\.")):
        parse_config(doc)


def test_diagnostics_are_distinct():
    with pytest.raises(ConfigSyntaxError):
        parse_config("environment: [unclosed\n")
    with pytest.raises(ConfigValueError, match="budget.noise_dbm"):
        parse_config("budget:\n  noise_dbm: loud\n")
    with pytest.raises(ConfigValueError, match="trials"):
        parse_config("trials: 0\n")
    with pytest.raises(ConfigValueError, match="environment"):
        parse_config("environment:\n  a1: 2.5\n")


def test_round_trip():
    doc = (
        "environment:\n  sigma_los_a: 5.0\n"
        "power:\n  p_min_dbm: -5\n  p_max_dbm: 24\n  true_power_model: uniform\n"
        "zone:\n  radius: 750\n"
        "sweep:\n  h: {start: 100, stop: 900, step: 50}\n"
        "trials: 123\nseed: 77\n"
    )
    cfg = parse_config(doc)
    assert parse_config(serialize(cfg)) == cfg
    assert parse_config(serialize(RunConfig())) == RunConfig()


def _run(tmp_path, *argv):
    out = tmp_path / "out"
    code = cli.main([*argv, "--out", str(out)])
    return code, out


def test_channel_curve_rows(tmp_path):
    code, out = _run(tmp_path, "channel-curve")
    assert code == 0
    cols, rows = cli.read_csv(out / "channel-curve.csv")
    assert cols == ["theta_deg", "p_los", "alpha", "sigma_db"]
    assert len(rows) == 91
    assert rows[0][0] == 0 and rows[-1][0] == 90


def test_min_power_consistent_with_optimizer(tmp_path):
    code, out = _run(tmp_path, "min-power", "--zone-radius", "500")
    assert code == 0
    cols, rows = cli.read_csv(out / "min-power.csv")
    assert cols == ["h_m", "p_min_dbm"]
    side = json.loads((out / "min-power.json").read_text())
    cfg = from_dict(side["config"])
    h_star, p_star = optimal_altitude_for_min_power(
        500.0, cfg.sweep.detection_h.values(), cfg.scenario.env, cfg.scenario.budget
    )
    best = min(rows, key=lambda r: r[1])
    assert best[0] == h_star
    assert best[1] == pytest.approx(p_star, rel=1e-5)
    assert side["results"]["optimum"]["h_m"] == h_star


def test_sidecar_reproduces_run(tmp_path):
    code, out = _run(tmp_path, "sweep-l", "--trials", "200", "--set", "sweep.l={start: 100, stop: 500, step: 200}")
    assert code == 0
    first = (out / "sweep-l.csv").read_bytes()
    code = cli.main(["sweep-l", "--config", str(out / "sweep-l.json"), "--out", str(tmp_path / "again")])
    assert code == 0
    assert (tmp_path / "again" / "sweep-l.csv").read_bytes() == first
    cols, rows = cli.read_csv(out / "sweep-l.csv")
    assert cols[0] == "l_m" and [r[0] for r in rows] == [100, 300, 500]


def test_byte_identical_output(tmp_path):
    args = ["coverage", "--set", "sweep.detection_h={start: 10, stop: 500, step: 10}"]
    _, a = _run(tmp_path / "a", *args)
    _, b = _run(tmp_path / "b", *args)
    assert (a / "coverage.csv").read_bytes() == (b / "coverage.csv").read_bytes()


def test_flags_override_config(tmp_path):
    cfg_file = tmp_path / "c.yaml"
    cfg_file.write_text("deployment:\n  altitude_h: 400\ntrials: 50\n")
    code, out = _run(tmp_path, "localize-once", "-c", str(cfg_file), "--altitude", "900")
    assert code == 0
    side = json.loads((out / "localize-once.json").read_text())
    assert side["config"]["deployment"]["altitude_h"] == 900
    assert side["config"]["trials"] == 50
    assert side["format_version"] == 1


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_DIR_ENV, str(tmp_path / "envdir"))
    assert cli.main(["channel-curve"]) == 0
    assert (tmp_path / "envdir" / "channel-curve.csv").exists()


def test_optimize_subcommand(tmp_path):
    code, out = _run(
        tmp_path, "optimize", "--trials", "100",
        "--set", "sweep.h={start: 400, stop: 800, step: 400}",
        "--set", "sweep.l={start: 300, stop: 600, step: 300}",
    )
    assert code == 0
    cols, rows = cli.read_csv(out / "optimize.csv")
    assert cols == ["h_m", "l_m", "mean_error_m"] and len(rows) == 4
    opt = json.loads((out / "optimize.json").read_text())["results"]["optimum"]
    assert opt["mean_error_m"] == min(r[2] for r in rows) or np.isclose(opt["mean_error_m"], min(r[2] for r in rows), rtol=1e-5)


def test_errors_give_nonzero_exit(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("power:\n  p_min_dbm: 5\n  p_max_dbm: 1\n")
    assert cli.main(["min-power", "-c", str(bad), "--out", str(tmp_path)]) != 0
    assert "power" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        cli.main(["fly-away"])
    assert exc.value.code != 0
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["channel-curve", "--out", str(blocker / "sub")]) != 0
    assert cli.main(["channel-curve", "-c", str(tmp_path / "missing.yaml")]) != 0
