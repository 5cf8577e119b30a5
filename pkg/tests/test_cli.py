import json
import subprocess
import sys

import pytest

from swapsim import __version__
from swapsim.cli import EXIT_INVALID, EXIT_OK, EXIT_RUNTIME, dispatch, reproduce_published


def run(argv, capsys):
    code = dispatch(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_help_lists_subcommands():
    p = subprocess.run([sys.executable, "-m", "swapsim", "--help"], capture_output=True, text=True)
    assert p.returncode == 0
    for name in ("curve", "dock", "optimize", "coverage", "thermal", "fleet", "reproduce"):
        assert name in p.stdout


def test_version(capsys):
    with pytest.raises(SystemExit) as e:
        dispatch(["--version"])
    assert e.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_unknown_subcommand(capsys):
    code, _, err = run(["bogus"], capsys)
    assert code == EXIT_INVALID and "usage" in err


def test_no_subcommand(capsys):
    assert run([], capsys)[0] == EXIT_INVALID


def test_missing_scenario_names_file(capsys, tmp_path):
    missing = tmp_path / "missing.yaml"
    code, _, err = run(["thermal", "--scenario", str(missing)], capsys)
    assert code == EXIT_INVALID and "missing.yaml" in err


def test_invalid_scenario_value(capsys, tmp_path, canonical):
    from swapsim.core import dump_scenario

    p = tmp_path / "s.yaml"
    p.write_text(dump_scenario(canonical).replace("p_gen: 150.0", "p_gen: -1.0"))
    code, _, err = run(["fleet", "--scenario", str(p)], capsys)
    assert code == EXIT_INVALID and "p_gen" in err


def test_thermal_battery(capsys, tmp_path):
    out = tmp_path / "curve.csv"
    code, text, _ = run(["thermal", "--body", "battery", "--out", str(out)], capsys)
    assert code == EXIT_OK and "8.00 min" in text
    assert out.read_text().startswith("time_s,temperature_k")


def test_curve_emit(capsys, tmp_path):
    out = tmp_path / "c.csv"
    code, text, _ = run(["curve", "--theta", "45", "--weight", "0.5", "--emit", str(out)], capsys)
    assert code == EXIT_OK and "P1" in text
    assert out.read_text().splitlines()[1] == "0.0,0.18"


def test_curve_out_of_range(capsys):
    assert run(["curve", "--theta", "120"], capsys)[0] == EXIT_INVALID


def test_dock(capsys, tmp_path):
    traj = tmp_path / "t.csv"
    code, text, _ = run(["dock", "--start", "-0.15", "0.02", "10", "--trajectory", str(traj)], capsys)
    assert code == EXIT_OK and "success: True" in text
    assert traj.read_text().splitlines()[1] == "-0.15,0.02,10.0"
    code, text, _ = run(["dock", "--start", "-0.15", "0", "60"], capsys)
    assert code == EXIT_OK and "failure: WEDGED" in text
    assert run(["dock", "--start", "0.1", "0", "0"], capsys)[0] == EXIT_INVALID


def test_coverage(capsys, tmp_path):
    code, text, _ = run(["coverage", "--topology", "hex", "--hubs", "3", "--out", str(tmp_path)], capsys)
    assert code == EXIT_OK and "gapless: True" in text and "3600.00" in text
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["outputs"] == ["boundary.csv", "coverage.csv", "hubs.csv"]


def test_fleet(capsys, tmp_path):
    code, text, _ = run(["fleet", "--rovers", "1", "--hours", "24", "--out", str(tmp_path)], capsys)
    assert code == EXIT_OK and "mean service 98.00 s" in text
    assert (tmp_path / "events.csv").exists()
    assert run(["fleet", "--rovers", "2", "--fail-profile", str(tmp_path / "nope.yaml")], capsys)[0] == EXIT_RUNTIME


def _strip_time(d):
    m = json.loads((d / "manifest.json").read_text())
    m.pop("timestamp")
    return m


def test_optimize_outputs_reproducible(capsys, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(["optimize", "--grid", "30,0.5", "--n", "200", "--out", str(d)], capsys)[0] == EXIT_OK
    files = sorted(p.name for p in a.iterdir())
    assert "hull_optimized_bumpers.off" in files and "summary.json" in files
    for name in files:
        if name != "manifest.json":
            assert (a / name).read_bytes() == (b / name).read_bytes(), name
    assert _strip_time(a) == _strip_time(b)


def test_seed_env_override(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("SWAPSIM_SEED", "5")
    run(["coverage", "--out", str(tmp_path)], capsys)
    assert json.loads((tmp_path / "manifest.json").read_text())["seed"] == 5
    monkeypatch.setenv("SWAPSIM_SEED", "five")
    assert run(["coverage"], capsys)[0] == EXIT_INVALID


def test_bad_jobs(capsys):
    assert run(["optimize", "--jobs", "0"], capsys)[0] == EXIT_INVALID


def test_reproduce_unwritable(capsys, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, _, err = run(["reproduce", "--out", str(blocker / "sub")], capsys)
    assert code == EXIT_RUNTIME and "I/O error" in err


def test_reproduce_seed_isolation(tmp_path, canonical):
    a = {r.item: r for r in reproduce_published(tmp_path / "a", canonical.with_seed(7))}
    b = {r.item: r for r in reproduce_published(tmp_path / "b", canonical.with_seed(8))}
    assert a["success-region volume ratio"].computed != b["success-region volume ratio"].computed
    for item in ("rover cooldown", "battery cooldown", "rovers per 5.5 kW hub", "max yaw compensation",
                 "hex spacing leaves no gaps"):
        assert a[item].computed == b[item].computed
    assert all(r.passed for r in a.values()) and all(r.passed for r in b.values())
    assert (tmp_path / "a" / "report.csv").exists()
