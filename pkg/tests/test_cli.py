import csv
import json
from pathlib import Path

import pytest

from phaseid.cli import main

GOLDEN = Path(__file__).parent / "golden"


def strip_timing(report):
    report = dict(report)
    report.pop("timing", None)
    return report


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


@pytest.fixture
def twobus_csv(workdir, capsys):
    assert main(["simulate", "twobus", "twobus.csv", "--snapshots", "200"]) == 0
    capsys.readouterr()
    return "twobus.csv"


def test_simulate_golden(workdir, capsys):
    code, out, _ = run(["simulate", "twobus", "twobus.csv", "--snapshots", 200], capsys)
    assert code == 0
    assert json.loads(out) == json.loads((GOLDEN / "simulate_twobus.json").read_text())
    assert (workdir / "twobus.csv").read_bytes() == (GOLDEN / "twobus.csv").read_bytes()


def test_simulate_ieee13_golden(workdir, capsys):
    code, out, _ = run(["simulate", "ieee13like", "ieee13like.csv"], capsys)
    assert code == 0
    echo = json.loads(out)
    assert echo == json.loads((GOLDEN / "simulate_ieee13like.json").read_text())
    assert echo["samples_per_channel"] == 1000


def test_simulate_twice_identical(workdir, capsys):
    run(["simulate", "twobus", "a.csv"], capsys)
    run(["simulate", "twobus", "b.csv"], capsys)
    assert (workdir / "a.csv").read_bytes() == (workdir / "b.csv").read_bytes()


def test_simulate_missing_scenario_exit_1(workdir, capsys):
    code, _, err = run(["simulate", "nope.json", "x.csv"], capsys)
    assert code == 1 and "error" in err


def test_simulate_divergence_exit_2(workdir, capsys):
    from phaseid.synthfeeder import bundled_scenario

    sc = bundled_scenario("twobus").to_dict()
    for ld in sc["loads"]:
        ld["kw"] = ld["kvar"] = 2e5
    Path("huge.json").write_text(json.dumps(sc))
    code, _, _ = run(["simulate", "huge.json", "x.csv", "--snapshots", 5], capsys)
    assert code == 2


def test_identify_golden(twobus_csv, capsys):
    code, out, err = run(["identify", twobus_csv, "--ref", "sub", "--tgt", "bldgM"], capsys)
    assert code == 0
    rep = json.loads(out)
    golden = json.loads((GOLDEN / "identify_twobus.json").read_text())
    assert strip_timing(rep) == strip_timing(golden)
    assert rep["decision"]["winner"] == "ABC"
    assert "winner ABC" in err


def test_identify_byte_exact_excluding_timing(twobus_csv, capsys):
    main(["identify", twobus_csv, "--ref", "sub", "--tgt", "bldgM", "-o", "r.json"])
    rep = json.loads(Path("r.json").read_text())
    rep["timing"] = json.loads((GOLDEN / "identify_twobus.json").read_text())["timing"]
    assert json.dumps(rep, indent=2) + "\n" == (GOLDEN / "identify_twobus.json").read_text()


def test_identify_ieee13_golden(workdir, capsys):
    run(["simulate", "ieee13like", "ieee13like.csv"], capsys)
    code, out, _ = run(["identify", "ieee13like.csv", "--ref", 632, "--tgt", 671], capsys)
    assert code == 0
    golden = json.loads((GOLDEN / "identify_ieee13like.json").read_text())
    assert strip_timing(json.loads(out)) == strip_timing(golden)


def test_identify_missing_bus_exit_2(twobus_csv, capsys):
    code, _, _ = run(["identify", twobus_csv, "--ref", "sub", "--tgt", "nowhere"], capsys)
    assert code == 2


def test_identify_missing_file_exit_1(workdir, capsys):
    assert run(["identify", "none.csv", "--ref", "a", "--tgt", "b"], capsys)[0] == 1


def test_identify_malformed_csv_exit_1(workdir, capsys):
    Path("bad.csv").write_text("timestamp_us,bus_id,phase,magnitude_v,angle_deg\n0,a,Q,1.0,0.0\n")
    code, _, err = run(["identify", "bad.csv", "--ref", "a", "--tgt", "a"], capsys)
    assert code == 1 and "line 2" in err


def test_low_margin_exit_3(twobus_csv, capsys):
    code, out, _ = run(["identify", twobus_csv, "--ref", "sub", "--tgt", "bldgM",
                        "--margin-threshold", 1000], capsys)
    assert code == 3
    dec = json.loads(out)["decision"]
    assert dec["below_threshold"] and dec["winner"] == "ABC"


def test_usage_error_exit_1(workdir, capsys):
    assert run(["identify", "x.csv", "--ref", "a"], capsys)[0] == 1
    assert run(["bogus"], capsys)[0] == 1
    assert run(["identify", "x.csv", "--ref", "a", "--tgt", "b", "--alpha", "abc"], capsys)[0] == 1


@pytest.mark.parametrize("preset, alpha", [("sim", 1.0), ("field", 10000.0)])
def test_presets_echo(twobus_csv, capsys, preset, alpha):
    code, out, _ = run(["identify", twobus_csv, "--ref", "sub", "--tgt", "bldgM", "--preset", preset], capsys)
    cfg = json.loads(out)["config"]
    assert code == 0
    assert (cfg["alpha"], cfg["beta"], cfg["preset"]) == (alpha, 1.0, preset)


def test_config_file_then_flags(twobus_csv, capsys):
    Path("cfg.json").write_text(json.dumps({
        "ref": "sub", "tgt": "bldgM", "preset": "field", "beta": 3, "angle-mode": "shift-removed",
    }))
    _, out, _ = run(["identify", twobus_csv, "--config", "cfg.json"], capsys)
    cfg = json.loads(out)["config"]
    assert (cfg["alpha"], cfg["beta"], cfg["angle_mode"]) == (10000.0, 3.0, "shift-removed")
    _, out, _ = run(["identify", twobus_csv, "--config", "cfg.json", "--beta", "2", "--alpha", "5"], capsys)
    cfg = json.loads(out)["config"]
    assert (cfg["alpha"], cfg["beta"]) == (5.0, 2.0)


def test_config_unknown_key_exit_1(twobus_csv, capsys):
    Path("cfg.json").write_text(json.dumps({"ref": "sub", "tgt": "bldgM", "gamma": 1}))
    assert run(["identify", twobus_csv, "--config", "cfg.json"], capsys)[0] == 1


def test_report_reproduces_from_echo(twobus_csv, capsys):
    # re-running with the echoed config gives the same report body
    _, out, _ = run(["identify", twobus_csv, "--ref", "sub", "--tgt", "bldgM",
                     "--sign-convention", "add", "--magnitude-mode", "inner"], capsys)
    first = json.loads(out)
    cfg = first["config"]
    argv = ["identify", twobus_csv, "--ref", "sub", "--tgt", "bldgM",
            "--alpha", cfg["alpha"], "--beta", cfg["beta"], "--magnitude-mode", cfg["magnitude_mode"],
            "--angle-mode", cfg["angle_mode"], "--sign-convention", cfg["sign_convention"],
            "--magnitude-scale", cfg["magnitude_scale"]]
    _, out, _ = run(argv, capsys)
    assert strip_timing(json.loads(out)) == strip_timing(first)


def test_sweep_golden_and_plot(twobus_csv, capsys):
    code, out, err = run(["sweep", twobus_csv, "--ref", "sub", "--tgt", "bldgM", "--windows", 5,
                          "--plot-csv", "plot.csv"], capsys)
    assert code == 0
    golden = json.loads((GOLDEN / "sweep_twobus.json").read_text())
    assert strip_timing(json.loads(out)) == strip_timing(golden)
    assert Path("plot.csv").read_bytes() == (GOLDEN / "sweep_twobus_plot.csv").read_bytes()
    assert "consistent=true" in err


def test_sweep_default_21_windows(twobus_csv, capsys):
    code, out, _ = run(["sweep", twobus_csv, "--ref", "sub", "--tgt", "bldgM", "--plot-csv", "p.csv"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["decision"]["consistent"]
    assert len(rep["sweep"]["windows"]) == 21
    with open("p.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 21 * 6
    assert set(rows[0]) == {"window_length", "assignment", "rank", "f", "g", "objective"}


def test_sweep_single_window_equals_identify(twobus_csv, capsys):
    _, out, _ = run(["sweep", twobus_csv, "--ref", "sub", "--tgt", "bldgM", "--windows", 1], capsys)
    sw = json.loads(out)
    _, out, _ = run(["identify", twobus_csv, "--ref", "sub", "--tgt", "bldgM"], capsys)
    ident = json.loads(out)
    (window,) = sw["sweep"]["windows"]
    assert window["length"] == 200
    window.pop("length")
    assert window == ident["result"]


def test_report_command(workdir, capsys):
    code, out, _ = run(["report", GOLDEN / "identify_twobus.json"], capsys)
    assert code == 0
    assert out == (GOLDEN / "report_identify_twobus.txt").read_text()
    code, out, _ = run(["report", GOLDEN / "sweep_twobus.json"], capsys)
    assert code == 0 and "consistent=true" in out


def test_report_rejects_wrong_schema(workdir, capsys):
    rep = json.loads((GOLDEN / "identify_twobus.json").read_text())
    rep["schema_version"] = 99
    Path("r.json").write_text(json.dumps(rep))
    assert run(["report", "r.json"], capsys)[0] == 1
    Path("r.json").write_text("{not json")
    assert run(["report", "r.json"], capsys)[0] == 1


def test_nominal_override(twobus_csv, capsys):
    _, out, _ = run(["identify", twobus_csv, "--ref", "sub", "--tgt", "bldgM",
                     "--nominal", "sub=2401.7771", "--nominal", "bldgM=2401.7771"], capsys)
    assert json.loads(out)["config"]["nominal_voltages"] == {"sub": 2401.7771, "bldgM": 2401.7771}
    assert run(["identify", twobus_csv, "--ref", "sub", "--tgt", "bldgM", "--nominal", "sub"], capsys)[0] == 1
