import csv
import json

import pytest

from orbqfl import orbital
from orbqfl.cli import main

FAST = ["--n_sats", "4", "--rounds", "3", "--qubits", "2", "--ansatz_reps", "1", "--max_fun", "15", "--n_per_class", "20"]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_orbits_rows(tmp_path):
    period = orbital.orbital_period(500.0)
    args = ["orbits", "--out", str(tmp_path), "--duration_s", repr(period), "--step_s", repr(period / 4)]
    assert main(args) == 0
    assert len(read_csv(tmp_path / "ephemeris.csv")) == 25
    assert len(read_csv(tmp_path / "distances.csv")) == 50
    assert (tmp_path / "manifest.json").is_file()


def test_orbits_snapshot_and_errors(tmp_path, capsys):
    assert main(["orbits", "--out", str(tmp_path)]) == 0
    assert {r["time_s"] for r in read_csv(tmp_path / "ephemeris.csv")} == {"0.0"}
    capsys.readouterr()
    assert main(["orbits", "--out", str(tmp_path), "--step_s", "0"]) == 2
    assert main(["orbits", "--config", str(tmp_path / "nope.json")]) != 0
    captured = capsys.readouterr()
    assert captured.out == "" and "not found" in captured.err


def test_linkbudget_report(capsys):
    assert main(["linkbudget", "--distance", "8086"]) == 0
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert len(rows) == 1
    assert float(rows[0]["margin_db"]) == pytest.approx(52.15, abs=0.05)
    assert set(rows[0]) == {"link_name", "distance_km", "fspl_db", "eirp_dbw", "cn0_dbhz", "ebn0_db", "margin_db"}


def test_linkbudget_grid_and_sweep(tmp_path):
    assert main(["linkbudget", "--grid", "--out", str(tmp_path)]) == 0
    assert len(read_csv(tmp_path / "grid.csv")) == 100
    assert main(["linkbudget", "--sweep", "1e6,1e7,1e8", "--out", str(tmp_path)]) == 0
    margins = [float(r["margin_db"]) for r in read_csv(tmp_path / "sweep.csv")]
    assert margins == pytest.approx([62.15, 52.15, 42.15], abs=0.01)


def test_linkbudget_usage_errors(capsys):
    for argv in (["linkbudget"], ["linkbudget", "--grid", "--distance", "10"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2
        assert capsys.readouterr().out == ""


def test_train_counts_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["train", "--out", str(a), "--seed", "11", *FAST]) == 0
    assert main(["train", "--out", str(b), "--seed", "11", *FAST]) == 0
    rows = read_csv(a / "metrics.csv")
    assert sum(r["device"] == "server" for r in rows) == 3
    assert sum(r["device"] != "server" for r in rows) == 12
    assert len(read_csv(a / "events.csv")) == 12
    for name in ("metrics.csv", "events.csv", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert b"\r\n" not in (a / "metrics.csv").read_bytes()


def test_server_mode_event_count(tmp_path):
    assert main(["train", "--out", str(tmp_path), "--mode", "server", *FAST]) == 0
    assert len(read_csv(tmp_path / "events.csv")) == 24


def test_manifest_round_trip(tmp_path):
    first, second = tmp_path / "first", tmp_path / "second"
    assert main(["train", "--out", str(first), "--seed", "5", *FAST]) == 0
    manifest = json.loads((first / "manifest.json").read_text())
    assert manifest["seed"] == 5 and manifest["config"]["n_sats"] == 4
    assert main(["train", "--config", str(first / "manifest.json"), "--out", str(second)]) == 0
    for name in ("metrics.csv", "events.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_flags_override_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_sats": 3, "rounds": 2, "qubits": 2, "ansatz_reps": 1, "max_fun": 5, "n_per_class": 10}))
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path), "--rounds", "1"]) == 0
    assert len(read_csv(tmp_path / "events.csv")) == 3
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path)]) == 4


def test_statlog_missing_files(tmp_path, capsys):
    argv = ["train", "--dataset", "statlog", "--statlog_train", str(tmp_path / "sat.trn"), "--out", str(tmp_path)]
    assert main(argv) == 3
    assert "synthetic" in capsys.readouterr().err


def test_compare(tmp_path, capsys):
    assert main(["compare", "--out", str(tmp_path), *FAST]) == 0
    rows = read_csv(tmp_path / "compare_metrics.csv")
    assert {r["mode"] for r in rows} == {"orb", "server"}
    for mode in ("orb", "server"):
        assert sum(r["mode"] == mode and r["device"] == "server" for r in rows) == 3
    digests = [line.split()[-1] for line in capsys.readouterr().err.splitlines() if "shard digest" in line]
    assert len(digests) == 2 and digests[0] == digests[1]


def bound_constants(**kw):
    from orbqfl.protocol import BOUND_KEYS

    values = {k: 0 for k in BOUND_KEYS}
    values["delta_schedule"] = []
    values.update(kw)
    return values


def test_bound_rows(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(bound_constants(R=10)))
    assert main(["bound", "--constants", str(path), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "bound.csv")
    assert len(rows) == 10 and all(float(r["bound_value"]) == 0.0 for r in rows)


def test_bound_errors(tmp_path, capsys):
    path = tmp_path / "c.json"
    values = bound_constants(R=2)
    del values["sigma_q"]
    path.write_text(json.dumps(values))
    assert main(["bound", "--constants", str(path), "--out", str(tmp_path)]) == 4
    assert "sigma_q" in capsys.readouterr().err
    path.write_text(json.dumps(bound_constants(R=2, L=-1)))
    assert main(["bound", "--constants", str(path), "--out", str(tmp_path)]) == 4
