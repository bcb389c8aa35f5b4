import csv
import json
import subprocess
import sys

from stablemix import cli


def _cfg(tmp_path, name="c.json", **kw):
    path = tmp_path / name
    path.write_text(json.dumps({"schema": "stablemix/1", **kw}))
    return str(path)


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(args, env=None):
    return cli.run(args, env={} if env is None else env)


def test_gross_lattice_csv(tmp_path):
    out = tmp_path / "o"
    code = run(["gross", "--config", _cfg(tmp_path, action="lattice-translation-null", n=[2, 4, 8, 32]),
                "--out", str(out)])
    assert code == 0
    rows = _read_csv(out / "gross.csv")
    assert [r["exact_p_over_q"] for r in rows] == ["1/5", "1/9", "1/17", "1/65"]
    assert all(r["verdict"] == "decays" for r in rows)
    assert (out / "gross.svg").read_text().startswith("<svg")
    meta = json.loads((out / "gross.json").read_text())
    assert meta["config_hash"] and meta["versions"]["stablemix"]
    assert b"\r\n" not in (out / "gross.csv").read_bytes()


def test_unknown_key_rejected(tmp_path, capsys):
    assert run(["gross", "--config", _cfg(tmp_path, action="lattice-translation-null", colour=1)]) == 1
    assert "unknown config keys" in capsys.readouterr().err


def test_bad_schema_and_usage(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"schema": "other/2", "action": "lattice-translation-null"}))
    assert run(["gross", "--config", str(path)]) == 1
    assert run(["frobnicate"]) == 1
    assert run(["gross", "--config", str(tmp_path / "missing.json")]) == 1
    assert run(["gross", "--config", _cfg(tmp_path, action="no-such-action"), "--out", str(tmp_path / "o")]) == 1


def test_group_must_match_action(tmp_path):
    cfg = _cfg(tmp_path, action="lattice-translation-null", group={"kind": "free", "k": 2})
    assert run(["gross", "--config", cfg, "--out", str(tmp_path / "o")]) == 1


def test_stochastic_needs_seed(tmp_path, capsys):
    cfg = _cfg(tmp_path, action="boundary-free-2", alpha="3/2", replicates=1000)
    assert run(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "needs a seed" in capsys.readouterr().err
    assert run(["walk", "--config", cfg, "--out", str(tmp_path / "o"), "--seed", str(2 ** 64)]) == 1


def test_cap_exceeded_names_cap(tmp_path, capsys):
    cfg = _cfg(tmp_path, action="boundary-free-2", m=[2, 12])
    assert run(["cond-suff", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "ball_radius" in capsys.readouterr().err
    cfg = _cfg(tmp_path, "d.json", radius_max=14)
    assert run(["boundary-decay", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "sphere_radius" in capsys.readouterr().err


def test_env_override_and_flag_precedence(tmp_path):
    cfg = _cfg(tmp_path, action="lattice-translation-null", n=[1, 2], out=str(tmp_path / "cfg_out"))
    env = {"STF_N": "[4]", "STF_OUT": str(tmp_path / "env_out")}
    assert run(["gross", "--config", cfg], env) == 0
    rows = _read_csv(tmp_path / "env_out" / "gross.csv")
    assert [r["n"] for r in rows] == ["4"]
    assert run(["gross", "--config", cfg, "--out", str(tmp_path / "flag_out")], env) == 0
    assert (tmp_path / "flag_out" / "gross.csv").exists()
    assert run(["gross", "--config", cfg], {"STF_NOPE": "1"}) == 1


def test_simulate_deterministic_across_workers(tmp_path):
    cfg = _cfg(tmp_path, action="boundary-free-2", alpha="3/2", replicates=600, series_terms=300,
               index=["e", "a"])
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["simulate", "--config", cfg, "--seed", "7", "--out", str(a), "--workers", "1"]) == 0
    assert run(["simulate", "--config", cfg, "--seed", "7", "--out", str(b), "--workers", "3"]) == 0
    for name in ("simulate.csv", "simulate_char.csv", "simulate.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_strict_inconclusive_exit_code(tmp_path):
    cfg = _cfg(tmp_path, action="lattice-translation-null", alpha="3/2", replicates=2000, series_terms=300,
               n=[1, 2], exclude_identity=True)
    out = str(tmp_path / "o")
    assert run(["fmix", "--config", cfg, "--seed", "3", "--out", out]) == 0
    assert run(["fmix", "--config", cfg, "--seed", "3", "--out", out, "--strict"]) == 3


def test_truncation_and_bms(tmp_path):
    out = str(tmp_path / "o")
    cfg = _cfg(tmp_path, action="boundary-free-2", alpha="3/2", L=["1/2", "3"], depth=2)
    assert run(["truncation", "--config", cfg, "--out", out]) == 0
    assert json.loads((tmp_path / "o" / "truncation.json").read_text())["ok"]
    assert run(["bms", "--config", cfg, "--out", out]) == 0
    assert run(["truncation", "--config", _cfg(tmp_path, "l.json", action="lattice-translation-null"),
                "--out", out]) == 1


def test_audit_violation_exit_code(tmp_path, monkeypatch):
    def broken(action, pairs, depth=4):
        return {"ok": False, "violations": [{"rule": "rn", "cell": "a"}], "cells_checked": 1}

    monkeypatch.setattr(cli, "cocycle_audit", broken)
    cfg = _cfg(tmp_path, actions=["finite-permutation-positive"])
    assert run(["audit", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    res = json.loads((tmp_path / "o" / "audit.json").read_text())
    assert res["results"]["finite-permutation-positive"]["cocycle_violations"][0]["cell"] == "a"


def test_report_empty_and_corrupt(tmp_path, capsys):
    out = tmp_path / "o"
    out.mkdir()
    assert run(["report", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["artifacts"] == [] and summary["per_action"] == {}
    (out / "broken.json").write_text("{not json")
    assert run(["report", "--out", str(out)]) == 1
    assert "broken.json" in capsys.readouterr().err


def test_report_aggregates(tmp_path):
    out = str(tmp_path / "o")
    assert run(["gross", "--config", _cfg(tmp_path, action="lattice-translation-null"), "--out", out]) == 0
    assert run(["mpns", "--config", _cfg(tmp_path, "f.json", action="finite-permutation-positive"),
                "--out", out]) == 0
    assert run(["report", "--out", out]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["per_action"]["lattice-translation-null"]["gross"] == "decays"
    assert summary["per_action"]["finite-permutation-positive"]["mpns"] == "stalls"
    (tmp_path / "o" / "gross.csv").write_text("n,value\n1,2,3\n")
    assert run(["report", "--out", out]) == 1


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "stablemix.cli", "boundary-decay", "--out", str(tmp_path),
                           "--config", _cfg(tmp_path, radius_max=6)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    rows = _read_csv(tmp_path / "boundary_decay.csv")
    assert rows[4]["exact_p_over_q"] == "1/18"
