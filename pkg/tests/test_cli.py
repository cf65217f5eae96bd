import csv
import io
import os
import subprocess
import sys

import pytest

from lpnagg import cli

FAST_OPT = ["--set", "protocol.levels=16", "--set", "optimize.prime_limit=200", "--set", "optimize.per_decade=10"]
FAST_SIM = [
    "--set", "protocol.N=3", "--set", "protocol.z=1", "--set", "protocol.M=3",
    "--set", "protocol.k_C=8", "--set", "kahe.k=16", "--set", "protocol.moduli=11,13",
]


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.main(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def test_read_config_text():
    text = "# header\nprotocol.N = 4  # users\n\nkahe.p=0.01\n"
    assert cli.read_config_text(text) == {"protocol.N": "4", "kahe.p": "0.01"}
    with pytest.raises(cli.ConfigError):
        cli.read_config_text("novalue\n")
    with pytest.raises(cli.ConfigError):
        cli.read_config_text(" = 3\n")


def test_resolve_types_and_overrides():
    cfg = cli.resolve("simulate", {"protocol.N": "4"}, ["protocol.moduli=7, 11", "protocol.collude=yes"])
    assert cfg["protocol.N"] == 4 and cfg["protocol.moduli"] == [7, 11] and cfg["protocol.collude"] is True
    assert cfg["code.r"] == []
    with pytest.raises(cli.ConfigError):
        cli.resolve("simulate", {"protocol.bogus": "1"}, [])
    with pytest.raises(cli.ConfigError):
        cli.resolve("simulate", {}, ["protocol.N=four"])
    with pytest.raises(cli.ConfigError):
        cli.resolve("simulate", {}, ["protocol.N"])


def test_optimize_csv_deterministic():
    code, a, _ = run("optimize", *FAST_OPT)
    assert code == 0
    _, b, _ = run("optimize", *FAST_OPT)
    assert a == b
    rows = list(csv.DictReader(io.StringIO(a)))
    assert list(rows[0]) == cli.OPTIMIZE_COLUMNS
    assert rows[0]["row"] == "plan" and rows[0]["mode"] == "reduction"
    kinds = {r["row"] for r in rows}
    assert kinds == {"plan", "modulus", "sweep"}
    mods = [r for r in rows if r["row"] == "modulus"]
    assert abs(sum(float(r["cost_bits"]) for r in mods) - float(rows[0]["cost_bits"])) < 1e-6


def test_optimize_mode_flag():
    code, text, _ = run("optimize", *FAST_OPT, "--mode", "solver")
    assert code == 0 and ",solver\n" in text


def test_exit_codes():
    assert run("optimize", "--set", "protocol.bogus=1")[0] == 2
    assert run("optimize", "--set", "security.mode=quantum")[0] == 2
    assert run("optimize", "--config", "/nonexistent/cfg.conf")[0] == 2
    assert run("nosuchcommand")[0] == 2
    assert run("selftest", "--seed", "-1")[0] == 2
    code, _, err = run("optimize", *FAST_OPT, "--set", "protocol.levels=1000000000", "--set", "optimize.prime_limit=20")
    assert code == 3 and "infeasible" in err
    assert run("simulate", *FAST_SIM, "--set", "protocol.levels=100")[0] == 2  # 143 <= 3 * 99


def test_config_file_and_atomic_out(tmp_path):
    conf = tmp_path / "opt.conf"
    conf.write_text("protocol.levels = 16\noptimize.prime_limit = 200\noptimize.per_decade = 10\n")
    dest = tmp_path / "plan.csv"
    code, stdout, _ = run("optimize", "--config", str(conf), "--out", str(dest))
    assert code == 0 and stdout == ""
    assert dest.read_text() == run("optimize", *FAST_OPT)[1]
    assert not [p for p in os.listdir(tmp_path) if p.endswith(".part")]


def test_write_atomic_cleans_up(tmp_path, monkeypatch):
    target = tmp_path / "keep.txt"
    target.write_text("old")

    def boom(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(cli.os, "replace", boom)
    with pytest.raises(OSError):
        cli.write_atomic(str(target), "new")
    assert target.read_text() == "old"
    assert os.listdir(tmp_path) == ["keep.txt"]


def test_simulate(tmp_path):
    dest = tmp_path / "t.csv"
    code, text, _ = run("simulate", *FAST_SIM, "--set", "simulate.sessions=3", "--set", "kahe.p=0", "--out", str(dest))
    assert code == 0
    assert text.startswith("sessions 3 success 3 rate 1.0000")
    assert "uplink_payload_over_formula" in text and "decryptor_path_bytes" in text
    rows = list(csv.reader(dest.open()))
    assert rows[0] == ["session", "party", "msg_type", "bytes", "round"]
    assert {r[0] for r in rows[1:]} == {"0", "1", "2"}
    again = tmp_path / "u.csv"
    run("simulate", *FAST_SIM, "--set", "simulate.sessions=3", "--set", "kahe.p=0", "--out", str(again))
    assert dest.read_bytes() == again.read_bytes()


def test_simulate_rounds_keep_decryptor_bytes():
    code, text, _ = run("simulate", *FAST_SIM, "--set", "protocol.rounds=3", "--set", "simulate.sessions=2", "--set", "kahe.p=0")
    assert code == 0
    line = [l for l in text.splitlines() if l.startswith("decryptor_path_bytes")][0]
    assert "," not in line.split()[1]


def test_fer_repetition_and_polar():
    code, text, _ = run("fer", "--set", "code.rho=3", "--set", "code.k=8", "--set", "code.r=3", "--set", "fer.P=0,0.3", "--set", "fer.trials=200")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(text)))
    assert [float(r["fer"]) for r in rows][0] == 0.0
    assert float(rows[1]["fer"]) <= float(rows[1]["union_bound"]) + 0.1
    code, text, _ = run(
        "fer", "--set", "code.family=polar", "--set", "code.n=64", "--set", "code.k=32",
        "--set", "code.mc_trials=200", "--set", "fer.P=0", "--set", "fer.trials=50",
    )
    assert code == 0 and ",0.0," in text
    assert run("fer", "--set", "code.family=ldpc")[0] == 2


def test_selftest_passes(tmp_path):
    dest = tmp_path / "self.csv"
    code, text, _ = run("selftest", "--out", str(dest))
    assert code == 0 and "FAIL" not in text
    assert dest.read_text().startswith("test,statistic,threshold,result\n")


@pytest.mark.slow
def test_attack_check_report():
    code, text, _ = run("attack-check", "--set", "attack.samples=20000")
    lines = text.strip().splitlines()
    assert lines[0].split()[:3] == ["test", "statistic", "threshold"]
    assert len(lines) == 17
    names = {l.split()[0] for l in lines[1:]}
    assert {"cover_joint_exact", "attack_rate_z4", "hybrid_l3_uniform"} <= names
    assert code in (0, 4)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "lpnagg", "selftest"], capture_output=True, text=True)
    assert proc.returncode == 0 and "PASS" in proc.stdout
