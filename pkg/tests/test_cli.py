import hashlib
import json
import subprocess
import sys
from pathlib import Path

import pytest

from decoupling_lab.cli import ConfigError, main, parse_config


def test_minimal_config_defaults():
    cfg = parse_config("command=verify")
    assert (cfg.n, cfg.p, cfg.E, cfg.M, cfg.padding, cfg.spacing) == (2, 4.0, 8.0, 8, 4.0, 0.5)
    assert cfg.seed is None


def test_delta_exponents():
    cfg = parse_config("command=sweep\nseed=3\ndelta_exponents=1,2,3  # three scales\n")
    assert cfg.delta_exponents == [1, 2, 3]
    assert [4.0 ** -k for k in cfg.delta_exponents] == [0.25, 0.0625, 0.015625]


def test_low_p_rejected():
    with pytest.raises(ConfigError) as err:
        parse_config("command=verify\np=1.5")
    assert "p must be ≥ 2" in err.value.errors


def test_all_violations_reported_together():
    with pytest.raises(ConfigError) as err:
        parse_config("command=sweep\nbogus=1\ndelta=3/10\np=1\n")
    msgs = " | ".join(err.value.errors)
    for part in ("unknown key 'bogus'", "non-dyadic", "seed is required", "p must be ≥ 2"):
        assert part in msgs
    assert len(err.value.errors) == 4


def test_overrides_win():
    cfg = parse_config("command=sweep\nseed=1\ntrials=9", {"trials": "2"})
    assert cfg.trials == 2


def _manifest_ok(out: Path):
    man = json.loads((out / "manifest.json").read_text())
    for name, digest in man["checksums"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
    return man


def test_verify_command(tmp_path, capsys):
    assert main(["verify", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out
    man = _manifest_ok(tmp_path)
    assert man["config"]["n"] == 2 and "verify.json" in man["checksums"]


def test_sweep_is_deterministic_across_workers(tmp_path):
    args = ["sweep", "--seed", "4", "delta_exponents=1,2,3", "trials=6"]
    assert main(args + ["--out", str(tmp_path / "a"), "--workers", "1"]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--workers", "3"]) == 0
    a, b = (tmp_path / "a" / "sweep.csv").read_bytes(), (tmp_path / "b" / "sweep.csv").read_bytes()
    assert a == b
    ma, mb = _manifest_ok(tmp_path / "a"), _manifest_ok(tmp_path / "b")
    assert ma["checksums"] == mb["checksums"]
    assert main(["fit", "--out", str(tmp_path / "f"), f"input={tmp_path / 'a' / 'sweep.csv'}"]) == 0
    fit = json.loads((tmp_path / "f" / "fit.json").read_text())
    assert fit["schema_version"] == 1 and len(fit["rows"]) == 3


def test_two_scale_sweep_is_insufficient(tmp_path):
    assert main(["sweep", "--seed", "1", "--out", str(tmp_path), "delta_exponents=1,2", "trials=2"]) == 2
    assert (tmp_path / "sweep.csv").exists()


def test_kakeya_violation_exit_code(tmp_path, capsys):
    code = main(["kakeya", "--seed", "1", "--out", str(tmp_path), "R=16", "tiles=0,0:1,0|0,0:1,0.01"])
    assert code == 2
    assert "((0, 0), (1, 0))" in capsys.readouterr().err


def test_kakeya_layout(tmp_path):
    assert main(["kakeya", "--seed", "1", "--out", str(tmp_path), "layout=perpendicular", "R=64"]) == 0
    header, row = (tmp_path / "kakeya.csv").read_text().splitlines()
    assert header.startswith("schema_version") and float(row.split(",")[-2]) == 16.0


def test_degenerate_exit_code(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("schema_version,n,p,E,delta_exponent,trials,seed,best_ratio,argmax_kind\n"
                   "1,2,4,8,1,1,1,1.0,constant\n1,2,4,8,2,1,1,0.0,constant\n1,2,4,8,3,1,1,1.0,constant\n")
    assert main(["fit", "--out", str(tmp_path / "o"), f"input={bad}"]) == 3


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["verify", "--out", str(blocker / "sub")]) == 4


def test_config_file_and_validation_exit(tmp_path, capsys):
    conf = tmp_path / "run.conf"
    conf.write_text("command=ratio\nseed=2\ndelta_exponents=1\n")
    assert main(["--config", str(conf), "--out", str(tmp_path / "o")]) == 0
    rows = json.loads((tmp_path / "o" / "ratio.json").read_text())["rows"]
    assert rows[0]["delta_exponent"] == 1 and rows[0]["ratio"] > 0
    assert main(["--config", str(conf), "p=1.5"]) == 2
    assert "p must be ≥ 2" in capsys.readouterr().err


def test_extend_and_multiscale(tmp_path):
    assert main(["extend", "--seed", "1", "--out", str(tmp_path / "e"), "kind=constant", "points=0,0;0.5,0"]) == 0
    first = (tmp_path / "e" / "extend.csv").read_text().splitlines()[1].split(",")
    assert float(first[-1]) == pytest.approx(1.0)
    assert main(["multiscale", "--seed", "1", "--out", str(tmp_path / "m"), "p=6", "draws=2", "padding=2"]) == 0
    led = json.loads((tmp_path / "m" / "ledger.json").read_text())
    assert len(led["draws"]) == 2 and led["max_implied_constant"] > 0


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "decoupling_lab", "verify", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "bootstrap" in proc.stdout
