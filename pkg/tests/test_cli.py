import csv
import json
import math
import subprocess
import sys

import pytest

from smallball import __version__
from smallball.cli import COMMANDS, main


@pytest.fixture
def files(tmp_path):
    def write(name, obj):
        p = tmp_path / name
        p.write_text(json.dumps(obj))
        return str(p)

    write.dir = tmp_path
    return write


def read_csv(path):
    lines = open(path).read().splitlines()
    meta = [l for l in lines if l.startswith("#")]
    rows = list(csv.DictReader(l for l in lines if not l.startswith("#")))
    return meta, rows


def test_estimate_monotone(files, capsys):
    spec = files("p2.json", {"family": "polynomial", "beta": 2.0})
    cfg = files("c.json", {"epsilon": [0.1, 0.01, 0.001, 0.0001]})
    out = str(files.dir / "est.csv")
    assert main(["estimate", "--spectrum", spec, "--config", cfg, "--out", out]) == 0
    meta, rows = read_csv(out)
    assert any(__version__ in m for m in meta)
    assert any('"epsilon": [0.1, 0.01, 0.001, 0.0001]' in m and '"beta": 2.0' in m for m in meta)
    logs = [float(r["log_value"]) for r in rows]
    assert len(logs) == 4 and all(b > a for a, b in zip(logs, logs[1:]))
    assert rows[0]["epsilon"] == "1.0000000000000000e-04"
    assert "estimate: 4 rows" in capsys.readouterr().out


def test_oracle_byte_identical(files):
    spec = files("p2.json", {"family": "polynomial", "beta": 2.0})
    cfg = files("o.json", {"epsilon": [0.3, 0.5], "method": "mc-tilted", "N": 500, "samples": 4000})
    outs = []
    for k, threads in enumerate((1, 1, 3)):
        out = str(files.dir / f"o{k}.csv")
        assert main(["oracle", "--spectrum", spec, "--config", cfg, "--seed", "17", "--threads", str(threads), "--out", out]) == 0
        outs.append(open(out, "rb").read())
    assert outs[0] == outs[1] == outs[2]


def test_oracle_needs_seed(files):
    spec = files("p2.json", {"family": "polynomial", "beta": 2.0})
    cfg = files("o.json", {"epsilon": [0.3], "method": "mc-plain", "N": 100, "samples": 100})
    assert main(["oracle", "--spectrum", spec, "--config", cfg]) == 2


def test_oracle_cf_json(files, capsys):
    spec = files("p2.json", {"family": "polynomial", "beta": 2.0})
    cfg = files("o.json", {"epsilon": [0.5], "method": "cf-inversion", "N": 1000})
    assert main(["oracle", "--spectrum", spec, "--config", cfg, "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["tool"] == "smallball" and doc["version"] == __version__
    rec = doc["records"][0]
    assert rec["method"] == "cf-inversion" and rec["std_error"] == 0.0
    assert rec["bracket_lo"] <= rec["estimate"] <= rec["bracket_hi"]


def test_gamma_check_missing_rho(files, capsys):
    cfg = files("g.json", {"spectrum": {"family": "polynomial", "beta": 2.0}, "F": {"source": "dmz"}, "s": [1e-2], "x": [1.0]})
    assert main(["gamma-check", "--config", cfg]) == 2
    assert "rho" in capsys.readouterr().err


def test_gamma_check_runs(files, capsys):
    cfg = files(
        "g.json",
        {"F": {"source": "exp-inverse-power", "k": 1}, "rho": {"source": "power", "exponent": 2}, "s": [1e-2, 1e-3, 1e-4], "x": [-1, 1, 2]},
    )
    assert main(["gamma-check", "--config", cfg, "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["summary"]["verdict"] == "pass"
    assert len(doc["records"]) == 9


def test_compute_error_exit_3(files, capsys):
    spec = files("p2.json", {"family": "polynomial", "beta": 2.0})
    cfg = files("c.json", {"epsilon": [2.0]})
    assert main(["invert", "--spectrum", spec, "--config", cfg]) == 3
    assert "OutOfRange" in capsys.readouterr().err


def test_bad_spectrum_exit_2(files):
    spec = files("bad.json", {"family": "polynomial", "beta": 0.5})
    cfg = files("c.json", {"theta": [1.0]})
    assert main(["mu", "--spectrum", spec, "--config", cfg]) == 2


def test_bad_json_exit_2(files):
    p = files.dir / "broken.json"
    p.write_text("{not json")
    assert main(["mu", "--config", str(p)]) == 2


def test_empty_grid_exit_2(files):
    spec = files("p2.json", {"family": "polynomial", "beta": 2.0})
    cfg = files("c.json", {"theta": []})
    assert main(["mu", "--spectrum", spec, "--config", cfg]) == 2


@pytest.mark.parametrize(
    "command,cfg",
    [
        ("mu", {"theta": [0.0, 0.5]}),
        ("psi", {"theta": [0.5]}),
        ("I", {"theta": [0.5]}),
        ("invert", {"epsilon": [0.1]}),
        ("rho", {"s": [1e-3, 1e-2]}),
        ("self-neglect", {"rho": {"source": "spectrum"}, "s": [1e-3, 1e-4], "x": [-1, 1]}),
        ("aux-estimate", {"F": {"source": "exp-inverse-power"}, "s": [1e-2]}),
        ("reconstruct", {"rho": {"source": "power", "exponent": 2}, "i_max": 50}),
        ("repr2", {"phi": {"source": "power", "exponent": 2}, "rho": {"source": "power", "exponent": 2}, "x0": 0.5}),
        ("kernel", {"F": {"source": "power", "exponent": 2}, "kernel": {"family": "uniform"}, "h": [0.1]}),
    ],
)
def test_every_command(files, command, cfg, capsys):
    cfg = dict(cfg, spectrum={"family": "polynomial", "beta": 2.0})
    assert main([command, "--config", files("c.json", cfg)]) == 0
    text = capsys.readouterr().out
    assert text.startswith("# tool: smallball")


def test_mu_value(files, capsys):
    cfg = files("c.json", {"spectrum": {"family": "polynomial", "beta": 2.0}, "theta": [0.5]})
    main(["mu", "--config", cfg, "--format", "json"])
    rec = json.loads(capsys.readouterr().out)["records"][0]
    assert rec["value"] == pytest.approx(1.0766740474685811, rel=1e-12)


def test_command_list():
    assert set(COMMANDS) >= {"mu", "psi", "I", "invert", "rho", "estimate", "oracle", "gamma-check", "self-neglect", "aux-estimate", "reconstruct", "repr2", "kernel"}


def test_entry_point_module(files):
    cfg = files("c.json", {"spectrum": {"family": "polynomial", "beta": 2.0}, "theta": [1.0]})
    r = subprocess.run([sys.executable, "-m", "smallball.cli", "mu", "--config", cfg], capture_output=True, text=True)
    assert r.returncode == 0
    assert "theta,value,tail_error,terms_used" in r.stdout
