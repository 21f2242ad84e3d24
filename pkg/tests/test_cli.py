import json
import os
import shlex
import subprocess
import sys
import textwrap
from pathlib import Path

import pytest

from normsol.cli import ConfigError, load_config, parse_terms

ROOT = Path(__file__).resolve().parents[1]

SYSTEM = """
[physics]
a1 = 1
a2 = 1
mu1 = {mu1}
mu2 = {mu2}
beta = {beta}
[grid]
n_points = 4001
core_resolution = 0.02
"""


def write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return path


def normsol(*args, threads="2"):
    env = dict(os.environ, THREADS=threads)
    return subprocess.run([sys.executable, "-m", "normsol", *map(str, args)],
                          capture_output=True, text=True, env=env, timeout=900)


def reason(proc):
    """The single machine-parsable stderr line as a dict."""
    lines = [ln for ln in proc.stderr.splitlines() if ln.startswith("normsol: ")]
    assert lines, proc.stderr
    fields = dict(tok.split("=", 1) for tok in shlex.split(lines[0][len("normsol: "):]))
    return fields, lines


def test_parse_terms():
    assert parse_terms("1:4, 0.5:5") == [(1.0, 4.0), (0.5, 5.0)]
    with pytest.raises(ConfigError):
        parse_terms("1, 4")


def test_load_config(tmp_path):
    cfg = load_config(write(tmp_path, """
        [physics]
        a = 2
        terms = 1:3.5, 0.5:5
        nodes = 1
        [tolerances]
        res_tol = 1e-7
        """), "solve-scalar")
    assert cfg.physics["a"] == 2.0
    assert cfg.nonlinearity().terms == ((1.0, 3.5), (0.5, 5.0))
    assert cfg.tolerances["res_tol"] == 1e-7
    assert cfg.tolerances["mass_tol"] == 1e-8


@pytest.mark.parametrize("text, verb, needle", [
    ("[physics]\na1 = 1\nmu1 = 1\nmu2 = 1\nbeta = -1\n", "solve-system", "physics.a2"),
    ("[physics]\na = -1\n", "solve-scalar", "positive"),
    ("[physics]\na = 1\nterms = 1:7\n", "solve-scalar", "terms"),
    ("[physics]\na = x\n", "solve-scalar", "physics.a"),
    ("[run]\nmode = verify\n[physics]\na = 1\n", "solve-scalar", "does not match"),
    ("[physics]\na1 = 1\na2 = 1\nmu1 = 1\nmu2 = 1\nbeta_schedule = -1, -0.5\n",
     "continue-beta", "decreasing"),
])
def test_config_errors(tmp_path, text, verb, needle):
    with pytest.raises(ConfigError, match=needle):
        load_config(write(tmp_path, text), verb)


def test_exit_config(tmp_path):
    proc = normsol("solve-system", "--config", write(tmp_path, "[physics]\na1 = 1\n"))
    assert proc.returncode == 1
    fields, lines = reason(proc)
    assert len(lines) == 1
    assert fields["error"] == "config" and "physics.a2" in fields["reason"]
    assert normsol("solve-scalar", "--config", tmp_path / "absent.ini").returncode == 1
    assert normsol("bogus", "--config", tmp_path / "absent.ini").returncode == 1
    cfg = write(tmp_path, "[physics]\na = 1\n", "s.ini")
    assert normsol("verify", "--config", cfg).returncode == 1
    assert normsol("solve-scalar", "--config", cfg, "--resolution-sweep", "-1").returncode == 1


def test_exit_solver_failure(tmp_path):
    cfg = write(tmp_path, SYSTEM.format(mu1=1, mu2=1, beta=-10))
    proc = normsol("solve-system", "--config", cfg, "--out", tmp_path / "o")
    assert proc.returncode == 2
    fields, lines = reason(proc)
    assert len(lines) == 1
    assert fields["error"] == "solver" and fields["type"] == "LiouvilleSuspect"


def test_exit_certificate_failure(tmp_path):
    # the coarse core spacing leaves |G|/K near 3e-4
    cfg = write(tmp_path, SYSTEM.format(mu1=1, mu2=36, beta=-10))
    out = tmp_path / "o"
    proc = normsol("solve-system", "--config", cfg, "--out", out)
    assert proc.returncode == 3
    fields, lines = reason(proc)
    assert fields["error"] == "certificate" and fields["check"] == "pohozaev"
    assert all("check=pohozaev" in ln for ln in lines)
    doc = json.loads((out / "result.json").read_text())
    assert doc["certificates"]["solution"]["passed"] is False
    assert doc["summary"]["lambda1"] < 0 and doc["summary"]["lambda2"] < 0


def test_scalar_run_and_verify(tmp_path):
    cfg = write(tmp_path, """
        [run]
        seed = 11
        [physics]
        a = 1
        mu = 1
        """)
    out = tmp_path / "s"
    proc = normsol("solve-scalar", "--config", cfg, "--out", out, "--resolution-sweep", "1",
                   threads="3")
    assert proc.returncode == 0, proc.stderr
    assert proc.stderr == ""
    doc = json.loads((out / "result.json").read_text())
    assert doc["threads"] == 3 and doc["rng_seed"] == 11
    assert doc["config"]["physics"] == {"a": "1", "mu": "1"}
    assert doc["certificates"]["solution"]["passed"]
    sweep = doc["resolution_sweep"]
    assert 3.5 < sweep[1]["ratio"] < 4.5
    assert doc["files"] == ["fields.txt"]

    proc = normsol("verify", "--config", cfg, "--seed", out / "fields.txt", "--out", tmp_path / "v")
    assert proc.returncode == 0, proc.stderr
    doc = json.loads((tmp_path / "v" / "result.json").read_text())
    names = [c["name"] for c in doc["certificates"]["solution"]["checks"]]
    assert "gradient" in names and "gagliardo_nirenberg_1" in names


@pytest.mark.parametrize("name, verb", [
    ("scalar", "solve-scalar"), ("two_power", "solve-scalar"), ("system", "solve-system"),
    ("mountain_pass", "mountain-pass"), ("continue_beta", "continue-beta"),
])
def test_sample_configs_load(name, verb):
    cfg = load_config(ROOT / "demos" / "configs" / f"{name}.ini", verb)
    assert cfg.mode == verb
