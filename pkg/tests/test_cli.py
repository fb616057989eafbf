import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from weylwalk.cli import main

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(p)


def test_validate_shipped_configs(capsys):
    for cfg in sorted((CONFIGS / "experiments").glob("*.json")):
        assert main(["validate", "--config", str(cfg)]) == 0, cfg.name
    assert "ok:" in capsys.readouterr().out


def test_negative_field_is_named(tmp_path, capsys):
    cfg = write(tmp_path, {"experiment": "dichotomy", "measure": str(CONFIGS / "measures/reference.json"),
                           "group": str(CONFIGS / "groups/trivial.json"), "params": {"n_traj": -4}})
    assert main(["validate", "--config", cfg]) == 2
    assert "params.n_traj" in capsys.readouterr().err


def test_weight_sum_reported(tmp_path, capsys):
    measure = {"dim": 2, "atoms": [{"matrix": [[2, 0], [0, 0.5]], "weight": 0.5},
                                   {"matrix": [[1.25, 0.75], [0.75, 1.25]], "weight": 0.4}]}
    cfg = write(tmp_path, {"experiment": "hitting", "measure": measure})
    assert main(["hitting", "--config", cfg]) == 2
    err = capsys.readouterr().err
    assert "measure" in err and "0.9" in err


def test_unknown_key(tmp_path, capsys):
    cfg = write(tmp_path, {"experiment": "cartan-selftest", "sead": 3})
    assert main(["run", "--config", cfg]) == 2
    assert "sead" in capsys.readouterr().err


def test_malformed_json_location(tmp_path, capsys):
    cfg = write(tmp_path, '{"experiment": "cartan-selftest",\n "seed": }')
    assert main(["validate", "--config", cfg]) == 2
    assert "cfg.json:2:" in capsys.readouterr().err


def test_kind_mismatch(tmp_path, capsys):
    cfg = write(tmp_path, {"experiment": "cartan-selftest"})
    assert main(["hitting", "--config", cfg]) == 2
    assert "not 'hitting'" in capsys.readouterr().err


def test_bad_seed(tmp_path, capsys):
    assert main(["cartan-selftest", "--seed", str(2 ** 64), "--out", str(tmp_path)]) == 2


def test_selftest_defaults(tmp_path):
    out = tmp_path / "st"
    assert main(["cartan-selftest", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["passed"] is True
    assert manifest["backend"] in ("cython", "python")
    for key in ("config", "seed", "jobs", "version", "wall_time_s", "outputs", "metrics"):
        assert key in manifest
    assert (out / "selftest.csv").exists()
    assert "result: pass" in (out / "summary.txt").read_text()


def test_failed_assertion_exit_code(tmp_path):
    cfg = write(tmp_path, {"experiment": "volume-check", "params": {"n_samples": 1000},
                           "assertions": [{"metric": "sigma_at_zero", "op": ">", "value": 1.0}]})
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "FAIL" in (tmp_path / "o" / "summary.txt").read_text()


def test_env_out_dir(tmp_path):
    env = dict(os.environ, WEYLWALK_OUT=str(tmp_path / "env"))
    r = subprocess.run([sys.executable, "-m", "weylwalk.cli", "cartan-selftest", "--jobs", "1"],
                       env=env, cwd=tmp_path, capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "env" / "cartan-selftest" / "manifest.json").exists()


@pytest.mark.parametrize("config", ["experiments/hitting.json", "experiments/poincare_cyclic.json"])
def test_outputs_reproducible(tmp_path, config):
    cfg = str(CONFIGS / config)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", cfg, "--out", str(a), "--jobs", "1"]) == 0
    assert main(["run", "--config", cfg, "--out", str(b), "--jobs", "2"]) == 0
    csvs = sorted(p.name for p in a.glob("*.csv"))
    assert csvs
    for name in csvs:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_seed_override_changes_results(tmp_path):
    cfg = str(CONFIGS / "experiments/escape.json")
    main(["run", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "1"])
    main(["run", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "2"])
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert ma["seed"] == 1 and mb["seed"] == 2
    csvs = [p.name for p in (tmp_path / "a").glob("*.csv")]
    assert any((tmp_path / "a" / n).read_bytes() != (tmp_path / "b" / n).read_bytes() for n in csvs)


def test_dichotomy_report(tmp_path):
    out = tmp_path / "d"
    assert main(["dichotomy", "--config", str(CONFIGS / "experiments/dichotomy_trivial.json"),
                 "--out", str(out)]) == 0
    rep = json.loads((out / "dichotomy.json").read_text())
    assert set(rep) >= {"lambda", "mu_hash", "verdict", "evidence"}
    assert rep["verdict"] == "both_transient_signature"
