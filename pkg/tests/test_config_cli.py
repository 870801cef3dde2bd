import json
import math
import os

import pytest

from singflow.cli import main
from singflow.config import load_config
from singflow.errors import ConfigError


def tiny_config(tmp_path, **overrides):
    doc = {
        "version": 1,
        "field": {"kind": "linear_saddle", "integ_tol": 1e-10},
        "box": {"lo": [-0.25, -0.25], "hi": [0.25, 0.25]},
        "singularities": [{"seed": [0.05, -0.05], "r": math.exp(-2),
                           "beta1": 0.2, "n_max": 11}],
        "partition": {"L": 7.5, "beta": 0.02, "samples_per_layer": 48,
                      "regular_cover": "none"},
        "measure": {"orbit_count": 3, "horizon": 25, "burn_in": 2},
        "rng_seed": 11,
    }
    doc.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return str(path)


def test_missing_rng_seed(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"version": 1,
                                "field": {"kind": "lorenz"},
                                "box": {"lo": [0, 0, 0], "hi": [1, 1, 1]}}))
    with pytest.raises(ConfigError, match="rng_seed"):
        load_config(str(path))


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"version": 1, "rng_seed": 1,
                                "field": {"kind": "lorenz", "bogus": 2},
                                "box": {"lo": [0, 0, 0], "hi": [1, 1, 1]}}))
    with pytest.raises(ConfigError, match="bogus"):
        load_config(str(path))


def test_bad_version(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"version": 99, "rng_seed": 1,
                                "field": {"kind": "lorenz"},
                                "box": {"lo": [0, 0, 0], "hi": [1, 1, 1]}}))
    with pytest.raises(ConfigError, match="version"):
        load_config(str(path))


def test_list_fields(capsys):
    assert main(["list-fields"]) == 0
    out = capsys.readouterr().out
    assert "lorenz" in out and "linear_saddle" in out


def test_build_deterministic(tmp_path):
    cfg = tiny_config(tmp_path)
    out1 = tmp_path / "o1"
    out2 = tmp_path / "o2"
    assert main(["build", "--config", cfg, "--out", str(out1)]) == 0
    assert main(["build", "--config", cfg, "--out", str(out2)]) == 0
    for name in ("profile_0.json", "partition.json", "layers.csv"):
        a = (out1 / name).read_bytes()
        b = (out2 / name).read_bytes()
        assert a == b, f"{name} not byte-identical"
    meta = json.loads((out1 / "partition.json").read_text())
    assert meta["singularities"][0]["K0"] == 0.5
    assert meta["singularities"][0]["K1"] == 2.0


def test_verify_mane_and_shadowed(tmp_path):
    cfg = tiny_config(tmp_path)
    out = tmp_path / "v"
    assert main(["verify", "--config", cfg, "--suite", "mane",
                 "--out", str(out)]) == 0
    assert main(["verify", "--config", cfg, "--suite", "shadowed",
                 "--out", str(out)]) == 0
    rep = json.loads((out / "verify_mane.json").read_text())
    assert rep["pass"] and rep["violations"] == 0


def test_verify_unknown_suite(tmp_path):
    cfg = tiny_config(tmp_path)
    assert main(["verify", "--config", cfg, "--suite", "nope"]) == 2


def test_verify_exit_times_suite(tmp_path):
    cfg = tiny_config(tmp_path)
    out = tmp_path / "vx"
    assert main(["verify", "--config", cfg, "--suite", "exit-times",
                 "--out", str(out)]) == 0
    rep = json.loads((out / "verify_exit-times.json").read_text())
    assert rep["ratio_violations"] == 0
    assert rep["closed_form_checked"]


def test_entropy_command(tmp_path):
    cfg = tiny_config(tmp_path)
    out = tmp_path / "e"
    rc = main(["entropy", "--config", cfg, "--out", str(out)])
    assert rc == 0
    rep = json.loads((out / "entropy_report.json").read_text())
    assert rep["pass"]
    assert os.path.exists(out / "series.csv")
