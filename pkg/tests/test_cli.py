import json
import os

import numpy as np
import pytest

from contact_kam.cli import execute
from contact_kam.io import read_field_csv, read_keyvalues


@pytest.fixture
def ex63_config(tmp_path):
    doc = {
        "model": {"variant": "separable_quadratic", "alpha": 1.0,
                  "V": "-0.25", "lambda": "sin(x)"},
        "grid": {"n": 128},
        "numerics": {"tau": 0.0625, "tol": 1e-5, "t_max": 60.0},
        "phi": "0.2*sin(x)",
        "out": str(tmp_path / "out"),
    }
    path = tmp_path / "ex63.json"
    path.write_text(json.dumps(doc))
    return str(path), str(tmp_path / "out")


def test_parse_check_ok(ex63_config, capsys):
    path, _ = ex63_config
    assert execute(["parse-check", "--config", path]) == 0
    assert "ok" in capsys.readouterr().out


def test_parse_check_bad_expression(tmp_path):
    doc = {"model": {"variant": "separable_quadratic", "V": "sin(", "lambda": "0"}}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert execute(["parse-check", "--config", str(path)]) == 2


def test_bad_json_config(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert execute(["parse-check", "--config", str(path)]) == 2


def test_unknown_command_usage():
    assert execute(["no-such-command"]) == 1


def test_bad_direction(ex63_config):
    path, _ = ex63_config
    assert execute(["solve", "--config", path, "--direction", "sideways"]) == 1


def test_solve_writes_field_and_summary(ex63_config, capsys):
    path, out = ex63_config
    code = execute(["solve", "--config", path, "--phi", "1.0",
                    "--direction", "backward"])
    assert code == 0
    assert "Converged" in capsys.readouterr().out
    fld = read_field_csv(os.path.join(out, "u_minus.csv"))
    assert fld.values[fld.grid.index_of(np.pi / 2)] == pytest.approx(0.25, abs=5e-3)
    summary = read_keyvalues(os.path.join(out, "u_minus_summary.txt"))
    assert summary["status"] == "Converged"
    manifest = json.load(open(os.path.join(out, "manifest.json")))
    names = [e["file"] for e in manifest["outputs"]]
    assert "u_minus.csv" in names and "u_minus.svg" in names
    assert manifest["config_sha256"]


def test_solve_deterministic_outputs(ex63_config, tmp_path):
    path, out = ex63_config
    execute(["solve", "--config", path, "--phi", "1.0"])
    first = open(os.path.join(out, "u_minus.csv"), "rb").read()
    first_svg = open(os.path.join(out, "u_minus.svg"), "rb").read()
    out2 = str(tmp_path / "out2")
    execute(["solve", "--config", path, "--phi", "1.0", "--out", out2])
    assert open(os.path.join(out2, "u_minus.csv"), "rb").read() == first
    assert open(os.path.join(out2, "u_minus.svg"), "rb").read() == first_svg


def test_fixed_points_csv(ex63_config):
    path, out = ex63_config
    assert execute(["fixed-points", "--config", path]) == 0
    lines = open(os.path.join(out, "fixed_points.csv")).read().strip().splitlines()
    assert len(lines) == 3  # header + two points


def test_evolve_snapshots(ex63_config):
    path, out = ex63_config
    code = execute(["evolve", "--config", path, "--phi", "0.25", "--t", "0.5",
                    "--snapshot-every", "0.25"])
    assert code == 0
    files = sorted(os.listdir(out))
    assert sum(1 for f in files if f.startswith("evolve_backward")
               and f.endswith(".csv")) == 3


def test_orbit_command(ex63_config):
    path, out = ex63_config
    code = execute(["orbit", "--config", path, "--x0", "1.5707963",
                    "--u0", "0.25", "--p0", "0.0", "--t", "1.0"])
    assert code == 0
    rows = open(os.path.join(out, "orbit.csv")).read().strip().splitlines()
    assert rows[0] == "t,x,u,p,H"
    last = rows[-1].split(",")
    assert float(last[2]) == pytest.approx(0.25, abs=1e-9)


def test_action_command(ex63_config):
    path, out = ex63_config
    assert execute(["action", "--config", path, "--x0", "0.0", "--u0", "0.0",
                    "--t", "0.5"]) == 0
    header = open(os.path.join(out, "action_backward.csv")).readline().strip()
    assert header == "k,i,x,h,backpointer"


def test_manifold_command(ex63_config):
    path, out = ex63_config
    code = execute(["manifold", "--config", path, "--direction", "unstable",
                    "--x0", "-1.5707963", "--u0", "-0.25", "--t", "6.0"])
    assert code == 0
    assert os.path.exists(os.path.join(out, "manifold_unstable_plus.csv"))


def test_manifold_no_real_direction(ex63_config):
    path, _ = ex63_config
    # the lower rest point has no real stable eigenvalue
    code = execute(["manifold", "--config", path, "--direction", "stable",
                    "--x0", "-1.5707963", "--u0", "-0.25"])
    assert code == 4


def test_classify_command(ex63_config):
    path, out = ex63_config
    code = execute(["classify", "--config", path, "--x0", "1.5707963",
                    "--u0", "0.25"])
    assert code == 0
    report = read_keyvalues(os.path.join(out, "classification.txt"))
    assert report["case"] == "2"


def test_connect_precondition_failure(tmp_path):
    # constant-rate model: the ordering v_+ < u_- fails (both limits coincide)
    doc = {
        "model": {"variant": "separable_quadratic", "alpha": 1.0,
                  "V": "-0.25", "lambda": "1"},
        "grid": {"n": 64},
        "numerics": {"tau": 0.0625, "tol": 1e-4, "t_max": 40.0},
        "phi": "sin(x)",
        "out": str(tmp_path / "o"),
    }
    path = tmp_path / "mono.json"
    path.write_text(json.dumps(doc))
    assert execute(["connect", "--config", str(path)]) == 4


def test_thread_cap_env(ex63_config, monkeypatch):
    path, _ = ex63_config
    monkeypatch.setenv("CONTACT_KAM_THREADS", "zebra")
    assert execute(["parse-check", "--config", path]) == 2
    monkeypatch.setenv("CONTACT_KAM_THREADS", "2")
    assert execute(["parse-check", "--config", path]) == 0


def test_tau_autoshrink(tmp_path, capsys):
    doc = {
        "model": {"variant": "separable_quadratic", "alpha": 1.0,
                  "V": "0", "lambda": "3*sin(x)"},
        "grid": {"n": 64},
        "numerics": {"tau": 0.5},
        "out": str(tmp_path / "o"),
    }
    path = tmp_path / "shrink.json"
    path.write_text(json.dumps(doc))
    assert execute(["parse-check", "--config", str(path)]) == 0
    assert "tau shrunk" in capsys.readouterr().err


def test_verify_command(ex63_config, capsys):
    path, out = ex63_config
    code = execute(["verify", "--config", path, "--trials", "5"])
    assert code == 0
    out_text = capsys.readouterr().out
    assert "properties passed" in out_text
