"""End-to-end tests of the command-line interface (in-process plus one
subprocess check of the installed console script)."""
from __future__ import annotations

import json
import os
import shutil
import subprocess
import sys

import numpy as np
import pytest

from cmsbm.cli import main
from cmsbm.model import ModelParams, load_matrix, load_observation, sample_planted
from cmsbm.rounding import ProjectionConfig, psd_project
from cmsbm.statistics import StatisticConfig, recovery_matrix

REFERENCE_L3 = {
    "n": 100, "p": 50, "L": 2, "mu": 0.5, "rho": 0.6,
    "lambda": [3.0, 3.0], "epsilon": [0.5, 0.5],
}
SMALL = {
    "n": 30, "p": 15, "L": 2, "mu": 0.5, "rho": 0.6,
    "lambda": [3.0, 3.0], "epsilon": [0.5, 0.5],
}


@pytest.fixture()
def params_file(tmp_path):
    path = tmp_path / "reference_l3.json"
    path.write_text(json.dumps(REFERENCE_L3))
    return str(path)


@pytest.fixture()
def small_params_file(tmp_path):
    path = tmp_path / "small.json"
    path.write_text(json.dumps(SMALL))
    return str(path)


def run_cli(capsys, *argv: str) -> tuple[int, str, str]:
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_threshold_reference_point(capsys, params_file) -> None:
    code, out, _ = run_cli(capsys, "threshold", "--params", params_file)
    assert code == 0
    doc = json.loads(out)
    assert set(doc) == {
        "F_intro",
        "F_sec3",
        "sigma_plus",
        "chi2_surrogate_t0",
        "chi2_divergence_reason",
        "feasible_detection",
    }
    assert doc["F_intro"] == 0.75
    assert doc["feasible_detection"] is False
    assert doc["chi2_surrogate_t0"] == pytest.approx(5.130993692133456)
    assert doc["chi2_divergence_reason"] is None


def test_threshold_divergent_point(capsys, tmp_path) -> None:
    strong = dict(REFERENCE_L3)
    strong["lambda"] = [9.0, 9.0]
    path = tmp_path / "lam9.json"
    path.write_text(json.dumps(strong))
    code, out, _ = run_cli(capsys, "threshold", "--params", str(path))
    assert code == 0
    doc = json.loads(out)
    assert doc["F_intro"] == 2.25
    assert doc["feasible_detection"] is True
    assert doc["chi2_surrogate_t0"] is None
    assert doc["chi2_divergence_reason"] == "LayerFactor"


def test_sample_and_detect_roundtrip(capsys, small_params_file, tmp_path) -> None:
    obs_dir = str(tmp_path / "obs")
    code, out, _ = run_cli(
        capsys, "sample", "--params", small_params_file, "--seed", "7", "--out", obs_dir
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["provenance"] == "planted"
    assert doc["n"] == 30
    assert len(doc["edge_counts"]) == 2
    obs, params = load_observation(obs_dir)
    assert params.n == 30

    code, fresh_out, _ = run_cli(
        capsys, "detect", "--params", small_params_file, "--seed", "7", "--aleph", "3"
    )
    assert code == 0
    code, loaded_out, _ = run_cli(capsys, "detect", "--obs", obs_dir, "--aleph", "3")
    assert code == 0
    fresh = json.loads(fresh_out)
    loaded = json.loads(loaded_out)
    assert fresh["value"] == loaded["value"]  # same sample either way
    assert set(fresh) == {
        "value", "beta", "tau", "decision", "elapsed", "backend", "aleph", "provenance",
    }
    assert fresh["backend"] == "transfer"
    assert isinstance(fresh["decision"], bool)


def test_detect_null_and_backends_agree(capsys, small_params_file) -> None:
    code, out_t, _ = run_cli(
        capsys, "detect", "--params", small_params_file, "--seed", "3",
        "--aleph", "3", "--null",
    )
    assert code == 0
    assert json.loads(out_t)["provenance"] == "null"
    code, out_e, _ = run_cli(
        capsys, "detect", "--params", small_params_file, "--seed", "3",
        "--aleph", "3", "--null", "--backend", "exact",
    )
    assert code == 0
    assert json.loads(out_e)["value"] == pytest.approx(
        json.loads(out_t)["value"], rel=1e-8
    )


def test_families_csv(capsys, params_file, tmp_path) -> None:
    code, out, _ = run_cli(
        capsys, "families", "--params", params_file, "--aleph", "3", "--topology", "cycle"
    )
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "topology,canonical_word,aut,dif0,dif,c0,c1,c2,xi"
    assert len(lines) == 1 + 10  # ten dihedral classes of 3-letter words over 3 colors
    first = lines[1].split(",")
    assert first[0] == "cycle"
    assert first[1] == "0-0-0"
    float(first[-1])  # xi parses
    # Restricted and file-output variants.
    out_file = str(tmp_path / "fam.csv")
    code, _, _ = run_cli(
        capsys, "families", "--params", params_file, "--aleph", "2",
        "--topology", "path", "--color", "1", "--out", out_file,
    )
    assert code == 0
    rows = open(out_file).read().splitlines()
    assert len(rows) == 2
    assert rows[1].startswith("path,1-1,")


def test_recover_outputs(capsys, small_params_file, tmp_path) -> None:
    out_dir = str(tmp_path / "rec")
    code, out, _ = run_cli(
        capsys, "recover", "--params", small_params_file, "--seed", "2",
        "--aleph", "3", "--out", out_dir,
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["constraint_slack"] <= 1e-8
    phi = load_matrix(os.path.join(out_dir, "phi.bin"), magic=b"CMSP")
    phi_hat = load_matrix(os.path.join(out_dir, "phi_hat.bin"), magic=b"CMSP")
    assert phi.shape == (30, 30)
    np.testing.assert_allclose(phi_hat.diagonal(), 1.0, atol=1e-7)
    # The written statistic equals a direct library evaluation on one sample.
    params = ModelParams.from_dict(SMALL)
    obs = sample_planted(params, seed=2)
    direct = recovery_matrix(obs, params, StatisticConfig(aleph=3)).matrix
    np.testing.assert_array_equal(phi, direct)
    projected = psd_project(direct, ProjectionConfig()).phi_hat
    np.testing.assert_allclose(phi_hat, projected, atol=1e-12)
    diag = json.load(open(os.path.join(out_dir, "diagnostics.json")))
    assert diag["projection"]["constraint_slack"] <= 1e-8
    assert set(np.unique(diag["x_hat"])) <= {-1, 1}
    assert len(diag["x_hat"]) == 30
    assert 0.0 <= diag["quality"]["overlap"] <= 1.0


def test_experiment_command(capsys, tmp_path) -> None:
    plan = {
        "kind": "detection",
        "base_params": SMALL,
        "sweep": [{"label": "lam3"}, {"label": "lam9", "lambda": [9.0, 9.0]}],
        "trials": 2,
        "aleph": 3,
        "statistic_variants": ["all"],
        "seed": 0,
    }
    plan_path = tmp_path / "plan.json"
    plan_path.write_text(json.dumps(plan))
    out_dir = str(tmp_path / "exp")
    code, out, _ = run_cli(
        capsys, "experiment", "--plan", str(plan_path), "--out", out_dir, "--plots"
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["kind"] == "detection"
    assert doc["workers"] == 1
    assert [a["label"] for a in doc["arms"]] == ["lam3", "lam9"]
    assert os.path.exists(os.path.join(out_dir, "detection.csv"))
    assert os.path.exists(os.path.join(out_dir, "roc_lam9.svg"))


def test_verify_command(capsys) -> None:
    code, out, _ = run_cli(capsys, "verify")
    assert code == 0
    doc = json.loads(out)
    assert doc["pass"] is True
    names = {c["name"] for c in doc["checks"]}
    assert {
        "moment_dominance",
        "detection_vs_bruteforce",
        "recovery_vs_bruteforce",
        "exact_vs_transfer",
        "beta_dual_route",
        "auc_dual_route",
        "threshold_sign_agreement",
    } <= names
    assert all(c["pass"] for c in doc["checks"])


def test_usage_errors(capsys, params_file) -> None:
    code, _, err = run_cli(capsys, "detect", "--params", params_file)  # --aleph missing
    assert code == 1
    assert "usage error" in err
    code, _, _ = run_cli(capsys, "--bogus-flag")
    assert code == 1
    code, _, err = run_cli(capsys)
    assert code == 1
    assert "subcommand" in err
    code, _, _ = run_cli(capsys, "nonsense-command")
    assert code == 1


def test_error_reports_are_json(capsys, tmp_path) -> None:
    code, _, err = run_cli(capsys, "threshold", "--params", "/does/not/exist.json")
    assert code == 1
    doc = json.loads(err)
    assert doc["error"] == "FileNotFoundError"
    assert "remedy" in doc
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n": -5}))
    code, _, err = run_cli(capsys, "threshold", "--params", str(bad))
    assert code == 1
    assert json.loads(err)["error"] == "InvalidParams"
    garbage = tmp_path / "garbage.json"
    garbage.write_text("not json")
    code, _, err = run_cli(capsys, "threshold", "--params", str(garbage))
    assert code == 1
    assert json.loads(err)["error"] == "JSONDecodeError"


def test_thread_flag_and_env(capsys, params_file, monkeypatch) -> None:
    code, _, _ = run_cli(capsys, "--threads", "2", "threshold", "--params", params_file)
    assert code == 0
    code, _, err = run_cli(capsys, "--threads", "0", "threshold", "--params", params_file)
    assert code == 1
    assert "thread count" in err
    monkeypatch.setenv("CMSBM_THREADS", "2")
    code, _, _ = run_cli(capsys, "threshold", "--params", params_file)
    assert code == 0
    monkeypatch.setenv("CMSBM_THREADS", "abc")
    code, _, err = run_cli(capsys, "threshold", "--params", params_file)
    assert code == 1
    assert "CMSBM_THREADS" in err


def test_console_script(params_file) -> None:
    exe = shutil.which("cmsbm")
    assert exe, "console script should be installed with the package"
    proc = subprocess.run(
        [exe, "threshold", "--params", params_file],
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["F_intro"] == 0.75
    assert sys.executable  # the script runs under some interpreter; smoke only
