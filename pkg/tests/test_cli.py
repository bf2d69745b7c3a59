import json
import os
import subprocess
import sys

import pytest

from bpre.cli import ExperimentConfig, emit_plot_data, main
from bpre.errors import ContractError


def test_experiment_config_invariants(tmp_path):
    cfg = ExperimentConfig(command="mrca", n_list=(4, 8), seed=None)
    with pytest.raises(ContractError, match="seed required"):
        cfg.require_seed()
    with pytest.raises(ContractError, match="model"):
        ExperimentConfig(command="rho").load_model()
    hashed = ExperimentConfig(command="rho", model="m.json", n_max=8)
    assert hashed.config_hash == ExperimentConfig(command="rho", model="m.json", n_max=8).config_hash
    assert hashed.config_hash != ExperimentConfig(command="rho", model="m.json", n_max=9).config_hash
    # output paths do not enter the hash
    assert hashed.config_hash == ExperimentConfig(
        command="rho", model="m.json", n_max=8, out="x.json"
    ).config_hash


@pytest.fixture
def gw_path(tmp_path):
    path = tmp_path / "gw.json"
    path.write_text(
        json.dumps(
            {"states": [{"type": "finite", "probs": [0.25, 0.0, 0.75]}], "weights": [1.0]}
        )
    )
    return str(path)


@pytest.fixture
def weakly_path(tmp_path):
    path = tmp_path / "weakly.json"
    path.write_text(
        json.dumps(
            {
                "states": [
                    {"type": "lf", "m": 2.0, "b": 8.0},
                    {"type": "lf", "m": 0.5, "b": 0.5},
                ],
                "weights": [2.0 / 3.0, 1.0 / 3.0],
            }
        )
    )
    return str(path)


def test_unknown_command_exits_one(capsys):
    assert main(["frobnicate"]) == 1
    assert "usage" in capsys.readouterr().err


def test_no_command_prints_usage(capsys):
    assert main([]) == 1
    assert "commands" in capsys.readouterr().out


def test_rho_command_writes_report(gw_path, tmp_path, capsys):
    out = tmp_path / "report.json"
    csv = tmp_path / "report.csv"
    rc = main(["rho", "--model", gw_path, "--n-max", "8", "--out", str(out), "--csv", str(csv)])
    assert rc == 0
    summary = capsys.readouterr().out
    assert "fekete_upper" in summary
    doc = json.loads(out.read_text())
    assert doc["certified"]["z0"] == 2
    assert doc["config_hash"]
    lines = csv.read_text().strip().split("\n")
    assert lines[0] == "n,quantity,value,lo,hi"
    assert any("a_n_over_n" in line for line in lines)


def test_examples_command_dispatch(tmp_path, capsys):
    out = tmp_path / "ex1.json"
    rc = main(
        ["examples", "--which", "1", "--r", "0.3", "--p", "0.5", "--n-max", "8", "--out", str(out)]
    )
    assert rc == 0
    assert "separated=True" in capsys.readouterr().out
    doc = json.loads(out.read_text())
    assert doc["certified"]["identity_max_log_error"] <= 1e-12

    rc = main(["examples", "--which", "2", "--r", "0.5", "--p", "0.1", "--a", "10", "--n-max", "4"])
    assert rc == 0
    assert "fixed_point=0.101021" in capsys.readouterr().out


def test_examples_unknown_which(capsys):
    rc = main(["examples", "--which", "3", "--r", "0.5", "--p", "0.1"])
    assert rc == 2


def test_mrca_requires_seed(weakly_path, capsys):
    rc = main(["mrca", "--model", weakly_path, "--n-list", "4"])
    assert rc == 2
    assert "seed required" in capsys.readouterr().err


def test_simulate_requires_seed(weakly_path):
    assert main(["simulate", "--model", weakly_path, "--n", "4"]) == 2


def test_malformed_model_reports_position(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"states": [,]}')
    rc = main(["validate", "--model", str(bad)])
    assert rc == 2
    err = capsys.readouterr().err
    assert "line 1" in err and "column" in err


def test_missing_model_file(capsys):
    assert main(["validate", "--model", "/nonexistent.json"]) == 2


def test_validate_gw(gw_path, capsys):
    assert main(["validate", "--model", gw_path]) == 0
    out = capsys.readouterr().out
    assert "supercritical: yes" in out
    assert "z0: 2" in out
    assert "lf_pure: no" in out


def test_validate_boundary_warning(tmp_path, capsys):
    path = tmp_path / "copy.json"
    path.write_text(
        json.dumps({"states": [{"type": "finite", "probs": [0.0, 1.0]}], "weights": [1.0]})
    )
    assert main(["validate", "--model", str(path)]) == 0
    assert "not supercritical boundary: E[X]=0" in capsys.readouterr().out


def test_validate_weakly_regime(weakly_path, capsys):
    assert main(["validate", "--model", weakly_path]) == 0
    out = capsys.readouterr().out
    assert "lf_pure: yes" in out
    assert "regime: weakly" in out


def test_exact_command_certified_and_budget(weakly_path, tmp_path, capsys):
    rc = main(["exact", "--model", weakly_path, "--n", "6", "--j", "2"])
    assert rc == 0
    assert "[certified]" in capsys.readouterr().out
    rc = main(["exact", "--model", weakly_path, "--n", "40", "--j", "1"])
    assert rc == 3
    assert "budget" in capsys.readouterr().err


def test_exact_estimate_path(weakly_path, capsys):
    rc = main(
        [
            "exact",
            "--model",
            weakly_path,
            "--n",
            "10",
            "--j-max",
            "4",
            "--estimate",
            "--replicates",
            "500",
            "--seed",
            "9",
        ]
    )
    assert rc == 0
    assert "[estimated]" in capsys.readouterr().out


def test_simulate_artifact_embeds_seed(weakly_path, tmp_path):
    out = tmp_path / "sim.json"
    rc = main(
        [
            "simulate",
            "--model",
            weakly_path,
            "--n",
            "5",
            "--replicates",
            "20",
            "--seed",
            "4",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["seed"] == 4
    assert doc["config_hash"]
    assert len(doc["trajectories"]) == 20


def test_byte_identical_artifacts_across_runs_and_workers(weakly_path, tmp_path):
    env = dict(os.environ)
    outputs = []
    for workers, tag in (("1", "a"), ("3", "b")):
        out = tmp_path / f"mrca_{tag}.json"
        env["BPRE_THREADS"] = workers
        code = subprocess.run(
            [
                sys.executable,
                "-m",
                "bpre.cli",
                "mrca",
                "--model",
                weakly_path,
                "--n-list",
                "5",
                "--replicates",
                "20000",
                "--seed",
                "12",
                "--out",
                str(out),
            ],
            env=env,
            capture_output=True,
            text=True,
        ).returncode
        assert code == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]


def test_emit_plot_data_variants():
    rho_doc = {
        "certified": {
            "a_table": [{"n": 1, "a_n": 0.9, "a_n_over_n": 0.9}],
            "lambda0": 0.5,
            "lf_closed_form": 0.4,
        },
        "estimated": {"slope_estimate": 0.45},
    }
    csv = emit_plot_data(rho_doc)
    assert csv.splitlines()[0] == "n,quantity,value,lo,hi"
    assert ",lambda0,0.5,," in csv
    assert ",lf_rho,0.4,," in csv

    mrca_doc = {
        "certified": {},
        "estimated": {
            "points": [
                {"n": 4, "accepted": 100, "proposed": 1000, "bins": [{"k": 1, "count": 50}]}
            ]
        },
    }
    csv = emit_plot_data(mrca_doc)
    assert "4,mrca_pmf_k1,0.5," in csv

    empty_estimated = {
        "certified": {"table": [{"n": 2, "log_p2_over_n": -1.0}]},
        "estimated": {},
    }
    csv = emit_plot_data(empty_estimated)
    assert "2,log_p2_over_n,-1.0,," in csv
