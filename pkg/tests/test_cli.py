import json

import numpy as np
import pytest

from mfsensor import FidelityClass, assemble_instance, evaluate, greedy_sm, iterative_select
from mfsensor.cli import main
from mfsensor.io import load_model, load_test_split, read_design, write_csv, write_mfsm

COSTS = ["--cost-cheap", "1", "--cost-exp", "3", "--sigma-cheap", "0.2", "--sigma-exp", "0.05"]


@pytest.fixture
def dataset(tmp_path):
    rng = np.random.default_rng(0)
    x = np.linspace(0, 1, 40)
    t = np.linspace(0, 6, 30)
    data = (np.outer(np.sin(np.pi * x), np.cos(t)) + 0.5 * np.outer(np.sin(3 * np.pi * x),
            np.sin(2 * t)) + 0.01 * rng.standard_normal((40, 30)))
    path = tmp_path / "snaps.csv"
    write_csv(path, data)
    return tmp_path, path


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_prune_table_row(capsys):
    code, out, _ = _run(capsys, "prune", "--cost-cheap", 1, "--cost-exp", 2, "--budget", 100)
    assert code == 0 and out.strip() == "2601 51 51"


def test_unknown_flag_is_usage_error(capsys):
    code, _, err = _run(capsys, "prune", "--bogus", 3)
    assert code == 1 and "usage" in err
    code, _, _ = _run(capsys, "prune", "--cost-cheap", 1)
    assert code == 1


def test_invalid_costs_are_data_error(capsys):
    code, _, err = _run(capsys, "prune", "--cost-cheap", 2, "--cost-exp", 1, "--budget", 5)
    assert code == 2 and "error" in err


def test_pipeline_matches_library(dataset, capsys):
    d, data = dataset
    model_dir = d / "model"
    code, out, _ = _run(capsys, "basis", "--data", data, "--out", model_dir, "--energy", 0.99)
    assert code == 0 and "p_train=21" in out
    model = load_model(model_dir)
    cheap, exp = FidelityClass(1, 0.2), FidelityClass(3, 0.05)
    inst = assemble_instance(model, cheap, exp, 8)

    for algo, ref in (("greedy", greedy_sm(inst)), ("iterative", iterative_select(inst).winner)):
        path = d / f"{algo}.json"
        code, _, _ = _run(capsys, "design", "--model", model_dir, *COSTS, "--budget", 8,
                          "--algorithm", algo, "--out", path)
        assert code == 0
        doc = read_design(path)
        assert tuple(doc["cheap_idx"]) == ref.selection.cheap_idx
        assert tuple(doc["exp_idx"]) == ref.selection.exp_idx
        assert doc["phi_d"] == ref.phi_d

    code, out, _ = _run(capsys, "evaluate", "--model", model_dir, "--design", d / "greedy.json",
                        "--seed", 4)
    assert code == 0
    want = evaluate(model, greedy_sm(inst).selection, load_test_split(model_dir), cheap, exp,
                    seed=4)
    assert f"mean_rel_err={want.mean_rel_err!r}" in out

    code, out, _ = _run(capsys, "compare", "--model", model_dir, "--designs",
                        d / "greedy.json", d / "iterative.json", "--samples", 20,
                        "--table", d / "t.csv", "--hist", d / "h.csv")
    assert code == 0
    lines = (d / "t.csv").read_text().splitlines()
    assert lines[0] == "design,k_ch,k_exp,spend,phi_d,mean_rel_err" and len(lines) == 3

    code, out, _ = _run(capsys, "reconstruct", "--model", model_dir, "--design",
                        d / "greedy.json", "--snapshot-index", 2, "--out", d / "u.mfsm")
    assert code == 0 and out.startswith("rel_err=")


def test_reruns_are_byte_identical(dataset, capsys):
    d, data = dataset
    outputs = []
    for run in ("a", "b"):
        m = d / f"model_{run}"
        _run(capsys, "basis", "--data", data, "--out", m)
        _run(capsys, "design", "--model", m, *COSTS, "--budget", 9, "--algorithm", "random",
             "--seed", 11, "--out", d / f"r_{run}.json")
        _run(capsys, "evaluate", "--model", m, "--design", d / f"r_{run}.json", "--seed", 2,
             "--out", d / f"e_{run}.csv")
        outputs.append([(m / "phi.mfsm").read_bytes(), (m / "model.json").read_bytes(),
                        (d / f"r_{run}.json").read_bytes(), (d / f"e_{run}.csv").read_bytes()])
    assert outputs[0] == outputs[1]


def test_budget_below_cheap_cost_gives_empty_design(dataset, capsys):
    d, data = dataset
    _run(capsys, "basis", "--data", data, "--out", d / "m")
    code, _, _ = _run(capsys, "design", "--model", d / "m", *COSTS, "--budget", 0.5,
                      "--out", d / "e.json")
    assert code == 0
    doc = json.loads((d / "e.json").read_text())
    assert doc["cheap_idx"] == [] and doc["exp_idx"] == [] and doc["phi_d"] == 0.0


def test_fingerprint_mismatch(dataset, capsys):
    d, data = dataset
    _run(capsys, "basis", "--data", data, "--out", d / "m1")
    _run(capsys, "basis", "--data", data, "--out", d / "m2", "--lambda", 0.5)
    _run(capsys, "design", "--model", d / "m1", *COSTS, "--budget", 5, "--out", d / "g.json")
    code, _, err = _run(capsys, "evaluate", "--model", d / "m2", "--design", d / "g.json")
    assert code == 2 and "fingerprint" in err


def test_config_file_and_flag_override(dataset, capsys):
    d, data = dataset
    cfg = d / "run.cfg"
    cfg.write_text("cost_cheap = 1\ncost_exp = 2\nbudget = 100\n")
    code, out, _ = _run(capsys, "--config", cfg, "prune")
    assert out.strip() == "2601 51 51"
    code, out, _ = _run(capsys, "--config", cfg, "prune", "--cost-exp", "50")
    assert out.strip() == "153 3 3"


def test_bad_data_file(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("1,2\n3\n")
    code, _, err = _run(capsys, "basis", "--data", p, "--out", tmp_path / "m")
    assert code == 2 and "bad.csv:2:" in err


def test_oracle_and_mfsm_input(tmp_path, capsys):
    rng = np.random.default_rng(1)
    write_mfsm(tmp_path / "s.mfsm", rng.standard_normal((6, 10)))
    _run(capsys, "basis", "--data", tmp_path / "s.mfsm", "--out", tmp_path / "m")
    code, out, _ = _run(capsys, "oracle", "--model", tmp_path / "m", *COSTS, "--budget", 4)
    assert code == 0 and out.startswith("exhaustive")
