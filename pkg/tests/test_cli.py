import csv
import io
import json
import subprocess
import sys
from contextlib import redirect_stdout
from pathlib import Path

import numpy as np
import pytest

from mpbt.analysis import CycleWitness
from mpbt.cli import main
from mpbt.exact import brute_force_optimum
from mpbt.experiment import CSV_COLUMNS, POA_COLUMNS, ExperimentConfig, run_seeds
from mpbt.files import load_instance, load_json, save_instance, tree_from_dict
from mpbt.game import CostScheme, is_nash_equilibrium
from mpbt.netmodel import generate_connected_instance, network_power

FIXTURE = Path(__file__).parent / "fixtures" / "es_cycle_witness.json"


def run_cli(*argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main([str(a) for a in argv])
    return code, buf.getvalue()


@pytest.fixture
def instance_file(tmp_path):
    path = tmp_path / "inst.json"
    assert run_cli("gen", "--nodes", 8, "--seed", 5, "--side", 120, "--out", path)[0] == 0
    return path


def test_gen_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run_cli("gen", "--nodes", 31, "--seed", 9, "--out", a)
    run_cli("gen", "--nodes", 31, "--seed", 9, "--out", b)
    assert a.read_bytes() == b.read_bytes()
    assert len(load_json(a)["nodes"]) == 31
    assert load_instance(a).n_nodes == 31


def test_gen_rejects_bad_input(tmp_path):
    assert run_cli("gen", "--nodes", 1, "--seed", 0, "--out", tmp_path / "x.json")[0] == 2
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"node_counts": [10], "runs": 1, "algorithms": ["csg-mc"], "seed": 0, "p_max_range": [0.3, 0.1]}))
    assert run_cli("gen", "--nodes", 5, "--seed", 0, "--config", cfg, "--out", tmp_path / "y.json")[0] == 2


def test_gen_write_failure(tmp_path):
    assert run_cli("gen", "--nodes", 5, "--seed", 0, "--out", tmp_path / "missing" / "deep" / "x.json")[0] == 1


@pytest.mark.parametrize("algo", ["csg", "bip", "bipsw", "bdp", "gbbtc", "exact"])
def test_run_writes_outputs(instance_file, tmp_path, algo):
    out = tmp_path / algo
    code, stdout = run_cli("run", instance_file, "--algo", algo, "--out", out)
    assert code == 0
    inst = load_instance(instance_file)
    tree = tree_from_dict(load_json(out / "tree.json"), inst)
    metrics = load_json(out / "metrics.json")
    assert metrics["network_power"] == pytest.approx(float(network_power(tree, inst)), rel=1e-12)
    assert (out / "tree.dot").read_text().startswith("digraph")
    assert (out / "trace.jsonl").exists() == (algo in ("csg", "bdp", "gbbtc"))
    assert json.loads(stdout)["algorithm"]
    if algo == "csg":
        assert is_nash_equilibrium(tree, CostScheme("MC"))[0]
    if algo == "exact":
        assert metrics["network_power"] == pytest.approx(float(network_power(brute_force_optimum(inst), inst)), rel=1e-9)


@pytest.mark.parametrize("scheme", ["sv", "es"])
def test_run_other_schemes(instance_file, tmp_path, scheme):
    assert run_cli("run", instance_file, "--scheme", scheme, "--fixed-power-mw", 250, "--out", tmp_path)[0] == 0


def test_run_es_cycle_exit_code(tmp_path):
    w = CycleWitness.from_dict(json.loads(FIXTURE.read_text()))
    path = save_instance(w.instance, tmp_path / "cyc.json")
    assert run_cli("run", path, "--scheme", "es", "--seed", 0, "--out", tmp_path / "o")[0] == 4
    # the same instance at a fixed power converges (SV and ES coincide there)
    assert run_cli("run", path, "--scheme", "es", "--fixed-power-mw", 1000, "--out", tmp_path / "p")[0] == 0


def test_run_exact_limit_and_disconnection(instance_file, tmp_path):
    assert run_cli("run", instance_file, "--algo", "exact", "--exact-limit", 3, "--out", tmp_path)[0] == 2
    assert run_cli("run", instance_file, "--algo", "gbbtc", "--fixed-power-mw", 0.001, "--out", tmp_path)[0] == 3


def test_milp_export(instance_file, tmp_path):
    assert run_cli("milp-export", instance_file, "--out", tmp_path / "m.lp")[0] == 0
    text = (tmp_path / "m.lp").read_text()
    assert text.startswith("\\") or text.startswith("Minimize")
    assert "Binaries" in text
    assert run_cli("run", instance_file, "--algo", "milp-export", "--out", tmp_path / "r")[0] == 0
    assert (tmp_path / "r" / "model.lp").read_text() == text


def write_config(tmp_path, **extra):
    cfg = {"node_counts": [6, 9], "runs": 3, "algorithms": ["csg-mc", "csg-sv", "bip", "gbbtc"], "seed": 77, "side": 150.0}
    cfg.update(extra)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def test_experiment_csv_is_deterministic(tmp_path):
    cfg = write_config(tmp_path)
    run_cli("experiment", cfg, "--out", tmp_path / "a.csv")
    run_cli("experiment", cfg, "--out", tmp_path / "b.csv")
    a = (tmp_path / "a.csv").read_text()
    assert a == (tmp_path / "b.csv").read_text()
    rows = list(csv.DictReader(io.StringIO(a)))
    assert list(rows[0]) == CSV_COLUMNS
    runs = [r for r in rows if r["row_type"] == "run"]
    assert len(runs) == 2 * 3 * 4
    assert {r["row_type"] for r in rows} == {"run", "mean", "std"}
    run_cli("experiment", cfg, "--seed", 78, "--out", tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text() != a


def test_experiment_rejects_unknown_keys(tmp_path):
    assert run_cli("experiment", write_config(tmp_path, colour="blue"))[0] == 2
    assert run_cli("experiment", write_config(tmp_path, algorithms=["nope"]))[0] == 2


def test_normalized_power_recomputed_from_trees(tmp_path):
    cfg_path = write_config(tmp_path, out_dir=str(tmp_path / "trees"))
    run_cli("experiment", cfg_path, "--out", tmp_path / "x.csv")
    cfg = ExperimentConfig.load(cfg_path)
    rows = [r for r in csv.DictReader(open(tmp_path / "x.csv")) if r["row_type"] == "run" and r["status"] == "ok"]
    for r in rows:
        n, run = int(r["n_nodes"]), int(r["run"])
        inst_ss, _ = run_seeds(cfg.seed, cfg.node_counts.index(n), run)
        inst, _ = generate_connected_instance(cfg.sampler(), n, np.random.default_rng(inst_ss), (cfg.fixed_power,))
        tree = tree_from_dict(load_json(tmp_path / "trees" / f"tree_n{n}_r{run}_{r['algorithm']}.json"), inst)
        p_hat = float(network_power(tree, inst)) / inst.mean_power_budget()
        assert p_hat == pytest.approx(float(r["normalized_power"]), rel=1e-9)


def test_poa_csv(tmp_path):
    code, out = run_cli("poa", "--N", 2, 4, "--alpha", 3, "--pc", 0.01, 0.6)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == POA_COLUMNS
    by_key = {(r["N"], r["p_c"]): r for r in rows}
    assert by_key[("4", "0.6")]["status"] == "skipped-threshold"
    assert by_key[("2", "0.6")]["status"] == "ok" and by_key[("2", "0.6")]["chain_optimal"] == "True"
    assert float(by_key[("4", "0.01")]["poa_formula"]) == pytest.approx(9.8537, abs=1e-4)


def test_console_script_runs(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "mpbt.cli", "poa", "--N", "2", "--pc", "0.1"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("N,alpha")
