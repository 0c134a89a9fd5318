import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpbt.errors import Disconnected, InfeasibleSolution, IoError, LimitExceeded
from mpbt.exact import (
    brute_force_optimum,
    build_milp,
    check_solution,
    export_lp,
    format_lp,
    parse_lp,
    read_lp,
    read_solution,
    reachability_matrix,
    solution_from_tree,
    solve_exact,
    solve_milp,
    tree_from_milp_solution,
)
from mpbt.exact.milp import tname
from mpbt.game import CostScheme, is_nash_equilibrium
from mpbt.netmodel import from_power_matrix, line_instance, network_power
from mpbt.tree import BroadcastTree, validate

from builders import INF, random_instance, symmetric, toy_instance

TOY_RS = np.array([[1, 1, 0, 0], [0, 1, 0, 0], [1, 1, 1, 0], [0, 0, 0, 0]])


def every_tree_power(inst):
    """Plain recursive enumeration of parent vectors (no numpy), used to cross-check the oracle."""
    W = inst.receivers
    best = math.inf
    for combo in itertools.product(*[sorted(inst.neighbors[i]) for i in W]):
        parent = dict(zip(W, combo))
        ok = True
        for i in W:
            seen, k = set(), i
            while k != inst.source:
                if k in seen:
                    ok = False
                    break
                seen.add(k)
                k = parent[k]
            if not ok:
                break
        if ok:
            tx = {}
            for i, j in parent.items():
                tx[j] = max(tx.get(j, 0.0), inst.p_uni[i][j])
            best = min(best, sum(inst.p_c[j] + v for j, v in tx.items()))
    return best


def test_toy_reachability():
    assert (reachability_matrix(toy_instance(), 0) == TOY_RS).all()


def test_reachability_isolated_node_is_zero():
    inst = from_power_matrix(symmetric(3, {(0, 1): 1.0}), 0.1, 2.0)
    assert not reachability_matrix(inst, 2).any()


def test_reachability_monotone_rows():
    inst = random_instance(11, 7, 7)
    for j in range(inst.n_nodes):
        R = reachability_matrix(inst, j)
        rows = [r for r in R if r.any()]
        # a row with more ones dominates every row with fewer
        for a in rows:
            for b in rows:
                if a.sum() >= b.sum():
                    assert (a >= b).all()


def test_toy_model_shape_and_flow_values():
    inst = toy_instance()
    model = build_milp(inst)
    assert len(model.binaries) == 16 == len(inst.receivers) ** 2
    assert all(not v.startswith(f"t_{j}_{j}") for j in range(5) for v in model.binaries)
    opt = BroadcastTree.from_parents(inst, {1: 0, 2: 0, 3: 2, 4: 2})
    sol = solution_from_tree(inst, opt, model)
    assert check_solution(model, sol) == []
    assert sol.values[tname(1, 0)] == 1 and sol.values[tname(4, 2)] == 1
    assert sol.values["d_1_0"] == 1 and sol.values["d_2_0"] == 3
    assert sol.values["d_3_2"] + sol.values["d_4_2"] == 2
    assert sol.objective_value == pytest.approx(network_power(opt, inst))


def test_toy_reconstruction():
    inst = toy_instance()
    model = build_milp(inst)
    opt = BroadcastTree.from_parents(inst, {1: 0, 2: 0, 3: 2, 4: 2})
    tree = tree_from_milp_solution(inst, solution_from_tree(inst, opt, model))
    assert tree.children[0] == {1, 2} and tree.children[2] == {3, 4}


def test_toy_objectives_agree():
    inst = toy_instance()
    model = build_milp(inst)
    bf = network_power(brute_force_optimum(inst), inst)
    assert solve_milp(model).objective_value == pytest.approx(bf, rel=1e-9)
    assert bf == pytest.approx(5.0)


def test_first_visited_transmitter_wins():
    # 3 is covered by both 1 and 2 in the solution; 1 is visited first
    links = {(0, 1): 1.0, (0, 2): 1.0, (1, 3): 1.0, (2, 3): 1.0, (2, 4): 1.0}
    inst = from_power_matrix(symmetric(5, links), 0.0, 2.0)
    model = build_milp(inst)
    values = {v: 0.0 for v in model.variables}
    values[tname(2, 0)] = values[tname(3, 1)] = values[tname(4, 2)] = 1.0
    from mpbt.exact import MilpSolution

    tree = tree_from_milp_solution(inst, MilpSolution(values, 0.0))
    assert tree.parent[3] == 1


def test_single_receiver_unicast_reconstruction():
    inst = from_power_matrix([[INF, 0.3], [0.3, INF]], 0.1, 1.0)
    model = build_milp(inst)
    sol = solve_milp(model)
    assert tree_from_milp_solution(inst, sol).parent == {1: 0}


def test_uncovered_solution_rejected():
    inst = toy_instance()
    model = build_milp(inst)
    from mpbt.exact import MilpSolution

    values = {v: 0.0 for v in model.variables}
    values[tname(2, 0)] = 1.0
    with pytest.raises(InfeasibleSolution):
        tree_from_milp_solution(inst, MilpSolution(values, 0.0))


def test_disconnected_model():
    with pytest.raises(Disconnected):
        build_milp(from_power_matrix(symmetric(3, {(0, 1): 1.0}), 0.1, 2.0))


def test_lp_roundtrip_and_errors(tmp_path):
    model = build_milp(toy_instance())
    path = export_lp(model, tmp_path / "toy.lp")
    text = path.read_text()
    assert "Minimize" in text and "Subject To" in text and "Binaries" in text and text.rstrip().endswith("End")
    back = read_lp(path)
    assert back.same_as(model)
    binaries = text.split("Binaries")[1].split("End")[0].split()
    assert len(binaries) == 16
    with pytest.raises(IoError):
        export_lp(model, "")


def test_lp_reader_handles_wrapped_rows():
    text = "Minimize\n obj: 2 x + 3 y\n   - z\nSubject To\n c1: x + y\n   >= 1\nBounds\n 0 <= z <= 4\nBinaries\n x\nEnd\n"
    m = parse_lp(text)
    assert m.objective == {"x": 2.0, "y": 3.0, "z": -1.0}
    assert m.constraints[0].sense == ">=" and m.constraints[0].coeffs == {"x": 1.0, "y": 1.0}
    assert m.bounds["z"] == (0.0, 4.0) and m.bounds["x"] == (0.0, 1.0) and m.bounds["y"] == (0.0, math.inf)


def test_solution_file_ingestion(tmp_path):
    inst = toy_instance()
    model = build_milp(inst)
    opt = BroadcastTree.from_parents(inst, {1: 0, 2: 0, 3: 2, 4: 2})
    sol = solution_from_tree(inst, opt, model)
    lines = [f"{k}={v + (3e-7 if k.startswith('t_') and v == 1 else 0.0)}" for k, v in sol.values.items()]
    f = tmp_path / "sol.txt"
    f.write_text("# external solver output\n" + "\n".join(lines) + "\n")
    got = read_solution(f, model)
    assert got.objective_value == pytest.approx(5.0)
    assert tree_from_milp_solution(inst, got).parent == opt.parent
    with pytest.raises(InfeasibleSolution):
        read_solution("t_1_0=0.5\n", model)


def test_brute_force_small_cases():
    inst = from_power_matrix([[INF, 0.3], [0.3, INF]], 0.1, 1.0)
    assert brute_force_optimum(inst).parent == {1: 0}
    # two receivers: three tree shapes, the chain wins here
    chain = from_power_matrix(symmetric(3, {(0, 1): 1.0, (1, 2): 1.0, (0, 2): 8.0}), 0.1, 10.0)
    assert brute_force_optimum(chain).parent == {1: 0, 2: 1}
    bc = from_power_matrix(symmetric(3, {(0, 1): 1.0, (1, 2): 1.0, (0, 2): 1.5}), 0.1, 10.0)
    assert brute_force_optimum(bc).parent == {1: 0, 2: 0}


def test_limits():
    with pytest.raises(LimitExceeded):
        brute_force_optimum(line_instance(8, 3, 0.1))
    with pytest.raises(LimitExceeded):
        solve_exact(line_instance(5, 3, 0.1), node_limit=4)


def test_two_node_line_threshold():
    below = solve_exact(line_instance(2, 3, 0.7))
    above = solve_exact(line_instance(2, 3, 0.8))
    assert below.parent == {1: 0, 2: 1}
    assert above.parent == {1: 0, 2: 0}


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000))
def test_brute_force_matches_plain_enumeration(seed):
    inst = random_instance(seed, 2, 6)
    t = brute_force_optimum(inst)
    assert validate(t)
    assert network_power(t, inst) == pytest.approx(every_tree_power(inst), rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000))
def test_solve_exact_matches_brute_force(seed):
    inst = random_instance(seed, 2, 7)
    a = network_power(solve_exact(inst), inst)
    b = network_power(brute_force_optimum(inst), inst)
    assert a == pytest.approx(b, rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_optimum_is_mc_equilibrium_and_milp_feasible(seed):
    inst = random_instance(seed, 3, 7)
    opt = brute_force_optimum(inst)
    assert is_nash_equilibrium(opt, CostScheme("MC"))[0]
    model = build_milp(inst)
    sol = solution_from_tree(inst, opt, model)
    assert check_solution(model, sol) == []
    rebuilt = tree_from_milp_solution(inst, sol)
    assert network_power(rebuilt, inst) == pytest.approx(sol.objective_value, rel=1e-9)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 100_000))
def test_highs_agrees_with_oracle(seed):
    inst = random_instance(seed, 3, 6)
    sol = solve_milp(build_milp(inst))
    bf = network_power(brute_force_optimum(inst), inst)
    assert sol.objective_value == pytest.approx(bf, rel=1e-6)
    assert network_power(tree_from_milp_solution(inst, sol), inst) == pytest.approx(bf, rel=1e-6)


def test_lp_text_is_deterministic():
    m = build_milp(toy_instance())
    assert format_lp(m) == format_lp(build_milp(toy_instance()))
