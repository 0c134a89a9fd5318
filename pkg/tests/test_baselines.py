import pytest
from hypothesis import given, settings, strategies as st

from mpbt.baselines import bdp, bip, bipsw, gbbtc, sweep
from mpbt.errors import Disconnected, DisconnectedAtFixedPower
from mpbt.exact import brute_force_optimum
from mpbt.game import CONVERGED, CostScheme, cost, game_power
from mpbt.netmodel import InstanceSampler, from_power_matrix, network_power
from mpbt.tree import BroadcastTree, shortest_path_parents, validate

from builders import INF, random_instance, symmetric

TX_ONLY = CostScheme("MC", include_circuitry=False)


def collinear():
    # S=0 at 0, 1 at 1, 2 at 2 with power d^3: relaying through 1 is cheaper
    return from_power_matrix(symmetric(3, {(0, 1): 1.0, (1, 2): 1.0, (0, 2): 8.0}), 0.1, 10.0)


def test_bip_single_receiver():
    inst = from_power_matrix([[INF, 0.2], [0.2, INF]], 0.05, 1.0)
    assert bip(inst).parent == {1: 0}


def test_bip_relays_on_collinear_nodes():
    inst = collinear()
    t = bip(inst)
    assert t.parent == {1: 0, 2: 1}
    assert network_power(t, inst) == pytest.approx(network_power(brute_force_optimum(inst), inst))


def test_bip_disconnected():
    inst = from_power_matrix(symmetric(3, {(0, 1): 1.0}), 0.1, 2.0)
    with pytest.raises(Disconnected):
        bip(inst)


def test_sweep_prunes_covered_child():
    # 0 reaches 1 at 4 and 2 at 3; 1 serves 2 at 1 in the input tree. 2 lies inside 0's emission.
    inst = from_power_matrix(symmetric(3, {(0, 1): 4.0, (0, 2): 3.0, (1, 2): 1.0}), 0.5, 10.0)
    t = BroadcastTree.from_parents(inst, {1: 0, 2: 1})
    s = sweep(t)
    assert s.parent == {1: 0, 2: 0}
    assert network_power(s, inst) == pytest.approx(4.5)
    assert network_power(t, inst) == pytest.approx(6.0)


def test_sweep_leaves_tight_tree_alone():
    inst = collinear()
    t = BroadcastTree.from_parents(inst, {1: 0, 2: 1})
    assert sweep(t).parent == t.parent


def test_bdp_single_receiver():
    inst = from_power_matrix([[INF, 0.2], [0.2, INF]], 0.05, 1.0)
    tree, trace = bdp(inst, with_trace=True)
    assert tree.parent == {1: 0} and trace.iterations == 0


def test_gbbtc_needs_fixed_power_connectivity():
    inst = collinear()
    with pytest.raises(DisconnectedAtFixedPower):
        gbbtc(inst, p_fixed=0.5)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_baseline_outputs_valid_and_not_below_optimum(seed):
    inst = random_instance(seed, 3, 7)
    opt = network_power(brute_force_optimum(inst), inst)
    trees = [bip(inst), bipsw(inst), bdp(inst)]
    for t in trees:
        v = validate(t)
        assert v and v.complete
        assert network_power(t, inst) >= opt * (1 - 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_sweep_never_raises_power_and_is_idempotent(seed):
    inst = random_instance(seed, 4, 14, sampler=InstanceSampler(side=150))
    t = bip(inst)
    s = sweep(t)
    assert network_power(s, inst) <= network_power(t, inst) + 1e-15
    assert sweep(s).parent == s.parent


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_bdp_starts_from_shortest_paths_and_lowers_transmit_power(seed):
    inst = random_instance(seed, 4, 14, sampler=InstanceSampler(side=150))
    start = BroadcastTree.from_parents(inst, shortest_path_parents(inst))
    tree, trace = bdp(inst, with_trace=True)
    assert trace.outcome == CONVERGED
    assert game_power(tree, TX_ONLY) <= game_power(start, TX_ONLY) + 1e-15
    for s in trace.steps:
        assert s.cost_after < s.cost_before


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000))
def test_gbbtc_fixed_radius_equal_shares(seed):
    inst = random_instance(seed, 4, 12, sampler=InstanceSampler(side=120), fixed_powers=(0.2,))
    tree, trace = gbbtc(inst, 0.2, with_trace=True)
    assert trace.outcome == CONVERGED
    assert validate(tree)
    scheme = CostScheme("ES", fixed_power=0.2, include_circuitry=False)
    for j in tree.transmitters():
        kids = tree.children[j]
        assert all(inst.p_req[i][j] <= 0.2 for i in kids)
        for i in kids:
            assert cost(scheme, i, j, kids, inst) == pytest.approx(0.2 / len(kids))
