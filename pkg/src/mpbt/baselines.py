"""Benchmark heuristics: BIP, the BIPSW sweep, BDP and GBBTC.

As in the original heuristics, circuitry power plays no role while the tree is
built; it only enters when the resulting network power is reported.
"""
from __future__ import annotations

from .errors import Disconnected, DisconnectedAtFixedPower
from .game import CostScheme, run_brd
from .netmodel import NetworkInstance, is_connected
from .tree import BroadcastTree, initialize, shortest_path_parents


def bip(inst: NetworkInstance, include_circuitry: bool = False, fixed_power=None) -> BroadcastTree:
    """Broadcast incremental power: grow from the source, always adding the cheapest extra coverage.

    The increment of a link ``j -> i`` is how much ``j`` must raise its current
    transmit power (plus ``p_c[j]`` for an idle ``j`` when ``include_circuitry``).
    Ties go to the lowest (transmitter, node) pair.
    """
    n = inst.n_nodes
    if not is_connected(inst, fixed_power):
        raise Disconnected("instance is not connected from the source")
    tree = BroadcastTree(inst, fixed_power)
    tx = [0.0] * n
    unconnected = set(inst.receivers)
    while unconnected:
        best = None
        for j in sorted(tree.route):
            for i in sorted(unconnected):
                if not inst.covers(j, i, fixed_power):
                    continue
                need = inst.p_uni[i][j] if fixed_power is None else fixed_power
                inc = max(0.0, need - tx[j])
                if include_circuitry and tx[j] == 0:
                    inc += inst.p_c[j]
                key = (inc, j, i)
                if best is None or key < best[0]:
                    best = (key, need)
        (_, j, i), need = best
        tree.apply_action(i, j, check=False)
        tx[j] = max(tx[j], need)
        unconnected.discard(i)
    return tree


def _tx(tree: BroadcastTree, j: int, without=None) -> float:
    vals = [tree.inst.p_uni[i][j] for i in tree.children[j] if i != without]
    return max(vals) if vals else 0.0


def sweep(tree: BroadcastTree, inst: NetworkInstance | None = None) -> BroadcastTree:
    """Prune links whose child is already inside another transmitter's emission.

    Transmitters are visited by decreasing transmit power. A covered child is
    moved only when this strictly lowers its old parent's transmit power and
    creates no cycle, so network power never rises. Repeats to a fixpoint.
    Returns a new tree.
    """
    inst = inst or tree.inst
    t = tree.copy()
    moved = True
    while moved:
        moved = False
        order = sorted(t.transmitters(), key=lambda j: (-_tx(t, j), j))
        for big in order:
            reach = _tx(t, big)
            if reach == 0:
                continue
            for i in sorted(t.parent):
                old = t.parent[i]
                if old == big or i == big or inst.p_uni[i][big] > reach:
                    continue
                if i in t.route[big]:
                    continue
                if _tx(t, old, without=i) < _tx(t, old):
                    t.apply_action(i, big, check=False)
                    moved = True
    return t


def bipsw(inst: NetworkInstance, include_circuitry: bool = False) -> BroadcastTree:
    return sweep(bip(inst, include_circuitry), inst)


def bdp(inst: NetworkInstance, with_trace: bool = False, round_cap: int = 1000):
    """Broadcast decremental power: shortest-path start, then transmit-power-only MC improvements.

    A node moves when the switch strictly lowers the transmit power it imposes
    on its parent (marginal contribution without circuitry); nodes act in id
    order until a full pass changes nothing.
    """
    parents = shortest_path_parents(inst)
    tree = BroadcastTree.from_parents(inst, parents)
    scheme = CostScheme("MC", include_circuitry=False)
    trace = run_brd(tree, scheme, inst, schedule="round-robin", round_cap=round_cap)
    return (tree, trace) if with_trace else tree


def gbbtc(inst: NetworkInstance, p_fixed: float = 0.2, with_trace: bool = False, round_cap: int = 1000, seed=0):
    """Equal-share game with a common fixed transmit power; costs ignore circuitry.

    Every transmitter emits ``p_fixed``, so the game minimises the number of
    transmissions; convergence is guaranteed in this fixed-power setting.
    """
    if not is_connected(inst, p_fixed):
        raise DisconnectedAtFixedPower(f"not connected at a fixed transmit power of {p_fixed} W")
    scheme = CostScheme("ES", fixed_power=p_fixed, include_circuitry=False)
    tree = initialize(inst, "greedy-join", scheme)
    trace = run_brd(tree, scheme, inst, round_cap=round_cap, seed=seed)
    return (tree, trace) if with_trace else tree
