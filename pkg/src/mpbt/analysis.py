"""Price-of-anarchy machinery, line-topology bounds and the budget-balance misalignment test."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .errors import PreconditionViolated, SchemeNotBudgetBalanced
from .exact import solve_exact
from .files import instance_from_dict, instance_to_dict
from .game import CYCLE, CostScheme, cost, is_nash_equilibrium, run_brd
from .netmodel import InstanceSampler, NetworkInstance, generate_random_instance, is_connected, line_instance, network_power
from .tree import BroadcastTree, initialize


def poa_ratio(ne_tree: BroadcastTree, opt_tree: BroadcastTree, inst: NetworkInstance | None = None) -> float:
    inst = inst or ne_tree.inst
    return network_power(ne_tree, inst) / network_power(opt_tree, inst)


def poa_line_formula(N: int, alpha: float, p_c: float) -> float:
    """Broadcast power over chain power on the evenly spaced line."""
    return (1 + p_c) / (N * (1 / N**alpha + p_c))


def line_pc_threshold(N: int, alpha: float):
    """Published circuitry bound under which the unicast chain is claimed optimal.

    Exact (a ``Fraction``) for integer ``alpha``.
    """
    if N < 2:
        raise PreconditionViolated("the line bound needs N >= 2")
    if float(alpha).is_integer():
        a = int(alpha)
        if N == 2:
            return 1 - Fraction(1, 2 ** (a - 1))
        return (1 - Fraction(1, N ** (a - 1))) / (N - 2)
    if N == 2:
        return 1 - 1 / 2 ** (alpha - 1)
    return (1 - 1 / N ** (alpha - 1)) / (N - 2)


def chain_optimal_pc_bound(N: int, alpha: float):
    """Largest ``p_c`` for which the unicast chain beats merging two adjacent hops.

    Replacing relays ``k+1 -> k+2`` by one transmission from ``k`` covering both
    saves one circuitry term and costs ``(2**alpha - 2) / N**alpha``; the chain
    can only be optimal at or below this value. Coincides with the published
    bound at ``N = 2`` only.
    """
    if N < 2:
        raise PreconditionViolated("the line bound needs N >= 2")
    if float(alpha).is_integer():
        a = int(alpha)
        return Fraction(2**a - 2, N**a)
    return (2**alpha - 2) / N**alpha


def chain_parents(N: int) -> dict[int, int]:
    return {k: k - 1 for k in range(1, N + 1)}


def broadcast_parents(N: int) -> dict[int, int]:
    return {k: 0 for k in range(1, N + 1)}


@dataclass
class LineReport:
    N: int
    alpha: float
    p_c: float
    epsilon: float
    chain_power: float
    bcast_power: float
    optimum_power: float
    chain_optimal: bool
    poa_formula: float
    poa_measured: float
    bcast_is_ne: bool
    witness: tuple | None

    def to_dict(self) -> dict:
        return asdict(self)


def verify_line_instance(N: int, alpha: float, p_c: float, epsilon: float = 0.0, node_limit: int = 10) -> LineReport:
    """Evaluate the unicast chain and the single broadcast on the line with ``N`` receivers.

    Chain optimality is decided by the exact solver; the broadcast profile's
    MC equilibrium status is reported together with an improving deviation
    if one exists.
    """
    if p_c > line_pc_threshold(N, alpha):
        raise PreconditionViolated(f"p_c={p_c} exceeds the line threshold for N={N}, alpha={alpha}")
    inst = line_instance(N, alpha, p_c, epsilon)
    chain = BroadcastTree.from_parents(inst, chain_parents(N))
    bcast = BroadcastTree.from_parents(inst, broadcast_parents(N))
    opt = solve_exact(inst, node_limit)
    chain_p = float(network_power(chain, inst))
    bcast_p = float(network_power(bcast, inst))
    opt_p = float(network_power(opt, inst))
    ne, witness = is_nash_equilibrium(bcast, CostScheme("MC"), inst)
    return LineReport(
        N=N,
        alpha=float(alpha),
        p_c=float(p_c),
        epsilon=float(epsilon),
        chain_power=chain_p,
        bcast_power=bcast_p,
        optimum_power=opt_p,
        chain_optimal=chain_p <= opt_p * (1 + 1e-9),
        poa_formula=poa_line_formula(N, alpha, p_c),
        poa_measured=bcast_p / chain_p,
        bcast_is_ne=ne,
        witness=witness,
    )


def bb_misalignment_check(tree: BroadcastTree, i: int, k: int, scheme: CostScheme, inst: NetworkInstance | None = None) -> bool:
    """Does moving ``i`` from its parent ``j`` to ``k`` cut ``i``'s cost yet raise network power?

    True iff the summed cost increase of the other children of ``j`` and ``k``
    exceeds ``i``'s saving. Under budget balance that surplus is exactly the
    rise in network power. Returns False when the move does not strictly help
    ``i``, so the certificate is vacuous at an equilibrium.
    """
    if not scheme.budget_balanced:
        raise SchemeNotBudgetBalanced(f"{scheme.kind} does not split the parent's power exactly")
    inst = inst or tree.inst
    j = tree.parent[i]
    if k == j:
        return False
    old_j = set(tree.children[j])
    old_k = set(tree.children[k])
    new_j = old_j - {i}
    new_k = old_k | {i}
    saving = cost(scheme, i, j, old_j, inst) - cost(scheme, i, k, new_k, inst)
    if saving <= 0:
        return False
    others = sum(cost(scheme, u, j, new_j, inst) - cost(scheme, u, j, old_j, inst) for u in new_j)
    others += sum(cost(scheme, u, k, new_k, inst) - cost(scheme, u, k, old_k, inst) for u in old_k)
    return others > saving


def misalignment_terms(tree: BroadcastTree, i: int, k: int, scheme: CostScheme, inst: NetworkInstance | None = None):
    """``(delta_cost_i, delta_others, delta_network_power)`` for moving ``i`` to ``k``."""
    inst = inst or tree.inst
    j = tree.parent[i]
    old_j, old_k = set(tree.children[j]), set(tree.children[k])
    new_j, new_k = old_j - {i}, old_k | {i}
    d_i = cost(scheme, i, k, new_k, inst) - cost(scheme, i, j, old_j, inst)
    d_o = sum(cost(scheme, u, j, new_j, inst) - cost(scheme, u, j, old_j, inst) for u in new_j)
    d_o += sum(cost(scheme, u, k, new_k, inst) - cost(scheme, u, k, old_k, inst) for u in old_k)
    trial = tree.copy()
    trial.apply_action(i, k)
    d_p = network_power(trial, inst) - network_power(tree, inst)
    return d_i, d_o, d_p


@dataclass
class CycleWitness:
    instance: NetworkInstance
    start_profile: tuple
    moves: list
    candidates_tried: int

    def to_dict(self) -> dict:
        return {
            "scheme": "ES",
            "instance": instance_to_dict(self.instance, matrix=True),
            "start_profile": list(self.start_profile),
            "moves": [list(m) for m in self.moves],
            "candidates_tried": self.candidates_tried,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CycleWitness":
        return cls(instance_from_dict(d["instance"]), tuple(d["start_profile"]),
                   [tuple(m) for m in d["moves"]], int(d.get("candidates_tried", 0)))


def find_es_cycle(seed=0, max_candidates: int = 100_000, max_nodes: int = 8, round_cap: int = 200) -> CycleWitness | None:
    """Random search for an instance on which equal-share dynamics (with power control) cycle.

    Small geometric instances in squares of random side; each is started from
    the greedy-join tree and run with a random permutation schedule.
    """
    rng = np.random.default_rng(seed)
    scheme = CostScheme("ES")
    for k in range(1, max_candidates + 1):
        n = int(rng.integers(3, max_nodes + 1))
        inst = generate_random_instance(InstanceSampler(side=float(rng.uniform(30.0, 200.0))), n, rng)
        if not is_connected(inst):
            continue
        tree = initialize(inst, "greedy-join", scheme)
        trace = run_brd(tree, scheme, inst, seed=int(rng.integers(2**31)), round_cap=round_cap)
        if trace.outcome == CYCLE:
            return CycleWitness(inst, trace.cycle[0], list(trace.cycle_moves), k)
    return None
