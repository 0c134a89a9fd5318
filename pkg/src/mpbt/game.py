"""Cost-sharing game over broadcast trees.

Receivers pick their parent; the parent's power is split among its children
by one of three rules:

* ``MC``: marginal contribution, ``P_j(M) - P_j(M \\ {i})``
* ``SV``: Shapley value of the max-cost (airport) game over ``p_c + p_uni``
* ``ES``: equal share, ``P_j(M) / |M|``

Best-response dynamics move one node at a time until nobody can strictly
lower its cost, an action profile repeats, or the round cap is hit.
"""
from __future__ import annotations

import json
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import EmptyActionSet, InfeasibleChild, NotAChild, ValidationError
from .netmodel import NetworkInstance, network_power
from .tree import BroadcastTree

SCHEMES = ("MC", "SV", "ES")
REL_TOL = 1e-12


@dataclass(frozen=True)
class CostScheme:
    """Sharing rule plus the transmit-power model it is applied to.

    ``fixed_power`` switches to fixed-emission mode: every transmitter spends
    exactly that transmit power and coverage is ``p_req <= fixed_power``.
    ``include_circuitry=False`` drops ``p_c`` from the costs (but not from the
    reported network power), which is how the benchmark heuristics operate.
    """

    kind: str = "MC"
    fixed_power: Optional[float] = None
    include_circuitry: bool = True

    def __post_init__(self):
        kind = self.kind.upper()
        if kind not in SCHEMES:
            raise ValidationError(f"unknown cost scheme {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if self.fixed_power is not None and not self.fixed_power > 0:
            raise ValidationError("fixed_power must be positive")

    @property
    def budget_balanced(self) -> bool:
        return self.kind in ("SV", "ES")

    def unit_power(self, i: int, j: int, inst: NetworkInstance):
        """Power ``j`` would spend serving ``i`` alone (``P^uni`` of the sharing rule)."""
        tx = inst.p_uni[i][j] if self.fixed_power is None else self.fixed_power
        return inst.p_c[j] + tx if self.include_circuitry else tx

    def group_power(self, j: int, members, inst: NetworkInstance):
        """Power of ``j`` as seen by the sharing rule (circuitry per ``include_circuitry``)."""
        if not members:
            return 0
        if self.fixed_power is None:
            tx = max(inst.p_uni[i][j] for i in members)
        else:
            tx = self.fixed_power
        return inst.p_c[j] + tx if self.include_circuitry else tx

    def label(self) -> str:
        s = self.kind
        if self.fixed_power is not None:
            s += f"@{float(self.fixed_power) * 1000:g}mW"
        if not self.include_circuitry:
            s += "-noPc"
        return s


def _check_members(j, members, inst, fixed_power):
    for m in members:
        if not inst.covers(j, m, fixed_power):
            raise InfeasibleChild(f"{m} is outside the coverage of {j}")


def shapley_shares(values) -> list:
    """Shapley value of each player in the cost game ``C(S) = max_{k in S} values[k]``.

    Prefix-sum form over ascending values with an implicit leading 0.
    """
    m = len(values)
    order = sorted(range(m), key=lambda k: values[k])
    shares = [0] * m
    acc = 0
    prev = 0
    for rank, k in enumerate(order, start=1):
        acc = acc + (values[k] - prev) / (m + 1 - rank)
        prev = values[k]
        shares[k] = acc
    return shares


def cost(scheme: CostScheme, i: int, j: int, members, inst: NetworkInstance):
    """Cost of child ``i`` at parent ``j`` whose full child set (``i`` included) is ``members``."""
    if i not in members:
        raise NotAChild(f"{i} is not in the child set of {j}")
    _check_members(j, members, inst, scheme.fixed_power)
    if scheme.kind == "MC":
        rest = [m for m in members if m != i]
        return scheme.group_power(j, members, inst) - scheme.group_power(j, rest, inst)
    if scheme.kind == "ES":
        return scheme.group_power(j, members, inst) / len(members)
    mem = list(members)
    shares = shapley_shares([scheme.unit_power(m, j, inst) for m in mem])
    return shares[mem.index(i)]


def current_cost(scheme: CostScheme, i: int, tree: BroadcastTree):
    j = tree.parent[i]
    return cost(scheme, i, j, tree.children[j], tree.inst)


def action_set(i: int, tree: BroadcastTree, inst: Optional[NetworkInstance] = None, scheme: Optional[CostScheme] = None) -> set[int]:
    """Connected coverers of ``i`` that are not its descendants."""
    inst = inst or tree.inst
    fp = scheme.fixed_power if scheme is not None else tree.fixed_power
    out = set()
    for j in inst.coverers(i, fp):
        r = tree.route.get(j)
        if r is not None and i not in r:
            out.add(j)
    return out


def _improves(new, old) -> bool:
    return old - new > REL_TOL * max(1, abs(old))


def deviation_cost(scheme: CostScheme, i: int, j: int, tree: BroadcastTree):
    """Cost ``i`` would pay after switching to ``j`` (others fixed)."""
    kids = tree.children[j]
    members = kids if i in kids else kids | {i}
    return cost(scheme, i, j, members, tree.inst)


def best_response(i: int, tree: BroadcastTree, scheme: CostScheme, inst: Optional[NetworkInstance] = None):
    """``(new_parent, new_cost)`` if some action strictly beats the current one, else ``None``.

    Ties keep the current parent, then go to the lowest id.
    """
    acts = action_set(i, tree, inst, scheme)
    if not acts:
        raise EmptyActionSet(f"node {i} has no admissible parent")
    cur = tree.parent.get(i)
    if cur is None:
        best_j = min(acts, key=lambda j: (deviation_cost(scheme, i, j, tree), j))
        return best_j, deviation_cost(scheme, i, best_j, tree)
    cur_cost = current_cost(scheme, i, tree)
    best_j, best_c = None, None
    for j in sorted(acts):
        if j == cur:
            continue
        c = deviation_cost(scheme, i, j, tree)
        if best_c is None or c < best_c:
            best_j, best_c = j, c
    if best_j is not None and _improves(best_c, cur_cost):
        return best_j, best_c
    return None


def is_nash_equilibrium(tree: BroadcastTree, scheme: CostScheme, inst: Optional[NetworkInstance] = None):
    """``(True, None)`` at an equilibrium, else ``(False, (node, better_parent))``."""
    for i in tree.inst.receivers:
        br = best_response(i, tree, scheme, inst)
        if br is not None:
            return False, (i, br[0])
    return True, None


# --- potentials ----------------------------------------------------------------

def potential(tree: BroadcastTree, inst: Optional[NetworkInstance] = None):
    """Potential of the MC game: the network power."""
    return network_power(tree, inst or tree.inst)


def game_power(tree: BroadcastTree, scheme: CostScheme):
    """Network power as the sharing rule sees it (equals :func:`potential` for default schemes)."""
    return sum(scheme.group_power(j, kids, tree.inst) for j, kids in tree.children.items() if kids)


def _harmonic(k: int) -> Fraction:
    return sum((Fraction(1, q) for q in range(1, k + 1)), Fraction(0))


def shapley_group_potential(values) -> object:
    """Hart-Mas-Colell potential of the max-cost game on ``values``."""
    vs = sorted(values)
    m = len(vs)
    total = 0
    prev = 0
    for n, v in enumerate(vs, start=1):
        total = total + (v - prev) * _harmonic(m - n + 1)
        prev = v
    return total


def shapley_potential(tree: BroadcastTree, scheme: CostScheme):
    """Exact potential of the SV game (and of ES in fixed-power mode)."""
    inst = tree.inst
    return sum(
        shapley_group_potential([scheme.unit_power(i, j, inst) for i in kids])
        for j, kids in tree.children.items()
        if kids
    )


def scheme_potential(tree: BroadcastTree, scheme: CostScheme):
    """The exact potential of ``scheme``, or ``None`` when none is known (ES with power control)."""
    if scheme.kind == "MC":
        return game_power(tree, scheme)
    if scheme.kind == "SV" or scheme.fixed_power is not None:
        return shapley_potential(tree, scheme)
    return None


def check_exact_potential(tree: BroadcastTree, i: int, j: int, scheme: CostScheme, inst=None):
    """``(delta_cost_i, delta_network_power)`` for moving ``i`` to ``j``; the tree is not modified."""
    before_c = current_cost(scheme, i, tree)
    before_p = game_power(tree, scheme)
    trial = tree.copy()
    trial.apply_action(i, j)
    after_c = current_cost(scheme, i, trial)
    after_p = game_power(trial, scheme)
    return after_c - before_c, after_p - before_p


def budget_balance_residual(j: int, tree: BroadcastTree, scheme: CostScheme, inst=None):
    """Sum of the children's costs at ``j`` minus the power of ``j``."""
    kids = tree.children[j]
    if not kids:
        raise ValidationError(f"{j} has no children")
    total = sum(cost(scheme, i, j, kids, tree.inst) for i in kids)
    return total - scheme.group_power(j, kids, tree.inst)


def overhead_entries(scheme: CostScheme, group_size: int) -> int:
    """How many values a node must learn about a parent before deciding (signalling proxy)."""
    return {"ES": 1, "MC": 2, "SV": group_size}[scheme.kind]


# --- best-response dynamics -----------------------------------------------------

CONVERGED = "ConvergedNE"
CYCLE = "CycleDetected"
CAP = "CapExceeded"


@dataclass
class Step:
    iteration: int
    node: int
    old_parent: int
    new_parent: int
    cost_before: float
    cost_after: float
    potential_before: Optional[float]
    potential_after: Optional[float]
    power_before: float
    power_after: float


@dataclass
class GameTrace:
    scheme: CostScheme
    steps: list[Step] = field(default_factory=list)
    outcome: str = CAP
    rounds: int = 0
    final: Optional[BroadcastTree] = None
    initial_profile: tuple = ()
    cycle: list[tuple] = field(default_factory=list)
    cycle_moves: list[tuple[int, int]] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.steps)

    @property
    def converged(self) -> bool:
        return self.outcome == CONVERGED

    def summary(self) -> dict:
        return {
            "scheme": self.scheme.label(),
            "outcome": self.outcome,
            "rounds": self.rounds,
            "iterations": self.iterations,
            "final_power": float(network_power(self.final, self.final.inst)) if self.final and self.final.is_complete() else None,
            "cycle_length": len(self.cycle_moves),
        }

    def to_jsonl(self) -> str:
        lines = []
        for s in self.steps:
            d = {k: (float(v) if isinstance(v, (int, float)) or hasattr(v, "numerator") else v) for k, v in s.__dict__.items()}
            for k in ("iteration", "node", "old_parent", "new_parent"):
                d[k] = int(getattr(s, k))
            lines.append(json.dumps(d))
        lines.append(json.dumps({"summary": self.summary()}))
        return "\n".join(lines) + "\n"


def run_brd(
    tree: BroadcastTree,
    scheme: CostScheme,
    inst: Optional[NetworkInstance] = None,
    schedule: str = "permutation",
    round_cap: int = 1000,
    seed=0,
) -> GameTrace:
    """Best-response dynamics from ``tree`` (modified in place; also ``trace.final``).

    ``schedule``: ``permutation`` (fresh seeded order every round),
    ``round-robin`` (id order) or ``random`` (``N`` uniform picks per round,
    convergence confirmed by a full equilibrium check).
    """
    inst = inst or tree.inst
    if (tree.fixed_power is None) != (scheme.fixed_power is None) or (
        tree.fixed_power is not None and tree.fixed_power != scheme.fixed_power
    ):
        raise ValidationError("tree and scheme disagree on fixed-power mode")
    if not tree.is_complete():
        raise ValidationError("best-response dynamics need a complete starting tree")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    receivers = inst.receivers
    trace = GameTrace(scheme=scheme, final=tree, initial_profile=tree.profile())
    seen = {tree.profile(): 0}
    history = [tree.profile()]
    moves: list[tuple[int, int]] = []

    for rnd in range(1, round_cap + 1):
        trace.rounds = rnd
        if schedule == "permutation":
            order = [receivers[k] for k in rng.permutation(len(receivers))]
        elif schedule == "round-robin":
            order = receivers
        elif schedule == "random":
            order = [receivers[k] for k in rng.integers(len(receivers), size=len(receivers))]
        else:
            raise ValidationError(f"unknown schedule {schedule!r}")
        changed = False
        for i in order:
            br = best_response(i, tree, scheme, inst)
            if br is None:
                continue
            j, new_c = br
            old = tree.parent[i]
            c0 = current_cost(scheme, i, tree)
            phi0 = scheme_potential(tree, scheme)
            p0 = network_power(tree, inst)
            tree.apply_action(i, j)
            trace.steps.append(
                Step(len(trace.steps) + 1, i, old, j, c0, new_c, phi0, scheme_potential(tree, scheme), p0, network_power(tree, inst))
            )
            changed = True
            prof = tree.profile()
            moves.append((i, j))
            if prof in seen:
                start = seen[prof]
                trace.outcome = CYCLE
                trace.cycle = history[start:] + [prof]
                trace.cycle_moves = moves[start:]
                return trace
            seen[prof] = len(history)
            history.append(prof)
        if not changed:
            if schedule != "random" or is_nash_equilibrium(tree, scheme, inst)[0]:
                trace.outcome = CONVERGED
                return trace
    trace.outcome = CAP
    return trace


def replay_cycle(inst: NetworkInstance, scheme: CostScheme, start_profile: tuple, moves) -> bool:
    """Re-run a recorded cycle: every move must be a strict best response and the profile must recur."""
    receivers = inst.receivers
    parent = {i: p for i, p in zip(receivers, start_profile)}
    tree = BroadcastTree.from_parents(inst, parent, scheme.fixed_power)
    start = tree.profile()
    for i, j in moves:
        br = best_response(i, tree, scheme, inst)
        if br is None or br[0] != j:
            return False
        tree.apply_action(i, j)
    return tree.profile() == start and len(moves) > 0
