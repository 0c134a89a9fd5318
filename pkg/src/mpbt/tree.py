"""Broadcast-tree state: parent choices, child sets and source-first routes."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import CycleWouldForm, Disconnected, NotNeighbor, ParentDisconnected, ValidationError
from .netmodel import NetworkInstance, is_connected


class BroadcastTree:
    """Mutable parent assignment over an immutable instance.

    ``parent`` holds connected receivers only; ``route[k]`` is the source-first
    node tuple ending in ``k``. A tree built with ``fixed_power`` uses that
    emission budget for coverage and power (no power control).
    """

    def __init__(self, inst: NetworkInstance, fixed_power=None):
        self.inst = inst
        self.fixed_power = fixed_power
        self.parent: dict[int, int] = {}
        self.children: dict[int, set[int]] = {j: set() for j in range(inst.n_nodes)}
        self.route: dict[int, tuple[int, ...]] = {inst.source: (inst.source,)}

    @classmethod
    def from_parents(cls, inst: NetworkInstance, parent: dict, fixed_power=None) -> "BroadcastTree":
        """Build from a parent map without feasibility checks; run :func:`validate` afterwards."""
        t = cls(inst, fixed_power)
        for i, j in parent.items():
            t.parent[int(i)] = int(j)
            t.children[int(j)].add(int(i))
        t._rebuild_routes()
        return t

    def copy(self) -> "BroadcastTree":
        t = BroadcastTree(self.inst, self.fixed_power)
        t.parent = dict(self.parent)
        t.children = {j: set(c) for j, c in self.children.items()}
        t.route = dict(self.route)
        return t

    @property
    def source(self) -> int:
        return self.inst.source

    @property
    def connected(self) -> set[int]:
        return set(self.route)

    def is_complete(self) -> bool:
        return len(self.route) == self.inst.n_nodes

    def transmitters(self) -> list[int]:
        return [j for j, c in self.children.items() if c]

    def profile(self) -> tuple:
        """Action profile: parent of every receiver in id order (``None`` when unconnected)."""
        return tuple(self.parent.get(k) for k in self.inst.receivers)

    def _rebuild_routes(self) -> None:
        self.route = {self.source: (self.source,)}
        stack = [self.source]
        while stack:
            j = stack.pop()
            for i in self.children[j]:
                if i in self.route:
                    continue
                self.route[i] = self.route[j] + (i,)
                stack.append(i)

    def descendants(self, i: int) -> set[int]:
        """Every node whose route passes through ``i``, ``i`` excluded."""
        return {k for k, r in self.route.items() if k != i and i in r}

    def apply_action(self, i: int, j: int, check: bool = True) -> None:
        """Make ``j`` the parent of ``i`` and refresh the routes of ``i``'s subtree."""
        if i == self.source:
            raise ValidationError("the source has no parent")
        old = self.parent.get(i)
        if old == j:
            return
        if check:
            if not self.inst.covers(j, i, self.fixed_power):
                raise NotNeighbor(f"{j} cannot reach {i}")
            if j not in self.route:
                raise ParentDisconnected(f"{j} is not connected to the source")
            if i in self.route[j]:
                raise CycleWouldForm(f"{j} is a descendant of {i}")
        if old is not None:
            self.children[old].discard(i)
        self.parent[i] = j
        self.children[j].add(i)
        if j not in self.route:
            return
        self.route[i] = self.route[j] + (i,)
        stack = [i]
        while stack:
            u = stack.pop()
            for c in self.children[u]:
                self.route[c] = self.route[u] + (c,)
                stack.append(c)

    def to_dict(self) -> dict:
        return {"source": self.source, "parent": {str(k): v for k, v in sorted(self.parent.items())}}


@dataclass
class Verdict:
    valid: bool
    complete: bool
    violations: list[str] = field(default_factory=list)

    def __bool__(self):
        return self.valid


def validate(tree: BroadcastTree, inst: Optional[NetworkInstance] = None) -> Verdict:
    """Check completeness, acyclicity, link feasibility and route/child consistency."""
    inst = inst or tree.inst
    problems = []
    src = inst.source
    if src in tree.parent:
        problems.append("source has a parent")
    for i, j in tree.parent.items():
        if i not in tree.children.get(j, ()):
            problems.append(f"child set of {j} is missing {i}")
        if not inst.covers(j, i, tree.fixed_power):
            problems.append(f"infeasible edge {j}->{i}")
    for j, kids in tree.children.items():
        for i in kids:
            if tree.parent.get(i) != j:
                problems.append(f"{i} listed under {j} but its parent is {tree.parent.get(i)}")
    # walk parent chains independently of the stored routes
    for i in tree.parent:
        seen = [i]
        k = i
        while k != src:
            k = tree.parent.get(k)
            if k is None:
                break
            if k in seen:
                problems.append(f"cycle through {i}: {seen + [k]}")
                break
            seen.append(k)
        else:
            walked = tuple(reversed(seen))
            if tree.route.get(i) != walked:
                problems.append(f"route of {i} is {tree.route.get(i)}, walk gives {walked}")
    for k, r in tree.route.items():
        if len(set(r)) != len(r):
            problems.append(f"route of {k} repeats a node")
    complete = len(tree.parent) == inst.n_nodes - 1 and tree.is_complete()
    if not complete:
        missing = sorted(set(range(inst.n_nodes)) - set(tree.route))
        problems.append(f"unconnected receivers: {missing}")
    return Verdict(not problems, complete, problems)


def descendants(tree: BroadcastTree, i: int) -> set[int]:
    return tree.descendants(i)


def apply_action(tree: BroadcastTree, i: int, j: int) -> BroadcastTree:
    tree.apply_action(i, j)
    return tree


# --- initial trees ------------------------------------------------------------

def shortest_path_parents(inst: NetworkInstance, fixed_power=None) -> dict[int, int]:
    """Bellman-Ford minimum-power routes from the source (edge weight = unicast power)."""
    n = inst.n_nodes
    dist = [float("inf")] * n
    parent: dict[int, int] = {}
    dist[inst.source] = 0.0
    edges = [
        (j, i, float(inst.p_uni[i][j] if fixed_power is None else fixed_power))
        for i in range(n)
        for j in inst.coverers(i, fixed_power)
    ]
    for _ in range(n - 1):
        changed = False
        for j, i, w in edges:
            if dist[j] + w < dist[i] or (dist[j] + w == dist[i] and i in parent and j < parent[i]):
                if dist[j] + w < dist[i]:
                    changed = True
                dist[i] = dist[j] + w
                parent[i] = j
        if not changed:
            break
    if len(parent) != n - 1:
        raise Disconnected("some receivers are unreachable from the source")
    return parent


def _greedy_join(inst: NetworkInstance, scheme) -> BroadcastTree:
    from .game import cost  # local import: game depends on tree

    tree = BroadcastTree(inst, scheme.fixed_power)
    fp = scheme.fixed_power
    unconnected = set(inst.receivers)
    cand: dict[tuple[int, int], object] = {}

    def price(u, j):
        return cost(scheme, u, j, tree.children[j] | {u}, inst)

    for u in unconnected:
        if inst.covers(inst.source, u, fp):
            cand[(u, inst.source)] = price(u, inst.source)
    while unconnected:
        if not cand:
            raise Disconnected(f"receivers {sorted(unconnected)} are unreachable from the source")
        (u, j), _ = min(cand.items(), key=lambda kv: (kv[1], kv[0][0], kv[0][1]))
        tree.apply_action(u, j, check=False)
        unconnected.discard(u)
        for key in [k for k in cand if k[0] == u]:
            del cand[key]
        for key in [k for k in cand if k[1] == j]:
            cand[key] = price(*key)
        for w in unconnected:
            if inst.covers(u, w, fp):
                cand[(w, u)] = price(w, u)
    return tree


def initialize(inst: NetworkInstance, policy: str = "greedy-join", scheme=None) -> BroadcastTree:
    """A complete feasible starting tree.

    ``greedy-join`` repeatedly attaches the unconnected node whose cheapest
    join (under ``scheme``, default MC) is smallest overall; ``bip-init`` uses
    the incremental-power heuristic; ``min-power-path`` the shortest-path tree.
    """
    from .game import CostScheme

    scheme = scheme or CostScheme("MC")
    if not is_connected(inst, scheme.fixed_power):
        raise Disconnected("instance is not connected from the source")
    if policy == "greedy-join":
        return _greedy_join(inst, scheme)
    if policy == "bip-init":
        from .baselines import bip

        return bip(inst, fixed_power=scheme.fixed_power)
    if policy == "min-power-path":
        return BroadcastTree.from_parents(inst, shortest_path_parents(inst, scheme.fixed_power), scheme.fixed_power)
    raise ValidationError(f"unknown initialisation policy {policy!r}")


def to_dot(tree: BroadcastTree) -> str:
    lines = ["digraph broadcast {", f'  {tree.source} [shape=doublecircle];']
    for i, j in sorted(tree.parent.items()):
        lines.append(f"  {j} -> {i};")
    lines.append("}")
    return "\n".join(lines) + "\n"
