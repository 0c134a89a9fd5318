"""Exact minimum-power trees: a plain enumeration oracle and a depth-first branch-and-bound."""
from __future__ import annotations

import itertools
from collections import deque

import numpy as np

from ..errors import Disconnected, LimitExceeded
from ..netmodel import NetworkInstance, is_connected
from ..tree import BroadcastTree

BRUTE_FORCE_LIMIT = 7


def brute_force_optimum(inst: NetworkInstance) -> BroadcastTree:
    """Enumerate every parent vector over the neighbor sets and keep the cheapest valid tree.

    No pruning. Acyclicity is checked by following parent pointers ``N``
    times; power is the per-transmitter max rule. Ties keep the first vector
    in enumeration order (receivers in id order, last one varying fastest).
    """
    W = inst.receivers
    N = len(W)
    if N > BRUTE_FORCE_LIMIT:
        raise LimitExceeded(f"brute force handles at most {BRUTE_FORCE_LIMIT} receivers, got {N}")
    S, n = inst.source, inst.n_nodes
    options = [sorted(inst.neighbors[i] - {i}) for i in W]
    if any(not o for o in options) or not is_connected(inst):
        raise Disconnected("some receiver has no feasible parent tree")

    grid = np.indices([len(o) for o in options]).reshape(N, -1).T
    par = np.empty_like(grid)
    for c, o in enumerate(options):
        par[:, c] = np.asarray(o)[grid[:, c]]

    full = np.empty((len(par), n), dtype=np.int64)
    full[:, S] = S
    full[:, W] = par
    rows = np.arange(len(par))[:, None]
    cur = full.copy()
    for _ in range(N):
        cur = full[rows, cur]
    ok = np.all(cur == S, axis=1)
    par = par[ok]

    pu = np.array([[float(inst.p_uni[i][j]) for j in range(n)] for i in range(n)])
    link = pu[np.asarray(W)[None, :], par]
    total = np.zeros(len(par))
    for j in range(n):
        mask = par == j
        tx = np.where(mask, link, 0.0).max(axis=1)
        total += np.where(mask.any(axis=1), float(inst.p_c[j]) + tx, 0.0)
    best = int(np.argmin(total))
    return BroadcastTree.from_parents(inst, {i: int(par[best, c]) for c, i in enumerate(W)})


def _hop_order(inst: NetworkInstance) -> list[int]:
    seen = {inst.source}
    order = []
    queue = deque([inst.source])
    while queue:
        j = queue.popleft()
        for i in inst.receivers:
            if i not in seen and j in inst.neighbors[i]:
                seen.add(i)
                order.append(i)
                queue.append(i)
    return order


def solve_exact(inst: NetworkInstance, node_limit: int = 10, incumbent: BroadcastTree | None = None) -> BroadcastTree:
    """Depth-first branch-and-bound over parent assignments.

    Receivers are fixed in breadth-first hop order. A partial assignment is
    dropped once its accumulated power plus the cheapest single increment
    still owed by some unassigned receiver reaches the incumbent; both terms
    only grow as children are added, so the bound is admissible.
    """
    W = inst.receivers
    N = len(W)
    if N > node_limit:
        raise LimitExceeded(f"exact search limited to {node_limit} receivers, got {N}")
    if not is_connected(inst):
        raise Disconnected("instance is not connected from the source")
    n, S = inst.n_nodes, inst.source
    pu = [[float(inst.p_uni[i][j]) for j in range(n)] for i in range(n)]
    pc = [float(x) for x in inst.p_c]
    order = _hop_order(inst)
    cands = {i: sorted(inst.neighbors[i] - {i}) for i in order}

    if incumbent is None:
        from ..game import CostScheme, run_brd
        from ..tree import initialize

        scheme = CostScheme("MC")
        incumbent = initialize(inst, "greedy-join", scheme)
        run_brd(incumbent, scheme, inst, schedule="round-robin")
    best_parent = dict(incumbent.parent)
    best_power = _power(best_parent, pu, pc) * (1 + 1e-12)

    parent: dict[int, int] = {}
    tx = [0.0] * n

    def step_cost(i, j):
        add = max(0.0, pu[i][j] - tx[j])
        return add + (pc[j] if tx[j] == 0.0 else 0.0)

    def makes_cycle(i, j):
        k = j
        while k != S:
            if k == i:
                return True
            k = parent.get(k)
            if k is None:
                return False
        return False

    def dfs(depth, acc):
        nonlocal best_power, best_parent
        if depth == N:
            if acc < best_power:
                best_power, best_parent = acc, dict(parent)
            return
        owed = 0.0
        for u in itertools.islice(order, depth, None):
            owed = max(owed, min(step_cost(u, j) for j in cands[u]))
        if acc + owed >= best_power:
            return
        i = order[depth]
        for _, j in sorted((step_cost(i, j), j) for j in cands[i]):
            inc = step_cost(i, j)
            if acc + inc >= best_power or makes_cycle(i, j):
                continue
            old = tx[j]
            tx[j] = max(old, pu[i][j])
            parent[i] = j
            dfs(depth + 1, acc + inc)
            del parent[i]
            tx[j] = old

    dfs(0, 0.0)
    return BroadcastTree.from_parents(inst, best_parent)


def _power(parent, pu, pc) -> float:
    tx: dict[int, float] = {}
    for i, j in parent.items():
        tx[j] = max(tx.get(j, 0.0), pu[i][j])
    return sum(pc[j] + v for j, v in tx.items())
