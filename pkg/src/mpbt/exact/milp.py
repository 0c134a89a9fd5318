"""Integer program for the minimum-power broadcast tree and the tree reconstruction from its solution.

Variables (``i, l`` receivers, ``j`` any node, ``i != j``):

``t_i_j``  binary, 1 iff ``i`` is the child of ``j`` needing the most power
``y_l_j``  continuous, 1 iff ``l`` is inside ``j``'s emission (``y_j = R_j^T t_j``)
``d_i_j``  continuous >= 0, number of nodes whose message flows over ``j -> i``

Blocks: ``a`` one transmit level per node (exactly one at the source),
``b`` downstream balance (``N`` out of the source, net ``-1`` at receivers),
``c`` coverage ``y``, ``d`` flow only on covered links. ``t_j_j`` is never
created, and pairs outside the power budget have ``t`` fixed to 0.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..errors import Disconnected, InfeasibleSolution
from ..netmodel import NetworkInstance, is_connected
from ..tree import BroadcastTree, validate


INF = float("inf")


def tname(i, j):
    return f"t_{i}_{j}"


def dname(i, j):
    return f"d_{i}_{j}"


def yname(i, j):
    return f"y_{i}_{j}"


@dataclass
class Constraint:
    name: str
    coeffs: dict[str, float]
    sense: str  # "<=", "=", ">="
    rhs: float


@dataclass
class MilpModel:
    """A linear model: objective, rows, bounds and the binary set.

    ``reach`` maps every node to its reachability matrix (rows/cols follow
    ``receivers``). Both are empty for a model read back from an LP file.
    """

    objective: dict[str, float]
    constraints: list[Constraint]
    bounds: dict[str, tuple[float, float]]
    binaries: list[str]
    variables: list[str]
    receivers: list[int] = field(default_factory=list)
    source: int | None = None
    reach: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def t_vars(self) -> list[str]:
        return [v for v in self.variables if v.startswith("t_")]

    @property
    def d_vars(self) -> list[str]:
        return [v for v in self.variables if v.startswith("d_")]

    def same_as(self, other: "MilpModel", tol: float = 1e-12) -> bool:
        """Structural equality of objective, rows, bounds and integrality."""
        def close(a, b):
            return a.keys() == b.keys() and all(abs(a[k] - b[k]) <= tol * max(1.0, abs(a[k])) for k in a)

        if set(self.variables) != set(other.variables) or set(self.binaries) != set(other.binaries):
            return False
        if not close(self.objective, other.objective):
            return False
        if self.bounds != other.bounds:
            return False
        mine = {c.name: c for c in self.constraints}
        theirs = {c.name: c for c in other.constraints}
        if mine.keys() != theirs.keys():
            return False
        for k, c in mine.items():
            o = theirs[k]
            if c.sense != o.sense or abs(c.rhs - o.rhs) > tol or not close(c.coeffs, o.coeffs):
                return False
        return True


@dataclass
class MilpSolution:
    values: dict[str, float]
    objective_value: float

    @property
    def t_values(self) -> dict[str, float]:
        return {k: v for k, v in self.values.items() if k.startswith("t_")}

    @property
    def d_values(self) -> dict[str, float]:
        return {k: v for k, v in self.values.items() if k.startswith("d_")}


def reachability_matrix(inst: NetworkInstance, j: int) -> np.ndarray:
    """Row ``i``: receivers that ``j`` reaches for free once it transmits at ``p_uni[i][j]``.

    Rows follow the receivers in id order; the row and column of ``j`` itself
    are zero, as is every row whose receiver ``j`` cannot reach.
    """
    W = inst.receivers
    R = np.zeros((len(W), len(W)), dtype=int)
    for a, i in enumerate(W):
        if i == j or j not in inst.neighbors[i]:
            continue
        level = inst.p_uni[i][j]
        for b, l in enumerate(W):
            if l != j and inst.p_uni[l][j] <= level:
                R[a, b] = 1
    return R


def build_milp(inst: NetworkInstance) -> MilpModel:
    if not is_connected(inst):
        raise Disconnected("the MILP needs every receiver reachable from the source")
    W = inst.receivers
    N = len(W)
    S = inst.source
    Q = list(range(inst.n_nodes))
    variables, binaries = [], []
    bounds: dict[str, tuple[float, float]] = {}
    objective: dict[str, float] = {}
    reach = {j: reachability_matrix(inst, j) for j in Q}

    for j in Q:
        for i in W:
            if i == j:
                continue
            v = tname(i, j)
            variables.append(v)
            binaries.append(v)
            if j in inst.neighbors[i]:
                bounds[v] = (0.0, 1.0)
                objective[v] = float(inst.p_c[j] + inst.p_uni[i][j])
            else:
                bounds[v] = (0.0, 0.0)
    for j in Q:
        for l in W:
            if l != j:
                variables.append(yname(l, j))
                bounds[yname(l, j)] = (0.0, INF)
    for j in Q:
        for i in W:
            if i != j:
                variables.append(dname(i, j))
                bounds[dname(i, j)] = (0.0, INF)

    rows: list[Constraint] = []
    for j in Q:
        coeffs = {tname(i, j): 1.0 for i in W if i != j}
        rows.append(Constraint(f"a_{j}", coeffs, "=" if j == S else "<=", 1.0))
    for j in Q:
        coeffs: dict[str, float] = {}
        for i in W:
            if i != j:
                coeffs[dname(i, j)] = coeffs.get(dname(i, j), 0.0) + 1.0
        if j != S:
            for k in Q:
                if k != j:
                    coeffs[dname(j, k)] = coeffs.get(dname(j, k), 0.0) - 1.0
        rows.append(Constraint(f"b_{j}", coeffs, "=", float(N) if j == S else -1.0))
    for j in Q:
        R = reach[j]
        for b, l in enumerate(W):
            if l == j:
                continue
            coeffs = {yname(l, j): 1.0}
            for a, i in enumerate(W):
                if i != j and R[a, b]:
                    coeffs[tname(i, j)] = coeffs.get(tname(i, j), 0.0) - 1.0
            rows.append(Constraint(f"c_{l}_{j}", coeffs, "=", 0.0))
    for j in Q:
        for i in W:
            if i != j:
                rows.append(Constraint(f"dcap_{i}_{j}", {dname(i, j): 1.0, yname(i, j): -float(N)}, "<=", 0.0))
    return MilpModel(objective, rows, bounds, binaries, variables, list(W), S, reach)


def check_solution(model: MilpModel, sol: MilpSolution, tol: float = 1e-6) -> list[str]:
    """Names of violated rows/bounds/integrality (empty when feasible)."""
    bad = []
    x = sol.values
    for v in model.variables:
        val = x.get(v, 0.0)
        lo, hi = model.bounds.get(v, (0.0, float("inf")))
        if val < lo - tol or val > hi + tol:
            bad.append(f"bound {v}={val}")
    for v in model.binaries:
        val = x.get(v, 0.0)
        if abs(val - round(val)) > tol:
            bad.append(f"integrality {v}={val}")
    for c in model.constraints:
        lhs = sum(a * x.get(v, 0.0) for v, a in c.coeffs.items())
        if (c.sense == "=" and abs(lhs - c.rhs) > tol) or (c.sense == "<=" and lhs > c.rhs + tol) or (
            c.sense == ">=" and lhs < c.rhs - tol
        ):
            bad.append(f"row {c.name}: {lhs} {c.sense} {c.rhs}")
    return bad


def objective_value(model: MilpModel, values: dict[str, float]) -> float:
    return float(sum(c * values.get(v, 0.0) for v, c in model.objective.items()))


def solution_from_tree(inst: NetworkInstance, tree: BroadcastTree, model: MilpModel | None = None) -> MilpSolution:
    """Encode a complete tree as ``t``/``y``/``d`` values (the max-power child of each transmitter gets ``t = 1``)."""
    model = model or build_milp(inst)
    values = {v: 0.0 for v in model.variables}
    W = inst.receivers
    col = {l: b for b, l in enumerate(W)}
    for j, kids in tree.children.items():
        if not kids:
            continue
        top = max(sorted(kids), key=lambda i: inst.p_uni[i][j])
        values[tname(top, j)] = 1.0
        R = model.reach[j]
        for l in W:
            if l != j and R[col[top], col[l]]:
                values[yname(l, j)] = 1.0
    for i, j in tree.parent.items():
        values[dname(i, j)] = float(1 + len(tree.descendants(i)))
    return MilpSolution(values, objective_value(model, values))


def coverage_from_t(inst: NetworkInstance, t_values: dict[str, float], tol: float = 1e-6) -> dict[int, list[int]]:
    """``y_j = R_j^T t_j`` evaluated from ``t`` alone: who each node covers."""
    W = inst.receivers
    out: dict[int, list[int]] = {}
    for j in range(inst.n_nodes):
        R = reachability_matrix(inst, j)
        t = np.array([_binary(t_values.get(tname(i, j), 0.0), tol) if i != j else 0 for i in W])
        y = R.T @ t
        out[j] = [l for b, l in enumerate(W) if y[b] != 0]
    return out


def _binary(v: float, tol: float) -> int:
    r = round(v)
    if abs(v - r) > tol or r not in (0, 1):
        raise InfeasibleSolution(f"non-binary transmission value {v}")
    return int(r)


def tree_from_milp_solution(inst: NetworkInstance, sol: MilpSolution, tol: float = 1e-6) -> BroadcastTree:
    """Walk from the source over covered links; each node joins the first visited transmitter covering it."""
    cover = coverage_from_t(inst, sol.t_values, tol)
    tree = BroadcastTree(inst)
    connected = {inst.source}
    queue = deque([inst.source])
    while queue:
        j = queue.popleft()
        for i in cover[j]:
            if i not in connected:
                tree.apply_action(i, j, check=False)
                connected.add(i)
                queue.append(i)
    if len(connected) != inst.n_nodes:
        missing = sorted(set(range(inst.n_nodes)) - connected)
        raise InfeasibleSolution(f"solution leaves {missing} uncovered")
    verdict = validate(tree, inst)
    if not verdict:
        raise InfeasibleSolution("; ".join(verdict.violations))
    return tree


def solve_milp(model: MilpModel, time_limit: float | None = None) -> MilpSolution:
    """Solve with the HiGHS branch-and-cut shipped in SciPy."""
    from scipy.optimize import Bounds, LinearConstraint, milp

    idx = {v: k for k, v in enumerate(model.variables)}
    n = len(idx)
    c = np.zeros(n)
    for v, a in model.objective.items():
        c[idx[v]] = a
    A = np.zeros((len(model.constraints), n))
    lo = np.empty(len(model.constraints))
    hi = np.empty(len(model.constraints))
    for r, con in enumerate(model.constraints):
        for v, a in con.coeffs.items():
            A[r, idx[v]] += a
        lo[r] = con.rhs if con.sense in ("=", ">=") else -np.inf
        hi[r] = con.rhs if con.sense in ("=", "<=") else np.inf
    lb = np.array([model.bounds.get(v, (0.0, np.inf))[0] for v in model.variables])
    ub = np.array([model.bounds.get(v, (0.0, np.inf))[1] for v in model.variables])
    integrality = np.array([1 if v in set(model.binaries) else 0 for v in model.variables])
    options = {"time_limit": time_limit} if time_limit else {}
    res = milp(c, constraints=LinearConstraint(A, lo, hi), bounds=Bounds(lb, ub), integrality=integrality, options=options)
    if res.x is None:
        raise InfeasibleSolution(f"MILP solver finished without a solution: {res.message}")
    values = {v: float(res.x[k]) for v, k in idx.items()}
    for v in model.binaries:
        values[v] = float(round(values[v]))
    return MilpSolution(values, objective_value(model, values))
