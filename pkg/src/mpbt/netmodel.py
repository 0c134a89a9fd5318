"""Node placement, path-loss channel and the power bookkeeping of a broadcast tree.

All powers are in watts. Conversions from dB / dBm happen only when reading
configuration (see :func:`db_to_linear`, :func:`dbm_to_watts`).

A :class:`NetworkInstance` is built once and never mutated; the unicast power
matrix is indexed ``p_uni[i][j]`` = power transmitter ``j`` needs to reach
receiver ``i`` (``inf`` when ``j`` cannot reach ``i`` within ``p_max[j]``).
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DuplicateNodeId, InfeasibleChild, InvalidTree, SourceMissing, ValidationError

INFEASIBLE = math.inf


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


@dataclass(frozen=True)
class NodeParams:
    id: int
    position: Optional[tuple[float, float]]
    p_max: float
    p_c: float
    eta: float = 0.3

    def __post_init__(self):
        if not self.p_max > 0:
            raise ValidationError(f"node {self.id}: p_max must be positive, got {self.p_max}")
        if self.p_c < 0:
            raise ValidationError(f"node {self.id}: p_c must be non-negative, got {self.p_c}")
        if not 0 < self.eta < 1:
            raise ValidationError(f"node {self.id}: eta must lie in (0, 1), got {self.eta}")


@dataclass(frozen=True)
class ChannelParams:
    """Path-loss channel and reception threshold (linear units)."""

    wavelength: float = 0.125
    l0: float = 1.0
    alpha: float = 3.0
    gamma_th: float = 10.0
    sigma2: float = 1e-12

    def __post_init__(self):
        for name in ("wavelength", "l0", "alpha", "gamma_th", "sigma2"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"channel parameter {name} must be positive")

    @classmethod
    def from_db(cls, wavelength=0.125, l0=1.0, alpha=3.0, gamma_th_db=10.0, sigma2_dbm=-90.0):
        return cls(wavelength, l0, alpha, db_to_linear(gamma_th_db), dbm_to_watts(sigma2_dbm))


def channel_gain(dist: float, channel: ChannelParams) -> float:
    """Power gain of a link of length ``dist`` metres.

    Distances below the reference distance are clamped to it so that
    co-located nodes keep a finite required power.
    """
    d = max(dist, channel.l0)
    return (channel.wavelength / (4.0 * math.pi * channel.l0)) ** 2 * (channel.l0 / d) ** channel.alpha


@dataclass(frozen=True, eq=False)
class NetworkInstance:
    nodes: tuple[NodeParams, ...]
    source: int
    channel: Optional[ChannelParams]
    gain: Optional[np.ndarray]
    p_req: tuple[tuple, ...]
    p_uni: tuple[tuple, ...]
    neighbors: tuple[frozenset, ...]
    p_c: tuple = field(init=False)
    p_max: tuple = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "p_c", tuple(nd.p_c for nd in self.nodes))
        object.__setattr__(self, "p_max", tuple(nd.p_max for nd in self.nodes))

    @property
    def n_nodes(self) -> int:
        """|Q|, source included."""
        return len(self.nodes)

    @property
    def receivers(self) -> list[int]:
        return [k for k in range(len(self.nodes)) if k != self.source]

    def covers(self, j: int, i: int, fixed_power=None) -> bool:
        """True if ``j`` can reach ``i``; with ``fixed_power`` that budget replaces ``p_max[j]``."""
        if i == j:
            return False
        if fixed_power is None:
            return j in self.neighbors[i]
        return self.p_req[i][j] <= fixed_power

    def coverers(self, i: int, fixed_power=None) -> list[int]:
        if fixed_power is None:
            return sorted(self.neighbors[i])
        return [j for j in range(self.n_nodes) if self.covers(j, i, fixed_power)]

    def mean_power_budget(self) -> float:
        """Empirical mean of ``p_c + p_max`` over all nodes (normaliser of reported power)."""
        return float(sum(float(c) + float(m) for c, m in zip(self.p_c, self.p_max)) / self.n_nodes)

    def p_uni_matrix(self) -> np.ndarray:
        return np.array(self.p_uni, dtype=float)


def _check_ids(nodes: Sequence[NodeParams], source: int) -> None:
    ids = [nd.id for nd in nodes]
    if len(set(ids)) != len(ids):
        dup = sorted({x for x in ids if ids.count(x) > 1})
        raise DuplicateNodeId(f"duplicate node ids: {dup}")
    if sorted(ids) != list(range(len(ids))):
        raise ValidationError("node ids must be 0..n-1")
    if source not in ids:
        raise SourceMissing(f"source {source} is not a node id")
    if len(ids) < 2:
        raise ValidationError("an instance needs at least two nodes")


def _finish(nodes, source, channel, gain, p_req) -> NetworkInstance:
    n = len(nodes)
    p_uni = []
    neighbors = []
    for i in range(n):
        row = []
        nb = set()
        for j in range(n):
            if i != j and p_req[i][j] <= nodes[j].p_max:
                row.append(p_req[i][j])
                nb.add(j)
            else:
                row.append(INFEASIBLE)
        p_uni.append(tuple(row))
        neighbors.append(frozenset(nb))
    return NetworkInstance(
        nodes=tuple(nodes),
        source=source,
        channel=channel,
        gain=gain,
        p_req=tuple(tuple(r) for r in p_req),
        p_uni=tuple(p_uni),
        neighbors=tuple(neighbors),
    )


def build_instance(nodes: Sequence[NodeParams], source: int, channel: ChannelParams) -> NetworkInstance:
    """Materialise gains, required/unicast powers and neighbour sets for a placed node set."""
    nodes = sorted(nodes, key=lambda nd: nd.id)
    _check_ids(nodes, source)
    if any(nd.position is None for nd in nodes):
        raise ValidationError("geometric instances need a position for every node")
    pos = np.array([nd.position for nd in nodes], dtype=float)
    n = len(nodes)
    dist = np.sqrt(((pos[:, None, :] - pos[None, :, :]) ** 2).sum(axis=-1))
    gain = np.empty((n, n))
    p_req = [[INFEASIBLE] * n for _ in range(n)]
    k = channel.gamma_th * channel.sigma2
    for i in range(n):
        for j in range(n):
            gain[i, j] = channel_gain(dist[i, j], channel)
            if i != j:
                p_req[i][j] = k / (nodes[j].eta * gain[i, j])
    gain.setflags(write=False)
    return _finish(nodes, source, channel, gain, p_req)


def required_unicast_power(i: int, j: int, inst: NetworkInstance) -> float:
    """Transmit power ``j`` needs so that ``i`` sees the target SNR (amplifier losses included)."""
    if i == j:
        raise ValidationError("a node does not transmit to itself")
    if inst.channel is None or inst.gain is None:
        return inst.p_req[i][j]
    ch = inst.channel
    return ch.gamma_th * ch.sigma2 / (inst.nodes[j].eta * inst.gain[i, j])


def from_power_matrix(p_req, p_c, p_max, source: int = 0, exact: bool = False) -> NetworkInstance:
    """Abstract instance straight from a required-power matrix ``p_req[i][j]``.

    With ``exact=True`` every number is converted to :class:`fractions.Fraction`
    so downstream cost arithmetic is rational. Missing links may be given as
    ``None`` or ``inf``.
    """
    n = len(p_req)
    conv = (lambda v: Fraction(v)) if exact else float

    def cell(v):
        if v is None or (isinstance(v, float) and math.isinf(v)):
            return INFEASIBLE
        return conv(v)

    if not isinstance(p_c, (list, tuple)):
        p_c = [p_c] * n
    if not isinstance(p_max, (list, tuple)):
        p_max = [p_max] * n
    nodes = [NodeParams(k, None, conv(p_max[k]), conv(p_c[k])) for k in range(n)]
    _check_ids(nodes, source)
    req = [[INFEASIBLE if i == j else cell(p_req[i][j]) for j in range(n)] for i in range(n)]
    return _finish(nodes, source, None, None, req)


def line_instance(n_receivers: int, alpha: float, p_c: float, epsilon: float = 0.0, exact: bool = False) -> NetworkInstance:
    """Source at 0 and ``n_receivers`` nodes evenly spaced at ``k/N`` on the unit segment.

    Powers are normalised: a link of length ``d`` costs ``d**alpha`` and every
    node has ``p_max = 1``, so all links are feasible. ``epsilon`` is added to
    every link whose transmitter is not the source (a perturbation knob for the
    bad-equilibrium construction; 0 leaves the geometry untouched).
    """
    if n_receivers < 2:
        raise ValidationError("line instance needs N >= 2 receivers")
    n = n_receivers + 1
    if exact:
        step = Fraction(1, n_receivers)
        alpha_v = Fraction(alpha)
        if alpha_v.denominator != 1:
            raise ValidationError("exact line instances need an integer path-loss exponent")
        pw = lambda d: d ** int(alpha_v)
        eps = Fraction(epsilon)
        pc = Fraction(p_c)
    else:
        step = 1.0 / n_receivers
        pw = lambda d: d ** alpha
        eps = epsilon
        pc = p_c
    req = []
    for i in range(n):
        row = []
        for j in range(n):
            if i == j:
                row.append(INFEASIBLE)
            else:
                v = pw(abs(i - j) * step)
                if j != 0:
                    v = v + eps
                row.append(v)
        req.append(row)
    return from_power_matrix(req, pc, 1, source=0, exact=exact)


# --- power bookkeeping -------------------------------------------------------

def node_power(j: int, children: Iterable[int], inst: NetworkInstance, fixed_power=None):
    """Total power at ``j`` serving ``children``: circuitry plus the largest unicast power.

    Zero when ``children`` is empty. With ``fixed_power`` the transmit part is
    that constant instead of the max rule.
    """
    best = None
    for i in children:
        if not inst.covers(j, i, fixed_power):
            raise InfeasibleChild(f"node {i} is outside the coverage of {j}")
        v = inst.p_uni[i][j] if fixed_power is None else fixed_power
        if best is None or v > best:
            best = v
    if best is None:
        return 0
    return inst.p_c[j] + best


def network_power(tree, inst: NetworkInstance):
    """Sum of node powers over every node of a complete tree."""
    if len(tree.parent) != inst.n_nodes - 1:
        raise InvalidTree("network power is defined for complete trees only")
    return sum(node_power(j, tree.children[j], inst, tree.fixed_power) for j in range(inst.n_nodes))


def network_power_from_parents(parent: dict, inst: NetworkInstance, fixed_power=None):
    """Independent recomputation from a bare parent map (used as a cross-check)."""
    tx = {}
    for i, j in parent.items():
        v = inst.p_uni[i][j] if fixed_power is None else fixed_power
        tx[j] = max(tx.get(j, v), v)
    return sum(inst.p_c[j] + v for j, v in tx.items())


def is_connected(inst: NetworkInstance, fixed_power=None) -> bool:
    return len(reachable_from_source(inst, fixed_power)) == inst.n_nodes


def reachable_from_source(inst: NetworkInstance, fixed_power=None) -> set[int]:
    seen = {inst.source}
    queue = deque([inst.source])
    n = inst.n_nodes
    while queue:
        j = queue.popleft()
        for i in range(n):
            if i not in seen and inst.covers(j, i, fixed_power):
                seen.add(i)
                queue.append(i)
    return seen


# --- random instances --------------------------------------------------------

@dataclass(frozen=True)
class InstanceSampler:
    """Distribution of random instances (uniform placement in a square)."""

    side: float = 250.0
    p_max_range: tuple[float, float] = (0.15, 0.25)
    p_c_range: tuple[float, float] = (0.05, 0.10)
    eta: float = 0.3
    channel: ChannelParams = field(default_factory=ChannelParams.from_db)


def generate_random_instance(sampler: InstanceSampler, n_nodes: int, seed) -> NetworkInstance:
    """One draw of ``n_nodes`` nodes (source included); fully determined by ``seed``."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pos = rng.uniform(0.0, sampler.side, size=(n_nodes, 2))
    p_max = rng.uniform(*sampler.p_max_range, size=n_nodes)
    p_c = rng.uniform(*sampler.p_c_range, size=n_nodes)
    source = int(rng.integers(n_nodes))
    nodes = [
        NodeParams(k, (float(pos[k, 0]), float(pos[k, 1])), float(p_max[k]), float(p_c[k]), sampler.eta)
        for k in range(n_nodes)
    ]
    return build_instance(nodes, source, sampler.channel)


def generate_connected_instance(sampler: InstanceSampler, n_nodes: int, seed, fixed_powers=(), max_tries: int = 10_000):
    """Redraw until every receiver is reachable (also under each power in ``fixed_powers``).

    Returns ``(instance, draws)``.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    for attempt in range(1, max_tries + 1):
        inst = generate_random_instance(sampler, n_nodes, rng)
        if is_connected(inst) and all(is_connected(inst, fp) for fp in fixed_powers):
            return inst, attempt
    raise ValidationError(f"no connected instance with {n_nodes} nodes after {max_tries} draws")
