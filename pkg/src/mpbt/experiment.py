"""Seeded Monte-Carlo sweeps over random instances and the line-topology grid."""
from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import baselines
from .analysis import line_pc_threshold, verify_line_instance
from .errors import DisconnectedAtFixedPower, IoError, MPBTError, ValidationError
from .exact import solve_exact
from .game import CostScheme, run_brd
from .netmodel import ChannelParams, InstanceSampler, NetworkInstance, generate_connected_instance, is_connected, network_power
from .tree import BroadcastTree, initialize

ALGORITHMS = ("csg-mc", "csg-sv", "csg-es", "bip", "bipsw", "bdp", "gbbtc", "exact")
FIXED_POWER_ALGOS = ("csg-es", "gbbtc")


@dataclass
class ExperimentConfig:
    node_counts: list[int]
    runs: int
    algorithms: list[str]
    seed: int
    side: float = 250.0
    fixed_power: float = 0.2
    p_max_range: tuple[float, float] = (0.15, 0.25)
    p_c_range: tuple[float, float] = (0.05, 0.10)
    eta: float = 0.3
    channel: dict = field(default_factory=dict)
    round_cap: int = 1000
    exact_limit: int = 10
    benchmark_circuitry: bool = False
    record_wall_time: bool = False
    out_csv: str | None = None
    out_dir: str | None = None

    def __post_init__(self):
        if self.seed is None:
            raise ValidationError("a master seed is required")
        if self.runs < 1:
            raise ValidationError("runs must be at least 1")
        if not self.node_counts or any(int(n) < 2 for n in self.node_counts):
            raise ValidationError("node counts must all be at least 2")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad or not self.algorithms:
            raise ValidationError(f"unknown algorithms {bad}; choose from {ALGORITHMS}")
        lo, hi = self.p_max_range
        clo, chi = self.p_c_range
        if not (0 < lo <= hi) or not (0 <= clo <= chi):
            raise ValidationError("power ranges must be ordered and positive")
        if self.side <= 0 or self.fixed_power <= 0:
            raise ValidationError("area side and fixed power must be positive")
        self.node_counts = [int(n) for n in self.node_counts]
        self.p_max_range = tuple(self.p_max_range)
        self.p_c_range = tuple(self.p_c_range)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown config keys {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ValidationError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        from .files import load_json

        return cls.from_dict(load_json(path))

    def sampler(self) -> InstanceSampler:
        return InstanceSampler(self.side, self.p_max_range, self.p_c_range, self.eta, ChannelParams.from_db(**self.channel))


@dataclass
class RunMetrics:
    n_nodes: int
    run: int
    algorithm: str
    status: str
    network_power: float
    normalized_power: float
    iterations: int
    transmitters: int
    converged: bool
    outcome: str
    draws: int
    wall_time_s: float | None = None
    error: str = ""


CSV_COLUMNS = [f.name for f in fields(RunMetrics)] + ["row_type"]


def run_algorithm(algo: str, inst: NetworkInstance, seed=0, fixed_power: float | None = 0.2, round_cap: int = 1000,
                  exact_limit: int = 10, benchmark_circuitry: bool = False):
    """Build a tree with ``algo``; returns ``(tree, trace_or_None)``.

    ``fixed_power=None`` runs equal share with power control and GBBTC at 200 mW.
    """
    if algo in ("csg-mc", "csg-sv", "csg-es"):
        kind = algo[-2:].upper()
        scheme = CostScheme(kind, fixed_power=fixed_power if kind == "ES" else None)
        if kind == "ES" and fixed_power is not None and not is_connected(inst, fixed_power):
            raise DisconnectedAtFixedPower(f"not connected at {fixed_power} W")
        tree = initialize(inst, "greedy-join", scheme)
        trace = run_brd(tree, scheme, inst, round_cap=round_cap, seed=seed)
        return tree, trace
    if algo == "bip":
        return baselines.bip(inst, benchmark_circuitry), None
    if algo == "bipsw":
        return baselines.bipsw(inst, benchmark_circuitry), None
    if algo == "bdp":
        return baselines.bdp(inst, with_trace=True, round_cap=round_cap)
    if algo == "gbbtc":
        return baselines.gbbtc(inst, 0.2 if fixed_power is None else fixed_power, with_trace=True, round_cap=round_cap, seed=seed)
    if algo == "exact":
        return solve_exact(inst, exact_limit), None
    raise ValidationError(f"unknown algorithm {algo!r}")


def metrics_for(tree: BroadcastTree, trace, inst: NetworkInstance, n_nodes: int, run: int, algo: str, draws: int) -> RunMetrics:
    p = float(network_power(tree, inst))
    return RunMetrics(
        n_nodes=n_nodes,
        run=run,
        algorithm=algo,
        status="ok",
        network_power=p,
        normalized_power=p / inst.mean_power_budget(),
        iterations=trace.iterations if trace is not None else 0,
        transmitters=len(tree.transmitters()),
        converged=trace.converged if trace is not None else True,
        outcome=trace.outcome if trace is not None else "",
        draws=draws,
    )


def run_seeds(master: int, point: int, run: int) -> tuple[np.random.SeedSequence, int]:
    """Instance seed sequence and algorithm seed for one (node-count index, run) pair."""
    ss = np.random.SeedSequence(master, spawn_key=(point, run))
    inst_ss, algo_ss = ss.spawn(2)
    return inst_ss, int(algo_ss.generate_state(1)[0])


def iter_experiment(cfg: ExperimentConfig, keep_trees: bool = False):
    """Yield ``(RunMetrics, instance, tree)`` in (node count, run, algorithm) order."""
    sampler = cfg.sampler()
    fixed = tuple({cfg.fixed_power} if any(a in FIXED_POWER_ALGOS for a in cfg.algorithms) else ())
    for point, n in enumerate(cfg.node_counts):
        for run in range(cfg.runs):
            inst_ss, algo_seed = run_seeds(cfg.seed, point, run)
            inst, draws = generate_connected_instance(sampler, n, np.random.default_rng(inst_ss), fixed)
            for algo in cfg.algorithms:
                t0 = time.perf_counter()
                try:
                    tree, trace = run_algorithm(algo, inst, algo_seed, cfg.fixed_power, cfg.round_cap,
                                                cfg.exact_limit, cfg.benchmark_circuitry)
                    m = metrics_for(tree, trace, inst, n, run, algo, draws)
                except MPBTError as exc:
                    tree = None
                    m = RunMetrics(n, run, algo, "failed", float("nan"), float("nan"), 0, 0, False,
                                   "", draws, error=f"{type(exc).__name__}: {exc}")
                if cfg.record_wall_time:
                    m.wall_time_s = time.perf_counter() - t0
                yield m, inst, (tree if keep_trees else None)


def summarize(rows: list[RunMetrics]) -> list[dict]:
    """Mean and standard deviation per (algorithm, node count) over successful runs."""
    groups: dict[tuple[str, int], list[RunMetrics]] = {}
    for r in rows:
        groups.setdefault((r.algorithm, r.n_nodes), []).append(r)
    out = []
    order = sorted(groups, key=lambda k: (k[1], k[0]))
    for algo, n in order:
        ok = [r for r in groups[(algo, n)] if r.status == "ok"]
        for stat, fn in (("mean", np.mean), ("std", np.std)):
            row = {c: "" for c in CSV_COLUMNS}
            row.update(n_nodes=n, algorithm=algo, row_type=stat, status=f"{len(ok)}/{len(groups[(algo, n)])}")
            if ok:
                for col in ("network_power", "normalized_power", "iterations", "transmitters"):
                    row[col] = float(fn([getattr(r, col) for r in ok]))
                row["converged"] = float(np.mean([r.converged for r in ok])) if stat == "mean" else ""
            out.append(row)
    return out


def _fmt(v):
    if isinstance(v, float):
        return "" if v != v else repr(v)
    if v is None:
        return ""
    return str(v)


def write_csv(rows: list[RunMetrics], path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        d = asdict(r) | {"row_type": "run"}
        w.writerow([_fmt(d[c]) for c in CSV_COLUMNS])
    for s in summarize(rows):
        w.writerow([_fmt(s[c]) for c in CSV_COLUMNS])
    text = buf.getvalue()
    if path:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise IoError(str(exc)) from exc
    return text


def run_experiment(cfg: ExperimentConfig, out_csv=None) -> list[RunMetrics]:
    out_dir = Path(cfg.out_dir) if cfg.out_dir else None
    rows = []
    for m, inst, tree in iter_experiment(cfg, keep_trees=out_dir is not None):
        rows.append(m)
        if out_dir is not None and tree is not None:
            from .files import save_tree

            out_dir.mkdir(parents=True, exist_ok=True)
            save_tree(tree, out_dir / f"tree_n{m.n_nodes}_r{m.run}_{m.algorithm}.json")
    target = out_csv or cfg.out_csv
    if target:
        write_csv(rows, target)
    return rows


def means(rows: list[RunMetrics], algo: str, n: int, col: str) -> float:
    vals = [getattr(r, col) for r in rows if r.algorithm == algo and r.n_nodes == n and r.status == "ok"]
    return float(np.mean(vals))


POA_COLUMNS = ["N", "alpha", "p_c", "chain_power", "bcast_power", "poa_formula", "bcast_is_ne", "chain_optimal", "status"]


def poa_sweep(Ns, alpha: float, pcs, epsilon: float = 0.0) -> list[dict]:
    """One record per grid point; points above the line threshold are flagged and skipped."""
    out = []
    for N in Ns:
        for pc in pcs:
            if pc > line_pc_threshold(N, alpha):
                out.append({"N": N, "alpha": alpha, "p_c": pc, "chain_power": "", "bcast_power": "",
                            "poa_formula": "", "bcast_is_ne": "", "chain_optimal": "", "status": "skipped-threshold"})
                continue
            rep = verify_line_instance(N, alpha, pc, epsilon)
            out.append({"N": N, "alpha": alpha, "p_c": pc, "chain_power": rep.chain_power, "bcast_power": rep.bcast_power,
                        "poa_formula": rep.poa_formula, "bcast_is_ne": rep.bcast_is_ne,
                        "chain_optimal": rep.chain_optimal, "status": "ok"})
    return out


def poa_csv(records: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, POA_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow({k: _fmt(v) for k, v in r.items()})
    return buf.getvalue()


def config_json(cfg: ExperimentConfig) -> str:
    return json.dumps(asdict(cfg), indent=2, sort_keys=True)
