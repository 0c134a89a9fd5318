"""JSON forms of instances and trees.

Instance files come in two kinds. ``geometric`` holds positions and the
channel (``gamma_th_db`` in dB, ``sigma2_dbm`` in dBm); ``matrix`` holds the
required-power matrix directly (``null`` marks a missing link).
"""
from __future__ import annotations

import json
import math
from pathlib import Path

from .errors import IoError, ValidationError
from .netmodel import ChannelParams, NetworkInstance, NodeParams, build_instance, from_power_matrix, network_power, node_power
from .tree import BroadcastTree, validate


def instance_to_dict(inst: NetworkInstance, matrix: bool = False) -> dict:
    """Geometric record when positions are known, else (or when ``matrix``) the power matrix."""
    if not matrix and inst.channel is not None and all(nd.position is not None for nd in inst.nodes):
        ch = inst.channel
        return {
            "kind": "geometric",
            "source": inst.source,
            "channel": {
                "wavelength": ch.wavelength,
                "l0": ch.l0,
                "alpha": ch.alpha,
                "gamma_th_db": 10 * math.log10(ch.gamma_th),
                "sigma2_dbm": 10 * math.log10(ch.sigma2 * 1000),
            },
            "nodes": [
                {"id": nd.id, "x": nd.position[0], "y": nd.position[1], "p_max": nd.p_max, "p_c": nd.p_c, "eta": nd.eta}
                for nd in inst.nodes
            ],
        }
    return {
        "kind": "matrix",
        "source": inst.source,
        "p_req": [[None if math.isinf(v) else float(v) for v in row] for row in inst.p_req],
        "p_c": [float(v) for v in inst.p_c],
        "p_max": [float(v) for v in inst.p_max],
    }


def instance_from_dict(d: dict) -> NetworkInstance:
    try:
        kind = d.get("kind", "geometric")
        if kind == "matrix":
            return from_power_matrix(d["p_req"], d["p_c"], d["p_max"], source=int(d["source"]))
        if kind != "geometric":
            raise ValidationError(f"unknown instance kind {kind!r}")
        ch = ChannelParams.from_db(**d.get("channel", {}))
        nodes = [
            NodeParams(int(r["id"]), (float(r["x"]), float(r["y"])), float(r["p_max"]), float(r["p_c"]), float(r.get("eta", 0.3)))
            for r in d["nodes"]
        ]
        return build_instance(nodes, int(d["source"]), ch)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed instance record: {exc}") from exc


def dump_json(obj, path) -> Path:
    if path is None or str(path) == "":
        raise IoError("no output path given")
    p = Path(path)
    try:
        p.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return p


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise IoError(str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc


def save_instance(inst: NetworkInstance, path) -> Path:
    return dump_json(instance_to_dict(inst), path)


def load_instance(path) -> NetworkInstance:
    return instance_from_dict(load_json(path))


def tree_to_dict(tree: BroadcastTree) -> dict:
    inst = tree.inst
    fp = tree.fixed_power
    powers = {str(j): float(node_power(j, kids, inst, fp)) for j, kids in sorted(tree.children.items()) if kids}
    out = {
        "source": inst.source,
        "fixed_power": fp,
        "parent": {str(i): j for i, j in sorted(tree.parent.items())},
        "node_power": powers,
        "transmitters": len(powers),
        "complete": tree.is_complete(),
    }
    if tree.is_complete():
        out["network_power"] = float(network_power(tree, inst))
        out["normalized_power"] = out["network_power"] / inst.mean_power_budget()
    return out


def tree_from_dict(d: dict, inst: NetworkInstance) -> BroadcastTree:
    tree = BroadcastTree.from_parents(inst, {int(k): int(v) for k, v in d["parent"].items()}, d.get("fixed_power"))
    verdict = validate(tree, inst)
    if not verdict:
        raise ValidationError("; ".join(verdict.violations))
    return tree


def save_tree(tree: BroadcastTree, path) -> Path:
    return dump_json(tree_to_dict(tree), path)
