"""Reading and writing models in the CPLEX LP text format.

Only the subset this package emits is read back: one objective, named linear
rows, ``Bounds`` entries of the forms ``lo <= x <= hi`` / ``x = v`` /
``x >= lo`` / ``x <= hi`` / ``x free``, and a ``Binaries`` section.
Continuous variables default to ``[0, inf)``, binaries to ``[0, 1]``.

Solver output is ingested from plain ``name=value`` lines (blank lines and
``#`` comments ignored).
"""
from __future__ import annotations

import math
import re
from pathlib import Path

from ..errors import InfeasibleSolution, IoError, ValidationError
from .milp import Constraint, MilpModel, MilpSolution, objective_value

_TERMS_PER_LINE = 8
_SECTIONS = {
    "minimize": "obj", "minimise": "obj", "min": "obj",
    "subject to": "rows", "such that": "rows", "st": "rows", "s.t.": "rows",
    "bounds": "bounds", "bound": "bounds",
    "binaries": "bin", "binary": "bin", "bin": "bin",
    "end": "end",
}
_NUM = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|[+-]?inf(?:inity)?"


def _fmt(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _expr(coeffs: dict[str, float]) -> list[str]:
    out = []
    for v, a in coeffs.items():
        sign = "-" if a < 0 else "+"
        mag = abs(a)
        out.append(f"{sign} {v}" if mag == 1 else f"{sign} {_fmt(mag)} {v}")
    return out or ["0"]


def _wrap(head: str, terms: list[str], tail: str = "") -> list[str]:
    lines = []
    for k in range(0, len(terms), _TERMS_PER_LINE):
        chunk = " ".join(terms[k:k + _TERMS_PER_LINE])
        lines.append((head if k == 0 else "   ") + chunk)
    lines[-1] += tail
    return lines


def format_lp(model: MilpModel) -> str:
    lines = [
        "\\ minimum-power broadcast tree",
        "\\ t_i_j: node i is the max-power child of transmitter j (binary)",
        "\\ y_l_j: node l is inside the emission of j",
        "\\ d_i_j: downstream count carried by link j -> i",
        "Minimize",
    ]
    lines += _wrap(" obj: ", _expr(model.objective))
    lines.append("Subject To")
    for c in model.constraints:
        lines += _wrap(f" {c.name}: ", _expr(c.coeffs), f" {c.sense} {_fmt(c.rhs)}")
    lines.append("Bounds")
    binset = set(model.binaries)
    for v in model.variables:
        lo, hi = model.bounds.get(v, (0.0, math.inf))
        default = (0.0, 1.0) if v in binset else (0.0, math.inf)
        if (lo, hi) == default:
            continue
        if lo == hi:
            lines.append(f" {v} = {_fmt(lo)}")
        elif math.isinf(lo) and math.isinf(hi):
            lines.append(f" {v} free")
        else:
            lo_s = "-inf" if math.isinf(lo) else _fmt(lo)
            hi_s = "+inf" if math.isinf(hi) else _fmt(hi)
            lines.append(f" {lo_s} <= {v} <= {hi_s}")
    lines.append("Binaries")
    for k in range(0, len(model.binaries), _TERMS_PER_LINE):
        lines.append(" " + " ".join(model.binaries[k:k + _TERMS_PER_LINE]))
    lines.append("End")
    return "\n".join(lines) + "\n"


def export_lp(model: MilpModel, path) -> Path:
    if path is None or str(path) == "":
        raise IoError("no output path given for the LP file")
    p = Path(path)
    try:
        p.write_text(format_lp(model))
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return p


def _parse_linear(text: str) -> dict[str, float]:
    coeffs: dict[str, float] = {}
    tokens = re.findall(r"[+-]|[A-Za-z_][\w.\[\]]*|" + r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?", text)
    sign, num = 1.0, None
    for tok in tokens:
        if tok in "+-":
            sign = -1.0 if tok == "-" else 1.0
            num = None
        elif re.match(r"[A-Za-z_]", tok):
            coeffs[tok] = coeffs.get(tok, 0.0) + sign * (1.0 if num is None else num)
            sign, num = 1.0, None
        else:
            num = float(tok)
    return coeffs


def _num(s: str) -> float:
    s = s.strip().lower()
    if s in ("inf", "+inf", "infinity", "+infinity"):
        return math.inf
    if s in ("-inf", "-infinity"):
        return -math.inf
    return float(s)


def parse_lp(text: str) -> MilpModel:
    section = None
    statements: dict[str, list[str]] = {"obj": [], "rows": [], "bounds": [], "bin": []}
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].rstrip()
        if not line.strip():
            continue
        key = line.strip().lower()
        if key in _SECTIONS:
            section = _SECTIONS[key]
            if section == "end":
                break
            continue
        if section is None:
            raise ValidationError(f"LP text before any section: {raw!r}")
        if section in ("obj", "rows") and not re.match(r"^\s*[A-Za-z_][\w.]*\s*:", line) and statements[section]:
            statements[section][-1] += " " + line.strip()
        else:
            statements[section].append(line.strip())

    objective: dict[str, float] = {}
    for stmt in statements["obj"]:
        body = stmt.split(":", 1)[1] if ":" in stmt else stmt
        objective.update(_parse_linear(body))
    objective = {k: v for k, v in objective.items() if v != 0.0}

    constraints = []
    for stmt in statements["rows"]:
        name, body = stmt.split(":", 1)
        m = re.match(r"(.*?)(<=|>=|=<|=>|=|<|>)\s*(" + _NUM + r")\s*$", body.strip())
        if not m:
            raise ValidationError(f"cannot parse constraint {stmt!r}")
        sense = {"=<": "<=", "<": "<=", "=>": ">=", ">": ">="}.get(m.group(2), m.group(2))
        constraints.append(Constraint(name.strip(), _parse_linear(m.group(1)), sense, _num(m.group(3))))

    binaries = []
    for stmt in statements["bin"]:
        binaries += stmt.split()

    seen: dict[str, None] = {}
    for v in objective:
        seen.setdefault(v)
    for c in constraints:
        for v in c.coeffs:
            seen.setdefault(v)
    for v in binaries:
        seen.setdefault(v)
    binset = set(binaries)
    bounds = {v: ((0.0, 1.0) if v in binset else (0.0, math.inf)) for v in seen}
    for stmt in statements["bounds"]:
        parts = stmt.split()
        if len(parts) == 2 and parts[1].lower() == "free":
            bounds[parts[0]] = (-math.inf, math.inf)
            seen.setdefault(parts[0])
            continue
        m = re.match(r"^(" + _NUM + r")\s*<=\s*(\S+)\s*<=\s*(" + _NUM + r")$", stmt)
        if m:
            bounds[m.group(2)] = (_num(m.group(1)), _num(m.group(3)))
            seen.setdefault(m.group(2))
            continue
        m = re.match(r"^(\S+)\s*(<=|>=|=)\s*(" + _NUM + r")$", stmt)
        if not m:
            raise ValidationError(f"cannot parse bound {stmt!r}")
        v, op, val = m.group(1), m.group(2), _num(m.group(3))
        lo, hi = bounds.get(v, (0.0, math.inf))
        bounds[v] = (val, val) if op == "=" else ((lo, val) if op == "<=" else (val, hi))
        seen.setdefault(v)
    return MilpModel(objective, constraints, bounds, binaries, list(seen))


def read_lp(path) -> MilpModel:
    try:
        return parse_lp(Path(path).read_text())
    except OSError as exc:
        raise IoError(str(exc)) from exc


def read_solution(path_or_text, model: MilpModel | None = None, tol: float = 1e-6) -> MilpSolution:
    """Parse ``name=value`` lines; binaries must be within ``tol`` of 0 or 1."""
    text = str(path_or_text)
    if "=" not in text and Path(text).exists():
        text = Path(text).read_text()
    values: dict[str, float] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"expected name=value, got {raw!r}")
        name, val = line.split("=", 1)
        values[name.strip()] = float(val)
    for v, x in values.items():
        if v.startswith("t_"):
            r = round(x)
            if abs(x - r) > tol:
                raise InfeasibleSolution(f"{v}={x} is not binary within {tol}")
            values[v] = float(r)
    obj = objective_value(model, values) if model is not None else float("nan")
    return MilpSolution(values, obj)


def format_solution(sol: MilpSolution) -> str:
    return "".join(f"{k}={_fmt(v)}\n" for k, v in sol.values.items())
