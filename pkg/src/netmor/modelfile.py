"""Text model files: subsystems, edge lists and named parameters.

The format is JSON (UTF-8).  Edge weights may be numbers or arithmetic
expressions over the named parameters, e.g. ``[1, 2, "-k"]``; two-entry
edges get weight 1.  Indices are 1-based.  Example::

    {
      "format": "netmor-model",
      "parameters": {"k": 10},
      "subsystems": [{"label": "G1", "A": [[-1]], "B": [[1]], "C": [[1]], "D": [[0]]}],
      "edges": {"iedges": [], "einedges": [[1, 1]], "eoutedges": [[1, 1]], "eedges": []},
      "m_ext": 1,
      "p_ext": 1
    }

Floats are written with 17 significant digits, so write-then-read is
bitwise exact.
"""

from __future__ import annotations

import ast
import json
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange, ParseError
from .network import EdgeLists, NetworkMatrix, assemble_network
from .sysmodel import BlockDiagonalPlant, StateSpaceModel, aggregate

FORMAT = "netmor-model"
EDGE_KINDS = ("iedges", "einedges", "eoutedges", "eedges")

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def eval_weight(expr, params: dict) -> float:
    """Evaluate a numeric weight or an arithmetic expression over ``params``."""
    if isinstance(expr, bool):
        raise ParseError(f"weight {expr!r} is not a number")
    if isinstance(expr, (int, float)):
        return float(expr)
    if not isinstance(expr, str):
        raise ParseError(f"weight {expr!r} is not a number or expression")
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ParseError(f"cannot parse weight expression {expr!r}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id not in params:
                raise ParseError(f"unknown parameter {node.id!r} in weight {expr!r}")
            return float(params[node.id])
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        raise ParseError(f"unsupported syntax in weight {expr!r}")

    try:
        val = ev(tree)
    except ZeroDivisionError as exc:
        raise ParseError(f"division by zero in weight {expr!r}") from exc
    if not math.isfinite(val):
        raise ParseError(f"weight {expr!r} is not finite")
    return val


@dataclass(frozen=True, eq=False)
class ModelFile:
    """Parsed model file.  ``edges`` keeps weights as written."""

    subsystems: tuple[StateSpaceModel, ...]
    edges: dict
    m_ext: int
    p_ext: int
    parameters: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def plant(self) -> BlockDiagonalPlant:
        return aggregate(self.subsystems)

    def edge_lists(self) -> EdgeLists:
        resolved = {}
        for kind in EDGE_KINDS:
            rows = []
            for row in self.edges.get(kind, []):
                if not isinstance(row, (list, tuple)) or len(row) not in (2, 3):
                    raise ParseError(f"{kind} entry {row!r} must have 2 or 3 entries")
                src, dst = row[0], row[1]
                if not all(isinstance(v, int) and not isinstance(v, bool) for v in (src, dst)):
                    raise ParseError(f"{kind} entry {row!r} needs integer indices")
                w = eval_weight(row[2], self.parameters) if len(row) == 3 else 1.0
                rows.append((src, dst, w))
            resolved[kind] = rows
        return EdgeLists(**resolved, m_ext=self.m_ext, p_ext=self.p_ext)

    def network(self) -> NetworkMatrix:
        return assemble_network(self.edge_lists(), self.plant())

    def system(self) -> tuple[BlockDiagonalPlant, NetworkMatrix]:
        return self.plant(), self.network()

    def with_subsystems(self, subsystems, **metadata) -> "ModelFile":
        """Same network and parameters with new subsystems (e.g. a reduced model)."""
        meta = dict(self.metadata)
        meta.update(metadata)
        return ModelFile(tuple(subsystems), self.edges, self.m_ext, self.p_ext,
                         dict(self.parameters), meta)


def _matrix(value, name):
    try:
        a = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{name} is not a numeric matrix") from exc
    if a.ndim == 1 and a.size == 0:
        a = a.reshape(0, 0)
    if a.ndim != 2:
        raise ParseError(f"{name} must be a nested list of rows")
    if not np.all(np.isfinite(a)):
        raise ParseError(f"{name} has non-finite entries")
    return a


def _subsystem(entry, i):
    if not isinstance(entry, dict):
        raise ParseError(f"subsystem {i} must be an object")
    missing = [k for k in "ABCD" if k not in entry]
    if missing:
        raise ParseError(f"subsystem {i} lacks {', '.join(missing)}")
    mats = {k: _matrix(entry[k], f"subsystem {i} {k}") for k in "ABCD"}
    # shapes of empty matrices are implied by the nonempty ones
    n = mats["A"].shape[0]
    m = mats["B"].shape[1] if mats["B"].size else mats["D"].shape[1]
    p = mats["C"].shape[0] if mats["C"].size else mats["D"].shape[0]
    shapes = {"A": (n, n), "B": (n, m), "C": (p, n), "D": (p, m)}
    for k, shape in shapes.items():
        if mats[k].size == 0 and 0 in shape:
            mats[k] = np.zeros(shape)
    try:
        return StateSpaceModel(mats["A"], mats["B"], mats["C"], mats["D"], str(entry.get("label", "")))
    except DimensionMismatch as exc:
        raise ParseError(f"subsystem {i}: {exc}") from exc


def loads(text: str) -> ModelFile:
    """Parse model-file text; raises :class:`ParseError` on any defect."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object")
    if doc.get("format", FORMAT) != FORMAT:
        raise ParseError(f"unsupported format {doc.get('format')!r}")
    subs = doc.get("subsystems")
    if not isinstance(subs, list) or not subs:
        raise ParseError("need a nonempty 'subsystems' list")
    params = doc.get("parameters", {})
    if not isinstance(params, dict) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in params.values()):
        raise ParseError("'parameters' must map names to numbers")
    edges = doc.get("edges", {})
    if not isinstance(edges, dict) or set(edges) - set(EDGE_KINDS):
        raise ParseError(f"'edges' may only contain {', '.join(EDGE_KINDS)}")
    for key in ("m_ext", "p_ext"):
        if not isinstance(doc.get(key), int) or isinstance(doc.get(key), bool) or doc[key] < 0:
            raise ParseError(f"'{key}' must be a nonnegative integer")
    mf = ModelFile(tuple(_subsystem(s, i) for i, s in enumerate(subs, start=1)),
                   {k: [list(r) if isinstance(r, list) else r for r in edges.get(k, [])]
                    for k in EDGE_KINDS},
                   doc["m_ext"], doc["p_ext"], dict(params), dict(doc.get("metadata", {})))
    # validate edges against the plant now rather than at first use
    try:
        mf.network()
    except (IndexOutOfRange, DimensionMismatch, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(str(exc)) from exc
    return mf


def read(path) -> ModelFile:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return loads(text)


def fmt_float(x) -> str:
    """17 significant digits; integers keep a plain form."""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    if x == 0.0:
        # keep the sign bit of -0.0
        return "-0.0" if math.copysign(1.0, x) < 0 else "0"
    return f"{x:.17g}"


def _dump(value, indent, level) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_dump(v, indent, level + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, (list, tuple)):
        if all(not isinstance(v, (list, tuple, dict, np.ndarray)) for v in value):
            return "[" + ", ".join(_dump(v, indent, level + 1) for v in value) + "]"
        items = [pad + _dump(v, indent, level + 1) for v in value]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            raise ValueError("model files hold finite numbers only")
        return fmt_float(value)
    return json.dumps(str(value))


def _rows(M: np.ndarray):
    # keep the column count visible for empty-row matrices
    return [list(map(float, row)) for row in M]


def dumps(mf: ModelFile) -> str:
    doc = {
        "format": FORMAT,
        "parameters": dict(mf.parameters),
        "subsystems": [
            {"label": s.label, "A": _rows(s.A), "B": _rows(s.B), "C": _rows(s.C), "D": _rows(s.D)}
            for s in mf.subsystems
        ],
        "edges": {k: [list(r) for r in mf.edges.get(k, [])] for k in EDGE_KINDS},
        "m_ext": int(mf.m_ext),
        "p_ext": int(mf.p_ext),
    }
    if mf.metadata:
        doc["metadata"] = dict(mf.metadata)
    return _dump(doc, 2, 0) + "\n"


def write(mf: ModelFile, path) -> None:
    Path(path).write_text(dumps(mf), encoding="utf-8")


def from_system(plant: BlockDiagonalPlant, edges: EdgeLists, parameters=None,
                weights=None) -> ModelFile:
    """Build a :class:`ModelFile` from in-memory objects.

    ``weights`` optionally maps an edge kind to a list of weight
    expressions that replace the numeric weights on output.
    """
    rows = {}
    for kind in EDGE_KINDS:
        exprs = (weights or {}).get(kind)
        rows[kind] = [[s, d, exprs[j] if exprs is not None else w]
                      for j, (s, d, w) in enumerate(getattr(edges, kind))]
    return ModelFile(tuple(plant.subsystems), rows, edges.m_ext, edges.p_ext,
                     dict(parameters or {}))
