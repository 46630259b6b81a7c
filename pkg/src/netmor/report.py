"""Report bundles: metadata header plus named numeric tables.

Two renderings are supported.  ``tsv``::

    # command: sweep
    # method: truncation
    ## errors
    r2/r1	8	6
    10	5.5751437027701340e-13	0.0054...

and ``json-like-text``, a JSON document except that infinite values are
the bare token ``inf``.  Numbers carry 17 significant digits.  No clocks
or host data enter a report, so identical inputs give identical bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import __version__
from .modelfile import fmt_float

TSV = "tsv"
JSON_LIKE = "json-like-text"
FORMATS = (TSV, JSON_LIKE)
NA = "n/a"


def cell(value) -> str:
    """Render one table cell (``inf`` sentinel, ``n/a`` for missing)."""
    if value is None:
        return NA
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    x = float(value)
    if math.isnan(x):
        return NA
    return fmt_float(x)


@dataclass
class Table:
    name: str
    columns: list
    rows: list = field(default_factory=list)


@dataclass
class Report:
    command: str
    meta: dict = field(default_factory=dict)
    tables: list = field(default_factory=list)

    def add(self, name, columns, rows) -> Table:
        t = Table(name, list(columns), [list(r) for r in rows])
        self.tables.append(t)
        return t

    def header(self) -> dict:
        out = {"command": self.command, "netmor-version": __version__,
               "numpy-version": np.__version__, "scipy-version": scipy.__version__}
        out.update(self.meta)
        return out

    def render(self, fmt: str = TSV) -> str:
        if fmt == TSV:
            return render_tsv(self)
        if fmt == JSON_LIKE:
            return render_json_like(self)
        raise ValueError(f"unknown report format {fmt!r}")


def _meta_value(v) -> str:
    if isinstance(v, (list, tuple)):
        return " ".join(_meta_value(x) for x in v)
    return cell(v)


def render_tsv(rep: Report) -> str:
    lines = [f"# {k}: {_meta_value(v)}" for k, v in rep.header().items()]
    for t in rep.tables:
        lines.append(f"## {t.name}")
        lines.append("\t".join(cell(c) for c in t.columns))
        lines.extend("\t".join(cell(v) for v in row) for row in t.rows)
    return "\n".join(lines) + "\n"


def _jl(value) -> str:
    if isinstance(value, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_jl(v)}" for k, v in value.items()) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_jl(v) for v in value) + "]"
    if value is None:
        return json.dumps(NA)
    if isinstance(value, str):
        return json.dumps(value)
    c = cell(value)
    return json.dumps(c) if c == NA else c


def render_json_like(rep: Report) -> str:
    parts = ["{", f'  "meta": {_jl(rep.header())},', '  "tables": [']
    for j, t in enumerate(rep.tables):
        rows = ",\n".join(f"        {_jl(r)}" for r in t.rows)
        sep = "," if j < len(rep.tables) - 1 else ""
        parts.append(f'    {{"name": {json.dumps(t.name)}, "columns": {_jl(t.columns)}, "rows": [\n'
                     f"{rows}\n      ]}}{sep}")
    parts.append("  ]")
    parts.append("}")
    return "\n".join(parts) + "\n"


def error_table(errors: dict, q_orders) -> tuple[list, list]:
    """Arrange ``{orders tuple: value}`` as a table.

    For two subsystems this is the ``r2/r1`` grid with both axes
    descending; otherwise one row per tuple.
    """
    keys = list(errors)
    if len(q_orders) == 2:
        r1 = sorted({k[0] for k in keys}, reverse=True)
        r2 = sorted({k[1] for k in keys}, reverse=True)
        cols = ["r2/r1"] + r1
        rows = [[b] + [errors.get((a, b)) for a in r1] for b in r2]
        return cols, rows
    q = len(q_orders)
    cols = [f"r{i + 1}" for i in range(q)] + ["error"]
    rows = [list(k) + [errors[k]] for k in sorted(keys, reverse=True)]
    return cols, rows
