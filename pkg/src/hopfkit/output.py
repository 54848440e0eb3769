"""Deterministic text output: CSV tables and ``key=value`` records.

Floats print with 12 significant digits (``-0`` folded to ``0``), booleans as
``true``/``false``, sequences as ``[a,b,...]``. Lines end with LF.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np


def fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        s = "%.12g" % v
        return "0" if s == "-0" else s
    if isinstance(v, np.ndarray):
        v = v.tolist()
    if isinstance(v, (list, tuple)):
        return "[" + ",".join(fmt(i) for i in v) + "]"
    return str(v)


class Records:
    """Ordered ``(key, value)`` pairs."""

    def __init__(self, items: Iterable[tuple[str, object]] = ()):
        self.items = list(items)

    def add(self, key, value):
        self.items.append((key, value))

    def extend(self, items):
        self.items.extend(items)

    def records(self):
        return self.items


class Table:
    def __init__(self, header: Sequence[str], rows: Iterable[Sequence]):
        self.header = list(header)
        self._rows = [list(r) for r in rows]

    def rows(self):
        return iter(self._rows)


def render(report, format: str = "kv") -> str:
    """Text of a table (``header``/``rows()``) or records (``records()``) report."""
    if hasattr(report, "records"):
        items = list(report.records())
        if format == "csv":
            lines = ["key,value"] + [f"{k},{_csv_cell(fmt(v))}" for k, v in items]
        elif format == "text":
            w = max((len(k) for k, _ in items), default=0)
            lines = [f"{k.ljust(w)}  {fmt(v)}" for k, v in items]
        else:
            lines = [f"{k}={fmt(v)}" for k, v in items]
    else:
        header = list(report.header)
        rows = [[fmt(c) for c in r] for r in report.rows()]
        if format == "csv" or format == "text":
            lines = [",".join(header)] + [",".join(_csv_cell(c) for c in r) for r in rows]
        else:
            lines = [f"{i}.{h}={c}" for i, r in enumerate(rows) for h, c in zip(header, r)]
    return "".join(line + "\n" for line in lines)


def _csv_cell(s: str) -> str:
    return '"' + s.replace('"', '""') + '"' if ("," in s or '"' in s) else s
