"""Dataset ingestion and result emission.

CSV in (configurable delimiter, UTF-8, typed columns), table/CSV/JSON out.
Headers written by the CSV emitter carry `name:type` so emitted output
re-ingests losslessly; plain headers on input fall back to declared or
default column types.  Rationals serialize as `p/q`, sets as `{a,b,c}`.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from datetime import date
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .model import (
    INT,
    STRING,
    AttrType,
    ModelError,
    NestedRelation,
    ScalarType,
    Schema,
    SetType,
    make_relation,
    parse_type,
    render_type,
    render_value,
    value_sort_key,
)


class DataError(Exception):
    pass


class MissingColumn(DataError):
    def __init__(self, name: str):
        super().__init__(f"required column {name!r} not found")
        self.name = name


class ParseError(DataError):
    def __init__(self, row: int, column: str, reason: str):
        super().__init__(f"row {row}, column {column!r}: {reason}")
        self.row = row
        self.column = column
        self.reason = reason


@dataclass(frozen=True)
class DatasetConfig:
    """How to read a transactions CSV: where tid and item live, what the
    other columns are typed as."""

    path: str | Path
    tid_column: str = "tid"
    item_column: str = "item"
    columns: tuple[tuple[str, AttrType], ...] | None = None  # full declaration
    delimiter: str = ","
    header: bool = True


_DATE_FORMATS = (
    re.compile(r"(?P<y>\d{4})-(?P<m>\d{2})-(?P<d>\d{2})"),
    re.compile(r"(?P<d>\d{1,2})/(?P<m>\d{1,2})/(?P<y>\d{4})"),
)


def parse_value(text: str, t: AttrType):
    # strings keep their whitespace; every other type tolerates surrounding space
    if isinstance(t, SetType):
        text = text.strip()
        if not (text.startswith("{") and text.endswith("}")):
            raise ValueError(f"not a set literal: {text!r}")
        body = text[1:-1]
        parts = _split_set(body)
        return frozenset(parse_value(p, t.element) for p in parts)
    if t.kind == "int":
        return int(text.strip())
    if t.kind == "rational":
        return Fraction(text.strip())
    if t.kind == "date":
        text = text.strip()
        for pat in _DATE_FORMATS:
            m = pat.fullmatch(text)
            if m:
                return date(int(m.group("y")), int(m.group("m")), int(m.group("d")))
        raise ValueError(f"not a date: {text!r}")
    return _unescape(text)


_UNESCAPES = {"\\\\": "\\", "\\t": "\t", "\\n": "\n", "\\{": "{", "\\}": "}",
              "\\,": ",", "\\e": ""}


def _unescape(s: str) -> str:
    return re.sub(r"\\[\\tn{},e]", lambda m: _UNESCAPES[m.group(0)], s)


def _split_set(body: str) -> list[str]:
    parts, cur, i = [], [], 0
    while i < len(body):
        c = body[i]
        if c == "\\" and i + 1 < len(body):
            cur.append(body[i : i + 2])
            i += 2
            continue
        if c == ",":
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(c)
        i += 1
    tail = "".join(cur)
    if tail or parts:
        parts.append(tail)
    return [p for p in parts if p != ""]


def _header_schema(names: Sequence[str], cfg: DatasetConfig) -> Schema:
    declared = dict(cfg.columns or ())
    attrs = []
    for raw in names:
        if ":" in raw:  # emitted header carries the type
            name, _, t = raw.partition(":")
            attrs.append((name, parse_type(t)))
        elif raw in declared:
            attrs.append((raw, declared[raw]))
        elif raw == cfg.tid_column:
            attrs.append((raw, INT))
        else:
            attrs.append((raw, STRING))
    return Schema(attrs)


def load_csv(cfg: DatasetConfig) -> NestedRelation:
    """Read any typed CSV into a relation (no tid/item requirement)."""
    path = Path(cfg.path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=cfg.delimiter)
        rows = list(reader)
    if not rows and not cfg.columns:
        raise DataError(f"{path}: empty file with no declared columns")
    if cfg.header:
        header, body = rows[0] if rows else [], rows[1:]
    else:
        if not cfg.columns:
            raise DataError("headerless files need declared columns")
        header, body = [n for n, _ in cfg.columns], rows
    schema = _header_schema([h.strip() for h in header], cfg)
    out = []
    for i, row in enumerate(body, 1):
        if not any(cell.strip() for cell in row):
            continue
        if len(row) != len(schema):
            raise ParseError(i, "*", f"expected {len(schema)} cells, got {len(row)}")
        vals = []
        for (name, t), cell in zip(schema.attrs, row):
            try:
                vals.append(parse_value(cell, t))
            except (ValueError, ModelError) as e:
                raise ParseError(i, name, str(e)) from None
        out.append(tuple(vals))
    return make_relation(schema, out)


def load_transactions_csv(cfg: DatasetConfig) -> NestedRelation:
    """Read a transactions table; tid and item columns must be present."""
    rel = load_csv(cfg)
    for required in (cfg.tid_column, cfg.item_column):
        if required not in rel.schema:
            raise MissingColumn(required)
    return rel


def emit_csv(r: NestedRelation, delimiter: str = ",") -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    writer.writerow([f"{n}:{render_type(t)}" for n, t in r.schema.attrs])
    for tup in r.sorted_tuples():
        writer.writerow([render_value(v) for v in tup])
    return buf.getvalue()


def _json_value(v):
    if isinstance(v, Fraction):
        return {"num": v.numerator, "den": v.denominator}
    if isinstance(v, frozenset):
        return [_json_value(e) for e in sorted(v, key=value_sort_key)]
    if isinstance(v, date):
        return v.isoformat()
    return v


def emit_json(r: NestedRelation) -> dict:
    return {
        "schema": [{"name": n, "type": render_type(t)} for n, t in r.schema.attrs],
        "rows": [[_json_value(v) for v in tup] for tup in r.sorted_tuples()],
    }


def _display(v) -> str:
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return str(v.numerator)
        return f"{v.numerator}/{v.denominator} ({float(v):g})"
    if isinstance(v, frozenset):
        return "{" + ", ".join(_display(e) for e in sorted(v, key=value_sort_key)) + "}"
    if isinstance(v, date):
        return v.isoformat()
    return str(v)


def emit_table(r: NestedRelation) -> str:
    """Human-facing aligned table; rationals show fraction and decimal."""
    header = list(r.schema.names)
    rows = [[_display(v) for v in tup] for tup in r.sorted_tuples()]
    widths = [len(h) for h in header]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    lines.append(f"({len(rows)} rows)")
    return "\n".join(lines)
