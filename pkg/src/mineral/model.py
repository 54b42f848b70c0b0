"""Nested-relational data model: typed schemas, scalar and set values, relations.

Relations are sets of tuples (duplicates collapse on construction) whose
attribute values are either scalars (int, exact rational, string, calendar
date) or finite, homogeneous, possibly nested sets of values.  Everything is
immutable after construction; rational arithmetic is exact everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from fractions import Fraction
from typing import Iterable, Sequence, Union

Scalar = Union[int, Fraction, str, date]
Value = Union[Scalar, frozenset]


class ModelError(Exception):
    """Base error for the data model."""


class SchemaMismatch(ModelError):
    """A row or relation does not conform to the declared schema."""

    def __init__(self, message: str, row: int | None = None, attribute: str | None = None):
        super().__init__(message)
        self.row = row
        self.attribute = attribute


_SCALAR_KINDS = ("int", "rational", "string", "date")


@dataclass(frozen=True)
class ScalarType:
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in _SCALAR_KINDS:
            raise ModelError(f"unknown scalar kind {self.kind!r}")


@dataclass(frozen=True)
class SetType:
    element: "AttrType"


AttrType = Union[ScalarType, SetType]

INT = ScalarType("int")
RATIONAL = ScalarType("rational")
STRING = ScalarType("string")
DATE = ScalarType("date")


def set_of(element: AttrType) -> SetType:
    return SetType(element)


def render_type(t: AttrType) -> str:
    if isinstance(t, ScalarType):
        return t.kind
    return f"set<{render_type(t.element)}>"


def parse_type(text: str) -> AttrType:
    text = text.strip()
    if text.startswith("set<") and text.endswith(">"):
        return SetType(parse_type(text[4:-1]))
    if text in _SCALAR_KINDS:
        return ScalarType(text)
    raise ModelError(f"unknown attribute type {text!r}")


class Schema:
    """Ordered list of (attribute name, attribute type); names unique."""

    __slots__ = ("attrs", "_index")

    def __init__(self, attrs: Iterable[tuple[str, AttrType]]):
        pairs = tuple((str(n), t) for n, t in attrs)
        index: dict[str, int] = {}
        for i, (name, _) in enumerate(pairs):
            if name in index:
                raise SchemaMismatch(f"duplicate attribute name {name!r}", attribute=name)
            index[name] = i
        object.__setattr__(self, "attrs", pairs)
        object.__setattr__(self, "_index", index)

    def __setattr__(self, *_):  # immutable
        raise AttributeError("Schema is immutable")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.attrs)

    def __len__(self) -> int:
        return len(self.attrs)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Schema) and self.attrs == other.attrs

    def __hash__(self) -> int:
        return hash(self.attrs)

    def __repr__(self) -> str:
        inner = ", ".join(f"{n}:{render_type(t)}" for n, t in self.attrs)
        return f"Schema({inner})"

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise SchemaMismatch(f"no attribute {name!r}", attribute=name) from None

    def type_of(self, name: str) -> AttrType:
        return self.attrs[self.index(name)][1]


def infer_type(value: Value) -> AttrType:
    """Infer the attribute type of a value; sets must be non-empty and uniform."""
    if isinstance(value, bool):
        raise ModelError("boolean values are not part of the model")
    if isinstance(value, int):
        return INT
    if isinstance(value, Fraction):
        return RATIONAL
    if isinstance(value, str):
        return STRING
    if isinstance(value, date):
        return DATE
    if isinstance(value, (frozenset, set)):
        if not value:
            raise ModelError("cannot infer the element type of an empty set")
        kinds = {render_type(infer_type(v)) for v in value}
        if len(kinds) > 1:
            raise ModelError(f"heterogeneous set mixes {sorted(kinds)}")
        return SetType(infer_type(next(iter(value))))
    raise ModelError(f"unsupported value {value!r}")


def normalize_value(value: Value, t: AttrType) -> Value:
    """Coerce a raw value to its canonical in-model form, or raise SchemaMismatch."""
    if isinstance(t, ScalarType):
        if isinstance(value, bool):
            raise SchemaMismatch("boolean is not a model scalar")
        if t.kind == "int":
            if isinstance(value, int):
                return value
        elif t.kind == "rational":
            if isinstance(value, (int, Fraction)):
                return Fraction(value)
        elif t.kind == "string":
            if isinstance(value, str):
                return value
        elif t.kind == "date":
            if isinstance(value, date):
                return value
        raise SchemaMismatch(f"value {value!r} is not a {t.kind}")
    if isinstance(value, (set, frozenset)) or (
        isinstance(value, (list, tuple)) and not isinstance(value, str)
    ):
        return frozenset(normalize_value(v, t.element) for v in value)
    raise SchemaMismatch(f"value {value!r} is not a set")


def value_sort_key(v: Value):
    """Total order over values: numbers < strings < dates < sets."""
    if isinstance(v, (int, Fraction)) and not isinstance(v, bool):
        return (0, Fraction(v))
    if isinstance(v, str):
        return (1, v)
    if isinstance(v, date):
        return (2, v.toordinal())
    if isinstance(v, frozenset):
        return (3, tuple(sorted(value_sort_key(e) for e in v)))
    raise ModelError(f"unorderable value {v!r}")


_ESCAPES = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "{": "\\{", "}": "\\}", ",": "\\,"}


def _escape(s: str) -> str:
    if s == "":
        return "\\e"  # distinguishes {""} from the empty set
    return "".join(_ESCAPES.get(c, c) for c in s)


def render_value(v: Value) -> str:
    """Deterministic, injective (per attribute type) text form of a value."""
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return _escape(v)
    if isinstance(v, date):
        return v.isoformat()
    if isinstance(v, frozenset):
        return "{" + ",".join(render_value(e) for e in sorted(v, key=value_sort_key)) + "}"
    raise ModelError(f"unrenderable value {v!r}")


class NestedRelation:
    """A set-semantic relation: a schema plus a frozen set of conforming tuples."""

    __slots__ = ("schema", "tuples")

    def __init__(self, schema: Schema, tuples: frozenset):
        object.__setattr__(self, "schema", schema)
        object.__setattr__(self, "tuples", tuples)

    def __setattr__(self, *_):
        raise AttributeError("NestedRelation is immutable")

    def __len__(self) -> int:
        return len(self.tuples)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, NestedRelation)
            and self.schema == other.schema
            and self.tuples == other.tuples
        )

    def __hash__(self) -> int:
        return hash((self.schema, self.tuples))

    def __repr__(self) -> str:
        return f"NestedRelation({self.schema!r}, {len(self.tuples)} tuples)"

    def sorted_tuples(self) -> list[tuple]:
        return sorted(self.tuples, key=lambda t: tuple(value_sort_key(v) for v in t))


def make_relation(schema: Schema, rows: Iterable[Sequence[Value]]) -> NestedRelation:
    """Build a relation; duplicate rows collapse, every row must conform."""
    out = set()
    for i, row in enumerate(rows):
        row = tuple(row)
        if len(row) != len(schema):
            raise SchemaMismatch(
                f"row {i} has arity {len(row)}, schema has {len(schema)}", row=i
            )
        norm = []
        for (name, t), v in zip(schema.attrs, row):
            try:
                norm.append(normalize_value(v, t))
            except SchemaMismatch as e:
                raise SchemaMismatch(f"row {i}, attribute {name!r}: {e}", row=i, attribute=name) from None
        out.add(tuple(norm))
    return NestedRelation(schema, frozenset(out))


def relation_equal(a: NestedRelation, b: NestedRelation) -> bool:
    return a.schema == b.schema and a.tuples == b.tuples


def canonical_render(r: NestedRelation) -> str:
    """Bit-stable text rendering used by golden files and snapshots.

    One tuple per line, TAB separated, tuples in total-order, sets rendered
    as ``{a,b,c}`` with sorted elements; rationals as ``p/q``.
    """
    lines = ["\t".join(f"{n}:{render_type(t)}" for n, t in r.schema.attrs)]
    for tup in r.sorted_tuples():
        lines.append("\t".join(render_value(v) for v in tup))
    return "\n".join(lines) + "\n"
