"""Reference implementations of the eight logical operators plus the basic
set operators.

These are the deliberately naive, obviously-correct semantics that every
optimizer rewrite and physical plan is tested against.  All operators are
pure: inputs are never modified, outputs are freshly constructed relations.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .expr import (
    AggregateSpec,
    Expr,
    KindMismatch,
    Powerset,
    Predicate,
    compile_expr,
    compile_predicate,
)
from .model import (
    INT,
    RATIONAL,
    AttrType,
    NestedRelation,
    ScalarType,
    Schema,
    SchemaMismatch,
    SetType,
    set_of,
)

Params = Mapping | None


def select(r: NestedRelation, p: Predicate, params: Params = None) -> NestedRelation:
    """Tuples of r satisfying p; schema unchanged."""
    f = compile_predicate(p, r.schema, params)
    return NestedRelation(r.schema, frozenset(t for t in r.tuples if f(t)))


def project(
    r: NestedRelation, bindings: Sequence[tuple[str, Expr]], params: Params = None
) -> NestedRelation:
    """General-form PROJECT: each binding is a function of the input tuple."""
    names = [n for n, _ in bindings]
    if len(set(names)) != len(names):
        raise SchemaMismatch(f"duplicate output attribute in {names}")
    compiled = []
    types = []
    for name, e in bindings:
        f, t = compile_expr(e, r.schema, params)
        compiled.append(f)
        types.append((name, t))
    schema = Schema(types)
    return NestedRelation(
        schema, frozenset(tuple(f(t) for f in compiled) for t in r.tuples)
    )


def nest(r: NestedRelation, by: Sequence[str]) -> NestedRelation:
    """Group tuples on common `by` values; every other attribute becomes the
    set of its values within the group (one output tuple per combination)."""
    by = list(by)
    by_idx = [r.schema.index(a) for a in by]
    rest = [(n, t) for n, t in r.schema.attrs if n not in by]
    if not rest:
        raise SchemaMismatch("nest needs at least one non-grouping attribute")
    rest_idx = [r.schema.index(n) for n, _ in rest]
    schema = Schema(
        [(n, r.schema.type_of(n)) for n in by] + [(n, set_of(t)) for n, t in rest]
    )
    groups: dict[tuple, list[set]] = {}
    for t in r.tuples:
        key = tuple(t[i] for i in by_idx)
        slot = groups.get(key)
        if slot is None:
            slot = groups[key] = [set() for _ in rest_idx]
        for s, i in zip(slot, rest_idx):
            s.add(t[i])
    return NestedRelation(
        schema,
        frozenset(key + tuple(frozenset(s) for s in slot) for key, slot in groups.items()),
    )


def unnest(r: NestedRelation, attr: str) -> NestedRelation:
    """Flatten one set-valued attribute; a tuple whose set is empty vanishes."""
    i = r.schema.index(attr)
    t = r.schema.type_of(attr)
    if not isinstance(t, SetType):
        raise KindMismatch("unnest", [attr])
    schema = Schema(
        [(n, t.element if n == attr else ty) for n, ty in r.schema.attrs]
    )
    out = set()
    for tup in r.tuples:
        for v in tup[i]:
            out.add(tup[:i] + (v,) + tup[i + 1 :])
    return NestedRelation(schema, frozenset(out))


_AGG_OUT: dict[str, AttrType | None] = {"count": INT, "average": RATIONAL}


def grouping(
    r: NestedRelation, by: Sequence[str], aggs: Sequence[AggregateSpec]
) -> NestedRelation:
    """GROUPING: partition by `by`, compute the aggregate list per partition."""
    by = list(by)
    by_idx = [r.schema.index(a) for a in by]
    out_names = by + [a.name for a in aggs]
    if len(set(out_names)) != len(out_names):
        raise SchemaMismatch(f"duplicate output attribute in {out_names}")
    attrs = [(n, r.schema.type_of(n)) for n in by]
    agg_idx = []
    for a in aggs:
        i = r.schema.index(a.target)
        t = r.schema.type_of(a.target)
        if a.func != "count" and not isinstance(t, ScalarType):
            raise KindMismatch(a.func, [a.target])
        agg_idx.append(i)
        out_t = _AGG_OUT.get(a.func)
        attrs.append((a.name, out_t if out_t is not None else t))
    schema = Schema(attrs)
    groups: dict[tuple, list[list]] = {}
    for t in r.tuples:
        key = tuple(t[i] for i in by_idx)
        groups.setdefault(key, []).append([t[i] for i in agg_idx])
    out = set()
    for key, rows in groups.items():
        vals = []
        for j, a in enumerate(aggs):
            col = [row[j] for row in rows]
            if a.func == "count":
                vals.append(len(col))
            elif a.func == "sum":
                vals.append(sum(col))
            elif a.func == "min":
                vals.append(min(col))
            elif a.func == "max":
                vals.append(max(col))
            else:  # average, exact
                vals.append(Fraction(sum(Fraction(v) for v in col), len(col)))
        out.add(key + tuple(vals))
    return NestedRelation(schema, frozenset(out))


def qualify(schema: Schema, role: str) -> Schema:
    """Prefix every attribute name with a role, giving `A.x` style aliases."""
    return Schema([(f"{role}.{n}", t) for n, t in schema.attrs])


def product(
    a: NestedRelation,
    b: NestedRelation,
    roles: tuple[str, str] | None = None,
) -> NestedRelation:
    """Cartesian product; attribute names must be disjoint unless roles given."""
    sa = qualify(a.schema, roles[0]) if roles else a.schema
    sb = qualify(b.schema, roles[1]) if roles else b.schema
    overlap = set(sa.names) & set(sb.names)
    if overlap:
        raise SchemaMismatch(f"product name collision on {sorted(overlap)}")
    schema = Schema(list(sa.attrs) + list(sb.attrs))
    return NestedRelation(
        schema, frozenset(ta + tb for ta in a.tuples for tb in b.tuples)
    )


def join(
    a: NestedRelation,
    b: NestedRelation,
    p: Predicate,
    roles: tuple[str, str] | None = ("A", "B"),
    params: Params = None,
) -> NestedRelation:
    """Combine every related pair of tuples satisfying p into one tuple.

    Output attributes are role-qualified (`A.x`, `B.x`) so self-joins cannot
    collide; the predicate is written against the qualified names.
    """
    sa = qualify(a.schema, roles[0]) if roles else a.schema
    sb = qualify(b.schema, roles[1]) if roles else b.schema
    overlap = set(sa.names) & set(sb.names)
    if overlap:
        raise SchemaMismatch(f"join name collision on {sorted(overlap)}")
    schema = Schema(list(sa.attrs) + list(sb.attrs))
    f = compile_predicate(p, schema, params)
    out = set()
    for ta in a.tuples:
        for tb in b.tuples:
            t = ta + tb
            if f(t):
                out.add(t)
    return NestedRelation(schema, frozenset(out))


def _require_same_schema(a: NestedRelation, b: NestedRelation, op: str) -> None:
    if a.schema != b.schema:
        raise SchemaMismatch(f"{op} needs identical schemas")


def union(a: NestedRelation, b: NestedRelation) -> NestedRelation:
    _require_same_schema(a, b, "union")
    return NestedRelation(a.schema, a.tuples | b.tuples)


def difference(a: NestedRelation, b: NestedRelation) -> NestedRelation:
    _require_same_schema(a, b, "difference")
    return NestedRelation(a.schema, a.tuples - b.tuples)


def intersection(a: NestedRelation, b: NestedRelation) -> NestedRelation:
    _require_same_schema(a, b, "intersection")
    return NestedRelation(a.schema, a.tuples & b.tuples)


def powerset_macro(
    r: NestedRelation, set_attr: str, out_attr: str, params: Params = None
) -> NestedRelation:
    """POWERSET as a relational step: project (out_attr, P(set_attr)) keeping
    the other attributes, then unnest out_attr.  Convenience macro only; the
    query trees spell out the same two nodes."""
    from .expr import AttrRef

    bindings: list[tuple[str, Expr]] = []
    for n, _ in r.schema.attrs:
        if n == set_attr:
            bindings.append((out_attr, Powerset(AttrRef((n,)))))
        else:
            bindings.append((n, AttrRef((n,))))
    return unnest(project(r, bindings, params), out_attr)
