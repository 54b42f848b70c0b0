"""Expression and predicate language used inside PROJECT lambdas, SELECT and
JOIN conditions, and GROUPING aggregates.

Powerset, cardinality and set difference are expression-level functions here;
the relational POWERSET of the algebra is the project+unnest macro in `ops`.
Expressions are immutable; evaluation is pure.  A stable textual syntax
(``P(...)``, ``V(...)``, ``-``, ``subset``, ``subseteq``, ``in``) is provided
for query files and ``explain`` output.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import date
from fractions import Fraction
from itertools import combinations
from typing import Callable, Mapping, Union

from .model import (
    INT,
    RATIONAL,
    STRING,
    AttrType,
    ScalarType,
    Schema,
    SetType,
    Value,
    infer_type,
    normalize_value,
    render_type,
    render_value,
)


class ExprError(Exception):
    """Base error for the expression language."""


class UnknownAttribute(ExprError):
    def __init__(self, path):
        super().__init__(f"unknown attribute {'.'.join(path)!r}")
        self.path = tuple(path)


class KindMismatch(ExprError):
    def __init__(self, operator: str, found: list[str]):
        super().__init__(f"operator {operator!r} cannot apply to kinds {found}")
        self.operator = operator
        self.found = found


class DivisionByZero(ExprError):
    """Exact division by zero; usually a malformed confidence computation."""


class SyntaxError_(ExprError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at offset {pos}")
        self.pos = pos


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class AttrRef:
    path: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "path", tuple(self.path))

    @property
    def name(self) -> str:
        return ".".join(self.path)


@dataclass(frozen=True)
class Const:
    value: Value
    type: AttrType | None = None

    def resolved_type(self) -> AttrType:
        return self.type if self.type is not None else infer_type(self.value)


@dataclass(frozen=True)
class ParamRef:
    """Reference to a mining parameter, resolved at evaluation time."""

    name: str  # minsup | minconf | n


PARAM_TYPES: dict[str, AttrType] = {"minsup": RATIONAL, "minconf": RATIONAL, "n": INT}


@dataclass(frozen=True)
class Arith:
    op: str  # + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class SetDiff:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Powerset:
    arg: "Expr"


@dataclass(frozen=True)
class Cardinality:
    arg: "Expr"


Expr = Union[AttrRef, Const, ParamRef, Arith, SetDiff, Powerset, Cardinality]


@dataclass(frozen=True)
class Compare:
    left: Expr
    op: str  # scalar < <= = != >= > | set subset subseteq supseteq supset = != | in notin
    right: Expr


@dataclass(frozen=True)
class And:
    terms: tuple["Predicate", ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))


@dataclass(frozen=True)
class Or:
    terms: tuple["Predicate", ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))


@dataclass(frozen=True)
class Not:
    term: "Predicate"


@dataclass(frozen=True)
class BoolConst:
    value: bool


Predicate = Union[Compare, And, Or, Not, BoolConst]

TRUE = BoolConst(True)
FALSE = BoolConst(False)


@dataclass(frozen=True)
class AggregateSpec:
    """One <function, attribute> pair of a GROUPING; output defaults to
    functionname_attributename."""

    func: str  # count | sum | min | max | average
    target: str
    name: str = ""

    def __post_init__(self):
        if self.func not in ("count", "sum", "min", "max", "average"):
            raise ExprError(f"unknown aggregate function {self.func!r}")
        if not self.name:
            object.__setattr__(self, "name", f"{self.func}_{self.target}")


def attr(name: str) -> AttrRef:
    """Shorthand: attr("A.freq_itemset") -> AttrRef(("A", "freq_itemset"))."""
    return AttrRef(tuple(name.split(".")))


def const(value, t: AttrType | None = None) -> Const:
    if t is None and isinstance(value, (set, frozenset)):
        value = frozenset(value)
    return Const(value if not isinstance(value, (set,)) else frozenset(value), t)


# ---------------------------------------------------------------------------
# Type checking


def _is_numeric(t: AttrType) -> bool:
    return isinstance(t, ScalarType) and t.kind in ("int", "rational")


def _same_scalar(a: AttrType, b: AttrType) -> AttrType | None:
    """Common scalar type under int->rational coercion, or None."""
    if not (isinstance(a, ScalarType) and isinstance(b, ScalarType)):
        return None
    if a == b:
        return a
    if _is_numeric(a) and _is_numeric(b):
        return RATIONAL
    return None


def _resolve_ref(ref: AttrRef, schema: Schema) -> tuple[int, AttrType] | None:
    name = ref.name
    if name in schema:
        return schema.index(name), schema.type_of(name)
    return None


def typecheck_expr(e: Expr, schema: Schema) -> AttrType:
    """Result type of an expression against a schema (raises on failure).

    A bare name that is not an attribute resolves as a mining parameter
    (minsup, minconf, n); attributes shadow parameters.
    """
    if isinstance(e, AttrRef):
        hit = _resolve_ref(e, schema)
        if hit is not None:
            return hit[1]
        if len(e.path) == 1 and e.path[0] in PARAM_TYPES:
            return PARAM_TYPES[e.path[0]]
        raise UnknownAttribute(e.path)
    if isinstance(e, Const):
        return e.resolved_type()
    if isinstance(e, ParamRef):
        if e.name not in PARAM_TYPES:
            raise ExprError(f"unknown parameter {e.name!r}")
        return PARAM_TYPES[e.name]
    if isinstance(e, Arith):
        lt = typecheck_expr(e.left, schema)
        rt = typecheck_expr(e.right, schema)
        if e.op == "-" and isinstance(lt, SetType) and isinstance(rt, SetType):
            if lt != rt:
                raise KindMismatch("-", [render_type(lt), render_type(rt)])
            return lt
        if not (_is_numeric(lt) and _is_numeric(rt)):
            raise KindMismatch(e.op, [render_type(lt), render_type(rt)])
        if e.op == "/":
            return RATIONAL
        return INT if lt == INT and rt == INT else RATIONAL
    if isinstance(e, SetDiff):
        lt = typecheck_expr(e.left, schema)
        rt = typecheck_expr(e.right, schema)
        if not (isinstance(lt, SetType) and isinstance(rt, SetType) and lt == rt):
            raise KindMismatch("set difference", [render_type(lt), render_type(rt)])
        return lt
    if isinstance(e, Powerset):
        t = typecheck_expr(e.arg, schema)
        if not isinstance(t, SetType):
            raise KindMismatch("P", [render_type(t)])
        return SetType(t)
    if isinstance(e, Cardinality):
        t = typecheck_expr(e.arg, schema)
        if not isinstance(t, SetType):
            raise KindMismatch("V", [render_type(t)])
        return INT
    raise ExprError(f"not an expression: {e!r}")


_SCALAR_CMP = {"<", "<=", "=", "!=", ">=", ">"}
_SET_CMP = {"subset", "subseteq", "supseteq", "supset"}
_MEMBER = {"in", "notin"}


def typecheck_predicate(p: Predicate, schema: Schema) -> str:
    """Check a predicate; returns "boolean" or raises."""
    if isinstance(p, BoolConst):
        return "boolean"
    if isinstance(p, (And, Or)):
        for t in p.terms:
            typecheck_predicate(t, schema)
        return "boolean"
    if isinstance(p, Not):
        return typecheck_predicate(p.term, schema)
    if isinstance(p, Compare):
        lt = typecheck_expr(p.left, schema)
        rt = typecheck_expr(p.right, schema)
        both_sets = isinstance(lt, SetType) and isinstance(rt, SetType)
        if p.op in _SET_CMP or (p.op in ("=", "!=") and both_sets):
            if not (both_sets and lt == rt):
                raise KindMismatch(p.op, [render_type(lt), render_type(rt)])
            return "boolean"
        if p.op in _MEMBER:
            if not (
                isinstance(lt, ScalarType)
                and isinstance(rt, SetType)
                and isinstance(rt.element, ScalarType)
                and _same_scalar(lt, rt.element) is not None
            ):
                raise KindMismatch(p.op, [render_type(lt), render_type(rt)])
            return "boolean"
        if p.op in _SCALAR_CMP:
            if _same_scalar(lt, rt) is None:
                raise KindMismatch(p.op, [render_type(lt), render_type(rt)])
            return "boolean"
        raise ExprError(f"unknown comparison operator {p.op!r}")
    raise ExprError(f"not a predicate: {p!r}")


# ---------------------------------------------------------------------------
# Compilation to closures (typecheck first, then evaluate with no kind checks)


def powerset_value(s: frozenset) -> frozenset:
    """All 2^|s| - 1 non-empty subsets of s (the empty set is not included)."""
    elems = list(s)
    out = []
    for k in range(1, len(elems) + 1):
        out.extend(frozenset(c) for c in combinations(elems, k))
    return frozenset(out)


def compile_expr(
    e: Expr, schema: Schema, params: Mapping[str, Value] | None = None
) -> tuple[Callable[[tuple], Value], AttrType]:
    """Typecheck and compile an expression to a tuple -> value closure."""
    out_t = typecheck_expr(e, schema)
    params = params or {}

    def comp(e: Expr) -> Callable[[tuple], Value]:
        if isinstance(e, AttrRef):
            hit = _resolve_ref(e, schema)
            if hit is not None:
                i = hit[0]
                return lambda t: t[i]
            v = params.get(e.path[0])
            if v is None:
                raise ExprError(f"parameter {e.path[0]!r} is unbound")
            return lambda t: v
        if isinstance(e, Const):
            v = normalize_value(e.value, e.resolved_type())
            return lambda t: v
        if isinstance(e, ParamRef):
            v = params.get(e.name)
            if v is None:
                raise ExprError(f"parameter {e.name!r} is unbound")
            if PARAM_TYPES[e.name] == RATIONAL:
                v = Fraction(v)
            return lambda t: v
        if isinstance(e, Arith):
            lf, rf = comp(e.left), comp(e.right)
            lt = typecheck_expr(e.left, schema)
            if e.op == "-" and isinstance(lt, SetType):
                return lambda t: lf(t) - rf(t)
            if e.op == "+":
                return lambda t: lf(t) + rf(t)
            if e.op == "-":
                return lambda t: lf(t) - rf(t)
            if e.op == "*":
                return lambda t: lf(t) * rf(t)

            def div(t):
                d = rf(t)
                if d == 0:
                    raise DivisionByZero("division by zero")
                return Fraction(lf(t)) / d

            return div
        if isinstance(e, SetDiff):
            lf, rf = comp(e.left), comp(e.right)
            return lambda t: lf(t) - rf(t)
        if isinstance(e, Powerset):
            af = comp(e.arg)
            return lambda t: powerset_value(af(t))
        if isinstance(e, Cardinality):
            af = comp(e.arg)
            return lambda t: len(af(t))
        raise ExprError(f"not an expression: {e!r}")

    return comp(e), out_t


def compile_predicate(
    p: Predicate, schema: Schema, params: Mapping[str, Value] | None = None
) -> Callable[[tuple], bool]:
    """Typecheck and compile a predicate to a tuple -> bool closure."""
    typecheck_predicate(p, schema)
    params = params or {}

    def comp(p: Predicate) -> Callable[[tuple], bool]:
        if isinstance(p, BoolConst):
            v = p.value
            return lambda t: v
        if isinstance(p, And):
            fs = [comp(x) for x in p.terms]
            return lambda t: all(f(t) for f in fs)
        if isinstance(p, Or):
            fs = [comp(x) for x in p.terms]
            return lambda t: any(f(t) for f in fs)
        if isinstance(p, Not):
            f = comp(p.term)
            return lambda t: not f(t)
        lf, _ = compile_expr(p.left, schema, params)
        rf, _ = compile_expr(p.right, schema, params)
        op = p.op
        if op == "subset":
            return lambda t: lf(t) < rf(t)
        if op == "subseteq":
            return lambda t: lf(t) <= rf(t)
        if op == "supset":
            return lambda t: lf(t) > rf(t)
        if op == "supseteq":
            return lambda t: lf(t) >= rf(t)
        if op == "in":
            return lambda t: lf(t) in rf(t)
        if op == "notin":
            return lambda t: lf(t) not in rf(t)
        if op == "<":
            return lambda t: lf(t) < rf(t)
        if op == "<=":
            return lambda t: lf(t) <= rf(t)
        if op == "=":
            return lambda t: lf(t) == rf(t)
        if op == "!=":
            return lambda t: lf(t) != rf(t)
        if op == ">=":
            return lambda t: lf(t) >= rf(t)
        return lambda t: lf(t) > rf(t)

    return comp(p)


def eval_expr(e: Expr, tup: tuple, schema: Schema, params=None) -> Value:
    f, _ = compile_expr(e, schema, params)
    return f(tup)


def eval_predicate(p: Predicate, tup: tuple, schema: Schema, params=None) -> bool:
    return compile_predicate(p, schema, params)(tup)


def param_refs(obj) -> set[str]:
    """Names of mining parameters an expression or predicate reads."""
    out: set[str] = set()

    def walk(x):
        if isinstance(x, ParamRef):
            out.add(x.name)
        elif isinstance(x, AttrRef):
            if len(x.path) == 1 and x.path[0] in PARAM_TYPES:
                out.add(x.path[0])
        elif isinstance(x, Arith):
            walk(x.left), walk(x.right)
        elif isinstance(x, (SetDiff, Compare)):
            walk(x.left), walk(x.right)
        elif isinstance(x, (Powerset, Cardinality)):
            walk(x.arg)
        elif isinstance(x, (And, Or)):
            for t in x.terms:
                walk(t)
        elif isinstance(x, Not):
            walk(x.term)

    walk(obj)
    return out


# ---------------------------------------------------------------------------
# Textual syntax


_TOKEN = re.compile(
    r"""\s*(?:
        (?P<num>\d+(?:/\d+|\.\d+)?)
      | (?P<str>'(?:[^'\\]|\\.)*')
      | (?P<name>[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*)
      | (?P<op><=|>=|!=|<|>|=|\+|\-|\*|/|\(|\)|\{|\}|,)
    )""",
    re.VERBOSE,
)

_KEYWORDS = {"and", "or", "not", "subset", "subseteq", "supset", "supseteq", "in",
             "notin", "true", "false"}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            if text[pos:].strip() == "":
                break
            raise SyntaxError_(f"unexpected character {text[pos]!r}", pos)
        pos = m.end()
        if m.group("num"):
            tokens.append(("num", m.group("num"), m.start()))
        elif m.group("str"):
            tokens.append(("str", m.group("str"), m.start()))
        elif m.group("name"):
            word = m.group("name")
            if word.lower() in _KEYWORDS and "." not in word:
                tokens.append(("kw", word.lower(), m.start()))
            else:
                tokens.append(("name", word, m.start()))
        else:
            tokens.append(("op", m.group("op"), m.start()))
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str, value: str | None = None):
        k, v, pos = self.next()
        if k != kind or (value is not None and v != value):
            raise SyntaxError_(f"expected {value or kind!r}, found {v!r}", pos)
        return v

    def at(self, kind: str, value: str | None = None) -> bool:
        k, v, _ = self.peek()
        return k == kind and (value is None or v == value)

    # predicates ------------------------------------------------------
    def predicate(self) -> Predicate:
        return self.or_pred()

    def or_pred(self) -> Predicate:
        terms = [self.and_pred()]
        while self.at("kw", "or"):
            self.next()
            terms.append(self.and_pred())
        return terms[0] if len(terms) == 1 else Or(tuple(terms))

    def and_pred(self) -> Predicate:
        terms = [self.not_pred()]
        while self.at("kw", "and"):
            self.next()
            terms.append(self.not_pred())
        return terms[0] if len(terms) == 1 else And(tuple(terms))

    def not_pred(self) -> Predicate:
        if self.at("kw", "not"):
            self.next()
            return Not(self.not_pred())
        if self.at("kw", "true"):
            self.next()
            return TRUE
        if self.at("kw", "false"):
            self.next()
            return FALSE
        if self.at("op", "("):
            # could be a parenthesized predicate or expression; try predicate
            mark = self.i
            self.next()
            try:
                inner = self.predicate()
                self.expect("op", ")")
                if not self.at_cmp():
                    return inner
            except ExprError:
                pass
            self.i = mark
        return self.comparison()

    def at_cmp(self) -> bool:
        k, v, _ = self.peek()
        return (k == "op" and v in _SCALAR_CMP) or (
            k == "kw" and v in (_SET_CMP | _MEMBER)
        )

    def comparison(self) -> Predicate:
        left = self.expr()
        k, v, pos = self.peek()
        if k == "op" and v in _SCALAR_CMP:
            self.next()
            return Compare(left, v, self.expr())
        if k == "kw" and v in (_SET_CMP | _MEMBER):
            self.next()
            return Compare(left, v, self.expr())
        raise SyntaxError_("expected a comparison operator", pos)

    # expressions -----------------------------------------------------
    def expr(self) -> Expr:
        node = self.term()
        while self.at("op", "+") or self.at("op", "-"):
            op = self.next()[1]
            node = Arith(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.at("op", "*") or self.at("op", "/"):
            op = self.next()[1]
            node = Arith(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        k, v, pos = self.peek()
        if k == "num":
            self.next()
            if "/" in v or "." in v:
                try:
                    return Const(Fraction(v), RATIONAL)
                except ZeroDivisionError:
                    raise SyntaxError_(f"zero denominator in {v!r}", pos) from None
            return Const(int(v), INT)
        if k == "str":
            self.next()
            body = v[1:-1]
            body = re.sub(r"\\(.)", r"\1", body)
            return Const(body, STRING)
        if k == "op" and v == "(":
            self.next()
            node = self.expr()
            self.expect("op", ")")
            return node
        if k == "op" and v == "{":
            self.next()
            elems = []
            if not self.at("op", "}"):
                elems.append(self.factor())
                while self.at("op", ","):
                    self.next()
                    elems.append(self.factor())
            self.expect("op", "}")
            vals = []
            for el in elems:
                if not isinstance(el, Const):
                    raise SyntaxError_("set literals hold constants only", pos)
                vals.append(el.value)
            if not vals:
                raise SyntaxError_("empty set literal needs a typed constant", pos)
            return Const(frozenset(vals))
        if k == "name":
            self.next()
            if v in ("P", "V") and self.at("op", "("):
                self.next()
                arg = self.expr()
                self.expect("op", ")")
                return Powerset(arg) if v == "P" else Cardinality(arg)
            path = v.split(".")
            if path[0] == "r" and len(path) > 1:  # lambda-variable prefix
                path = path[1:]
            return AttrRef(tuple(path))
        raise SyntaxError_(f"unexpected token {v!r}", pos)


def parse_expr(text: str) -> Expr:
    p = _Parser(text)
    node = p.expr()
    if not p.at("eof"):
        raise SyntaxError_(f"trailing input {p.peek()[1]!r}", p.peek()[2])
    return node


def parse_predicate(text: str) -> Predicate:
    p = _Parser(text)
    node = p.predicate()
    if not p.at("eof"):
        raise SyntaxError_(f"trailing input {p.peek()[1]!r}", p.peek()[2])
    return node


def render_expr(e: Expr) -> str:
    if isinstance(e, AttrRef):
        return e.name
    if isinstance(e, Const):
        if isinstance(e.value, str):
            return "'" + e.value.replace("\\", "\\\\").replace("'", "\\'") + "'"
        if isinstance(e.value, frozenset):
            return "{" + ", ".join(sorted(render_expr(Const(v)) for v in e.value)) + "}"
        return render_value(e.value)
    if isinstance(e, ParamRef):
        return e.name
    if isinstance(e, Arith):
        lhs, rhs = render_expr(e.left), render_expr(e.right)
        if e.op in "*/":
            if isinstance(e.left, Arith) and e.left.op in "+-":
                lhs = f"({lhs})"
            if isinstance(e.right, Arith):
                rhs = f"({rhs})"
        elif isinstance(e.right, Arith) and e.right.op in "+-":
            rhs = f"({rhs})"
        return f"{lhs} {e.op} {rhs}"
    if isinstance(e, SetDiff):
        return f"{render_expr(e.left)} - {render_expr(e.right)}"
    if isinstance(e, Powerset):
        return f"P({render_expr(e.arg)})"
    if isinstance(e, Cardinality):
        return f"V({render_expr(e.arg)})"
    raise ExprError(f"not an expression: {e!r}")


def render_predicate(p: Predicate) -> str:
    if isinstance(p, BoolConst):
        return "true" if p.value else "false"
    if isinstance(p, And):
        return " and ".join(
            f"({render_predicate(t)})" if isinstance(t, Or) else render_predicate(t)
            for t in p.terms
        )
    if isinstance(p, Or):
        return " or ".join(render_predicate(t) for t in p.terms)
    if isinstance(p, Not):
        inner = render_predicate(p.term)
        if isinstance(p.term, (And, Or)):
            inner = f"({inner})"
        return f"not {inner}"
    if isinstance(p, Compare):
        return f"{render_expr(p.left)} {p.op} {render_expr(p.right)}"
    raise ExprError(f"not a predicate: {p!r}")
