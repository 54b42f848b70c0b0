"""Query text frontends: the MINE RULE subset, the constrained-query set
comprehension, and the key/value query-spec file, compiled onto the
query-tree templates.

The MINE RULE grammar covers exactly the variant the trees support: one
SELECT DISTINCT clause with `lo..hi attr AS BODY/HEAD`, SUPPORT and
CONFIDENCE keywords, one GROUP BY, an optional HAVING COUNT(*) comparison,
and the EXTRACTING RULES WITH thresholds.  Everything else is a diagnosed
syntax error, never silent acceptance.  Keywords are case-insensitive,
identifiers case-sensitive.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from .params import MiningParams, as_fraction
from .tree import (
    CAQSpec,
    InfeasibleConstraint,
    QueryTree,
    SideConstraints,
    build_caq_tree,
    build_classic_tree,
    build_mine_rule_tree,
)


class SyntaxError_(Exception):
    """Parse failure with position and the token set that was expected."""

    def __init__(self, line: int, column: int, found: str, expected: tuple[str, ...]):
        want = " or ".join(expected)
        super().__init__(f"line {line}, column {column}: found {found!r}, expected {want}")
        self.line = line
        self.column = column
        self.found = found
        self.expected = expected


class UnknownConstraint(SyntaxError_):
    def __init__(self, line: int, column: int, name: str):
        Exception.__init__(self, f"line {line}, column {column}: unknown constraint {name!r}")
        self.line = line
        self.column = column
        self.found = name
        self.expected = ("count", "in", "notin", "subset", "subseteq")


Range = tuple[int, "int | None"]  # None upper bound means unbounded ("n")


@dataclass(frozen=True)
class MineRuleAst:
    name: str
    body_range: Range
    body_attr: str
    head_range: Range
    head_attr: str
    source: str
    group_by: str
    having: tuple[str, int] | None  # (op in <=,>=,=; count)
    support: Fraction
    confidence: Fraction


@dataclass(frozen=True)
class CaqConstraint:
    kind: str  # ranges-over | card | must-contain | must-not-contain | subset-of
    var: str
    op: str | None = None  # for card: = <= >=
    value: int | None = None
    items: tuple[str, ...] = ()
    collection: str | None = None  # for ranges-over


@dataclass(frozen=True)
class CaqAst:
    body_var: str
    head_var: str
    constraints: tuple[CaqConstraint, ...]
    support: Fraction | None = None
    confidence: Fraction | None = None


# ---------------------------------------------------------------------------
# Tokenizer (shared by both grammars)

_SYMBOL_MAP = {"⊂": "subset", "⊆": "subseteq", "∈": "in", "∉": "notin",
               "≤": "<=", "≥": ">="}

_TOKEN = re.compile(
    r"""(?P<ws>\s+)
      | (?P<num>\d+(?:\.\d+)?(?:/\d+)?)
      | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<str>'(?:[^'\\]|\\.)*')
      | (?P<sym><=|>=|!=|\.\.|[<>=(){},.|:*])
      | (?P<uni>[⊂⊆∈∉≤≥])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # num | word | str | sym | eof
    text: str
    line: int
    column: int


def _tokenize(text: str, limit: int = 65536) -> list[Token]:
    if len(text) > limit:
        text = text[:limit]
    tokens: list[Token] = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            tokens.append(Token("sym", text[pos], line, col))
            pos += 1
            col += 1
            continue
        chunk = m.group(0)
        if m.group("ws") is None:
            if m.group("uni"):
                tokens.append(Token("sym", _SYMBOL_MAP[chunk], line, col))
            else:
                kind = next(k for k in ("num", "word", "str", "sym") if m.group(k))
                tokens.append(Token(kind, chunk, line, col))
        nl = chunk.count("\n")
        if nl:
            line += nl
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        pos = m.end()
    tokens.append(Token("eof", "end of input", line, col))
    return tokens


class _Stream:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> Token:
        return self.tokens[self.i]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def fail(self, expected: tuple[str, ...]):
        tok = self.peek()
        raise SyntaxError_(tok.line, tok.column, tok.text, expected)

    def keyword(self, *words: str) -> str:
        tok = self.peek()
        if tok.kind == "word" and tok.text.lower() in words:
            self.next()
            return tok.text.lower()
        self.fail(tuple(w.upper() for w in words))

    def at_keyword(self, *words: str) -> bool:
        tok = self.peek()
        return tok.kind == "word" and tok.text.lower() in words

    def ident(self) -> str:
        tok = self.peek()
        if tok.kind == "word":
            self.next()
            return tok.text
        self.fail(("identifier",))

    def sym(self, *texts: str) -> str:
        tok = self.peek()
        if tok.kind == "sym" and tok.text in texts:
            self.next()
            return tok.text
        self.fail(texts)

    def at_sym(self, *texts: str) -> bool:
        tok = self.peek()
        return tok.kind == "sym" and tok.text in texts

    def op(self, *names: str) -> str:
        """Set operator spelled either as a keyword or a mapped glyph."""
        tok = self.peek()
        if tok.kind in ("sym", "word") and tok.text.lower() in names:
            self.next()
            return tok.text.lower()
        self.fail(names)

    def number(self) -> Fraction:
        from .params import InvalidValue

        tok = self.peek()
        if tok.kind == "num":
            try:
                value = as_fraction(tok.text)
            except InvalidValue:
                self.fail(("number",))
            self.next()
            return value
        self.fail(("number",))

    def integer(self) -> int:
        tok = self.peek()
        if tok.kind == "num" and re.fullmatch(r"\d+", tok.text):
            self.next()
            return int(tok.text)
        self.fail(("integer",))

    def eof(self):
        if self.peek().kind != "eof":
            self.fail(("end of input",))


# ---------------------------------------------------------------------------
# MINE RULE


def _parse_range(s: _Stream) -> Range:
    lo = s.integer()
    s.sym("..")
    tok = s.peek()
    if tok.kind == "word" and tok.text.lower() == "n":
        s.next()
        hi: int | None = None
    else:
        hi = s.integer()
    if lo < 1 or (hi is not None and hi < lo):
        raise InfeasibleConstraint(f"cardinality range {lo}..{hi} is empty")
    return (lo, hi)


def parse_mine_rule(text: str) -> MineRuleAst:
    s = _Stream(text)
    s.keyword("mine")
    s.keyword("rule")
    name = s.ident()
    s.keyword("as")
    s.keyword("select")
    s.keyword("distinct")
    body_range = _parse_range(s)
    body_attr = s.ident()
    s.keyword("as")
    s.keyword("body")
    s.sym(",")
    head_range = _parse_range(s)
    head_attr = s.ident()
    s.keyword("as")
    s.keyword("head")
    s.sym(",")
    s.keyword("support")
    s.sym(",")
    s.keyword("confidence")
    s.keyword("from")
    source = s.ident()
    s.keyword("group")
    s.keyword("by")
    group_by = s.ident()
    having = None
    if s.at_keyword("having"):
        s.next()
        s.keyword("count")
        s.sym("(")
        s.sym("*")
        s.sym(")")
        op = s.sym("<=", ">=", "=")
        having = (op, s.integer())
    s.keyword("extracting")
    s.keyword("rules")
    s.keyword("with")
    s.keyword("support")
    s.sym(":")
    support = s.number()
    s.sym(",")
    s.keyword("confidence")
    s.sym(":")
    confidence = s.number()
    s.eof()
    return MineRuleAst(
        name, body_range, body_attr, head_range, head_attr, source, group_by,
        having, support, confidence,
    )


def render_mine_rule(ast: MineRuleAst) -> str:
    def rng(r: Range) -> str:
        return f"{r[0]}..{'n' if r[1] is None else r[1]}"

    lines = [
        f"MINE RULE {ast.name} AS",
        f"SELECT DISTINCT {rng(ast.body_range)} {ast.body_attr} AS BODY, "
        f"{rng(ast.head_range)} {ast.head_attr} AS HEAD, SUPPORT, CONFIDENCE",
        f"FROM {ast.source}",
        f"GROUP BY {ast.group_by}",
    ]
    if ast.having is not None:
        lines.append(f"HAVING COUNT(*) {ast.having[0]} {ast.having[1]}")
    lines.append(
        f"EXTRACTING RULES WITH SUPPORT: {ast.support}, CONFIDENCE: {ast.confidence}"
    )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# CAQ set comprehension


def _parse_item(s: _Stream) -> str:
    tok = s.peek()
    if tok.kind == "str":
        s.next()
        return re.sub(r"\\(.)", r"\1", tok.text[1:-1])
    if tok.kind == "word":
        s.next()
        return tok.text
    s.fail(("item",))


def _parse_item_list(s: _Stream) -> tuple[str, ...]:
    s.sym("{")
    items = [_parse_item(s)]
    while s.at_sym(","):
        s.next()
        items.append(_parse_item(s))
    s.sym("}")
    return tuple(items)


def _parse_caq_constraint(s: _Stream, variables: tuple[str, str]) -> CaqConstraint:
    tok = s.peek()
    if tok.kind == "word" and tok.text.lower() == "count":
        s.next()
        s.sym("(")
        var = s.ident()
        s.sym(")")
        op = s.sym("=", "<=", ">=", "<", ">")
        k = s.integer()
        if op == "<":
            op, k = "<=", k - 1
        elif op == ">":
            op, k = ">=", k + 1
        _check_var(s, var, variables, tok)
        return CaqConstraint("card", var, op=op, value=k)
    if tok.kind == "word" and tok.text in variables:
        var = s.ident()
        op = s.op("subset", "subseteq")
        if op == "subset":
            collection = s.ident()
            return CaqConstraint("ranges-over", var, collection=collection)
        items = _parse_item_list(s)
        return CaqConstraint("subset-of", var, items=items)
    if tok.kind in ("str", "word"):
        item = _parse_item(s)
        neg = False
        if s.at_keyword("not"):
            s.next()
            neg = True
        which = s.op("in", "notin")
        neg = neg or which == "notin"
        var = s.ident()
        _check_var(s, var, variables, tok)
        kind = "must-not-contain" if neg else "must-contain"
        return CaqConstraint(kind, var, items=(item,))
    raise UnknownConstraint(tok.line, tok.column, tok.text)


def _check_var(s: _Stream, var: str, variables: tuple[str, str], tok: Token):
    if var not in variables:
        raise SyntaxError_(tok.line, tok.column, var, variables)


def parse_caq(text: str) -> CaqAst:
    """{(S1, S2) | C}: C a conjunction of constraints on the two set
    variables; optional `with support: p, confidence: q` suffix."""
    s = _Stream(text)
    s.sym("{")
    s.sym("(")
    body_var = s.ident()
    s.sym(",")
    head_var = s.ident()
    s.sym(")")
    s.sym("|")
    variables = (body_var, head_var)
    constraints = [_parse_caq_constraint(s, variables)]
    while s.at_keyword("and"):
        s.next()
        constraints.append(_parse_caq_constraint(s, variables))
    s.sym("}")
    support = confidence = None
    if s.at_keyword("with"):
        s.next()
        s.keyword("support")
        s.sym(":")
        support = s.number()
        s.sym(",")
        s.keyword("confidence")
        s.sym(":")
        confidence = s.number()
    s.eof()
    return CaqAst(body_var, head_var, tuple(constraints), support, confidence)


def render_caq(ast: CaqAst) -> str:
    parts = []
    for c in ast.constraints:
        if c.kind == "ranges-over":
            parts.append(f"{c.var} subset {c.collection}")
        elif c.kind == "card":
            parts.append(f"count({c.var}) {c.op} {c.value}")
        elif c.kind == "must-contain":
            parts.append(f"'{c.items[0]}' in {c.var}")
        elif c.kind == "must-not-contain":
            parts.append(f"'{c.items[0]}' notin {c.var}")
        elif c.kind == "subset-of":
            inner = ", ".join(f"'{i}'" for i in c.items)
            parts.append(f"{c.var} subseteq {{{inner}}}")
    body = " and ".join(parts)
    out = f"{{({ast.body_var}, {ast.head_var}) | {body}}}"
    if ast.support is not None:
        out += f" with support: {ast.support}, confidence: {ast.confidence}"
    return out


def caq_spec_from_ast(ast: CaqAst) -> CAQSpec:
    def side(var: str) -> SideConstraints:
        lo, hi = 1, None
        must: set[str] = set()
        must_not: set[str] = set()
        subset_of: frozenset | None = None
        for c in ast.constraints:
            if c.var != var:
                continue
            if c.kind == "card":
                if c.op == "=":
                    lo, hi = c.value, c.value
                elif c.op == "<=":
                    hi = c.value if hi is None else min(hi, c.value)
                else:
                    lo = max(lo, c.value)
            elif c.kind == "must-contain":
                must.update(c.items)
            elif c.kind == "must-not-contain":
                must_not.update(c.items)
            elif c.kind == "subset-of":
                subset_of = frozenset(c.items)
        return SideConstraints(lo, hi, frozenset(must), frozenset(must_not), subset_of)

    return CAQSpec(
        body=side(ast.body_var),
        head=side(ast.head_var),
        minsup=ast.support,
        minconf=ast.confidence,
    )


# ---------------------------------------------------------------------------
# Query-spec file (key: value lines)


@dataclass(frozen=True)
class QuerySpecFile:
    template: str  # classic | minerule | caq
    source: str | None = None
    minsup: Fraction | None = None
    minconf: Fraction | None = None
    threshold_mode: str | None = None
    breakpoints: tuple[tuple[int, int], ...] = ()
    max_trans_items: int | None = None
    min_trans_items: int | None = None
    head_card: Range | None = None
    body_card: Range | None = None
    body_must_contain: tuple[str, ...] = ()
    body_must_not_contain: tuple[str, ...] = ()
    body_subset_of: tuple[str, ...] | None = None
    head_must_contain: tuple[str, ...] = ()
    head_must_not_contain: tuple[str, ...] = ()
    head_subset_of: tuple[str, ...] | None = None


def _parse_card(value: str, line: int) -> Range:
    m = re.fullmatch(r"(\d+)(?:\s*\.\.\s*(\d+|n))?", value.strip())
    if not m:
        raise SyntaxError_(line, 1, value, ("lo..hi cardinality",))
    lo = int(m.group(1))
    hi = m.group(2)
    if hi is None:
        return (lo, lo)
    return (lo, None if hi == "n" else int(hi))


def parse_query_spec(text: str) -> QuerySpecFile:
    fields: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise SyntaxError_(lineno, 1, line, ("key: value",))
        key, _, value = line.partition(":")
        key = key.strip().lower().replace("_", "-")
        value = value.strip()
        if key == "template":
            if value not in ("classic", "minerule", "caq"):
                raise SyntaxError_(lineno, 1, value, ("classic", "minerule", "caq"))
            fields["template"] = value
        elif key == "source":
            fields["source"] = value
        elif key in ("minsup", "minconf"):
            fields[key] = as_fraction(value)
        elif key == "threshold-mode":
            fields["threshold_mode"] = value
        elif key == "breakpoints":
            edges = []
            for part in filter(None, (p.strip() for p in value.split(","))):
                m = re.fullmatch(r"(\d+)\s*->\s*(\d+)", part)
                if not m:
                    raise SyntaxError_(lineno, 1, part, ("child->parent",))
                edges.append((int(m.group(1)), int(m.group(2))))
            fields["breakpoints"] = tuple(edges)
        elif key in ("max-trans-items", "min-trans-items"):
            fields[key.replace("-", "_")] = int(value)
        elif key in ("head-card", "body-card"):
            fields[key.replace("-", "_")] = _parse_card(value, lineno)
        elif key in (
            "body-must-contain", "body-must-not-contain", "head-must-contain",
            "head-must-not-contain",
        ):
            fields[key.replace("-", "_")] = tuple(
                p.strip() for p in value.split(",") if p.strip()
            )
        elif key in ("body-subset-of", "head-subset-of"):
            fields[key.replace("-", "_")] = tuple(
                p.strip() for p in value.split(",") if p.strip()
            )
        else:
            raise SyntaxError_(lineno, 1, key, ("a known query-spec key",))
    if "template" not in fields:
        raise SyntaxError_(1, 1, "missing template", ("template: classic|minerule|caq",))
    return QuerySpecFile(**fields)


# ---------------------------------------------------------------------------
# Compilation


DEFAULT_PARAMS = MiningParams(Fraction(3, 10), Fraction(6, 10))


def compile_query(
    ast,
    params: MiningParams | None = None,
    source: str | None = None,
) -> QueryTree:
    """Dispatch a parsed query onto the matching tree template."""
    base = params or DEFAULT_PARAMS
    if isinstance(ast, MineRuleAst):
        ps = base.with_(minsup=ast.support, minconf=ast.confidence)
        having_max = having_min = None
        if ast.having is not None:
            op, k = ast.having
            if op == "<=":
                having_max = k
            elif op == ">=":
                having_min = k
            else:
                having_max = having_min = k
        return build_mine_rule_tree(
            source or ast.source,
            ps,
            max_trans_items=having_max,
            head_card=ast.head_range,
            body_card=ast.body_range,
            min_trans_items=having_min,
        )
    if isinstance(ast, CaqAst):
        spec = caq_spec_from_ast(ast)
        return build_caq_tree(source or "Source", spec, base)
    if isinstance(ast, QuerySpecFile):
        ps = base
        if ast.minsup is not None:
            ps = ps.with_(minsup=ast.minsup)
        if ast.minconf is not None:
            ps = ps.with_(minconf=ast.minconf)
        if ast.threshold_mode is not None:
            ps = ps.with_(threshold_mode=ast.threshold_mode)
        src = source or ast.source or "Source"
        if ast.template == "classic":
            tree = build_classic_tree(src, ps)
        elif ast.template == "minerule":
            tree = build_mine_rule_tree(
                src,
                ps,
                max_trans_items=ast.max_trans_items,
                head_card=ast.head_card or (1, None),
                body_card=ast.body_card or (1, None),
                min_trans_items=ast.min_trans_items,
            )
        else:
            spec = CAQSpec(
                body=SideConstraints(
                    *(ast.body_card or (1, None)),
                    frozenset(ast.body_must_contain),
                    frozenset(ast.body_must_not_contain),
                    frozenset(ast.body_subset_of) if ast.body_subset_of else None,
                ),
                head=SideConstraints(
                    *(ast.head_card or (1, None)),
                    frozenset(ast.head_must_contain),
                    frozenset(ast.head_must_not_contain),
                    frozenset(ast.head_subset_of) if ast.head_subset_of else None,
                ),
            )
            tree = build_caq_tree(src, spec, ps)
        if ast.breakpoints:
            tree = tree.with_breakpoints(ast.breakpoints)
        return tree
    raise TypeError(f"cannot compile {type(ast).__name__}")


def parse_query(text: str):
    """Sniff and parse any of the three query formats."""
    stripped = text.lstrip()
    if stripped.lower().startswith("mine"):
        return parse_mine_rule(text)
    if stripped.startswith("{"):
        return parse_caq(text)
    return parse_query_spec(text)


def load_query(
    text: str, params: MiningParams | None = None, source: str | None = None
) -> QueryTree:
    return compile_query(parse_query(text), params=params, source=source)
