"""Logical query-tree IR: operator nodes, module spans, breakpoint
annotations, and the three canonical tree templates (classic association
rules, the MINE RULE variant, and constrained association queries).

Node ids of the classic template match its step numbering 1..13 (plus the
source as node 0).  The other templates carry step labels on their key
stages in the optional ``step`` field.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from . import ops
from .expr import (
    AggregateSpec,
    And,
    Arith,
    AttrRef,
    Cardinality,
    Compare,
    Const,
    Expr,
    ExprError,
    Not,
    ParamRef,
    Powerset,
    Predicate,
    SetDiff,
    attr,
    param_refs,
)
from .model import NestedRelation, Schema, SchemaMismatch, ModelError
from .params import MiningParams


class TreeError(Exception):
    pass


class InfeasibleConstraint(TreeError):
    """A constraint set that cannot be satisfied on its face."""


# ---------------------------------------------------------------------------
# Operator payloads


@dataclass(frozen=True)
class Source:
    name: str


@dataclass(frozen=True)
class Select:
    predicate: Predicate


@dataclass(frozen=True)
class Project:
    bindings: tuple[tuple[str, Expr], ...]

    def __post_init__(self):
        object.__setattr__(self, "bindings", tuple((n, e) for n, e in self.bindings))


@dataclass(frozen=True)
class Nest:
    by: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "by", tuple(self.by))


@dataclass(frozen=True)
class Unnest:
    attr: str


@dataclass(frozen=True)
class Grouping:
    by: tuple[str, ...]
    aggs: tuple[AggregateSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "by", tuple(self.by))
        object.__setattr__(self, "aggs", tuple(self.aggs))


@dataclass(frozen=True)
class Join:
    predicate: Predicate
    left_role: str = "A"
    right_role: str = "B"


@dataclass(frozen=True)
class Union:
    pass


@dataclass(frozen=True)
class Difference:
    pass


@dataclass(frozen=True)
class Intersection:
    pass


@dataclass(frozen=True)
class Product:
    pass


@dataclass(frozen=True)
class Rename:
    """Role alias marker; materializes as identity.  The parent join applies
    the role prefixes, so one shared Rename can serve both sides of a
    self-join (the classic template's single "define A, B" step)."""

    roles: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "roles", tuple(self.roles))


OpPayload = (
    Source | Select | Project | Nest | Unnest | Grouping | Join | Union
    | Difference | Intersection | Product | Rename
)

_BINARY = (Join, Union, Difference, Intersection, Product)


@dataclass(frozen=True)
class PlanNode:
    id: int
    op: OpPayload
    children: tuple[int, ...] = ()
    step: str | None = None  # step label shown by explain and the UI

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))


@dataclass(frozen=True)
class ModuleSpan:
    """A contiguous grouping of operators that one low-level algorithm may
    implement; not a rigid structure."""

    kind: str  # data-preparation | frequent-itemsets | rule-generation
    nodes: frozenset[int]
    params: tuple[str, ...] = ()
    label: str | None = None  # display tag for the module box
    fused: bool = False
    constraints: object | None = None  # ItemsetConstraints pushed into the span

    def __post_init__(self):
        object.__setattr__(self, "nodes", frozenset(self.nodes))
        object.__setattr__(self, "params", tuple(self.params))


SPAN_KINDS = ("data-preparation", "frequent-itemsets", "rule-generation")


@dataclass(frozen=True)
class BreakpointAnno:
    edge: tuple[int, int]  # (child id, parent id)
    enabled: bool = True


@dataclass(frozen=True)
class SideConstraints:
    """Constraints on one rule side (body or head) of a constrained query."""

    card_lo: int = 1
    card_hi: int | None = None  # None = unbounded ("n")
    must_contain: frozenset = frozenset()
    must_not_contain: frozenset = frozenset()
    subset_of: frozenset | None = None

    def __post_init__(self):
        if self.card_lo < 1:
            raise InfeasibleConstraint(f"cardinality lower bound {self.card_lo} < 1")
        if self.card_hi is not None and self.card_hi < self.card_lo:
            raise InfeasibleConstraint(
                f"cardinality range {self.card_lo}..{self.card_hi} is empty"
            )
        object.__setattr__(self, "must_contain", frozenset(self.must_contain))
        object.__setattr__(self, "must_not_contain", frozenset(self.must_not_contain))
        if self.must_contain & self.must_not_contain:
            raise InfeasibleConstraint("an item is both required and forbidden")
        if self.subset_of is not None:
            object.__setattr__(self, "subset_of", frozenset(self.subset_of))
            if not self.must_contain <= self.subset_of:
                raise InfeasibleConstraint("required items outside the allowed universe")
            if self.card_lo > len(self.subset_of):
                raise InfeasibleConstraint("cardinality exceeds the allowed universe")

    @property
    def vacuous(self) -> bool:
        return (
            self.card_lo == 1
            and self.card_hi is None
            and not self.must_contain
            and not self.must_not_contain
            and self.subset_of is None
        )


@dataclass(frozen=True)
class CAQSpec:
    """{(S1, S2) | C}: conjunction of constraints on body and head set
    variables, plus optional query-local thresholds."""

    body: SideConstraints = SideConstraints()
    head: SideConstraints = SideConstraints()
    minsup: Fraction | None = None
    minconf: Fraction | None = None


@dataclass(frozen=True)
class QueryTree:
    nodes: tuple[PlanNode, ...]
    root: int
    params: MiningParams
    spans: tuple[ModuleSpan, ...] = ()
    breakpoints: tuple[BreakpointAnno, ...] = ()
    kind: str = "manual"  # classic | minerule | caq | manual
    n_binding: tuple[str, str] | None = None  # (source name, tid attribute)
    caq: CAQSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise TreeError("node ids must be unique")
        object.__setattr__(self, "_by_id", {n.id: n for n in self.nodes})

    def node(self, node_id: int) -> PlanNode:
        try:
            return self._by_id[node_id]
        except KeyError:
            raise TreeError(f"no node {node_id}") from None

    def __contains__(self, node_id: int) -> bool:
        return node_id in self._by_id

    def node_by_step(self, step: str) -> PlanNode:
        for n in self.nodes:
            if n.step == step:
                return n
        raise TreeError(f"no node labeled step {step!r}")

    def source_names(self) -> tuple[str, ...]:
        return tuple(n.op.name for n in self.nodes if isinstance(n.op, Source))

    def parents(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {n.id: [] for n in self.nodes}
        for n in self.nodes:
            for c in n.children:
                out[c].append(n.id)
        return out

    def edges(self) -> list[tuple[int, int]]:
        seen = []
        for n in self.nodes:
            for c in n.children:
                if (c, n.id) not in seen:
                    seen.append((c, n.id))
        return seen

    def evaluation_order(self) -> list[int]:
        """Post-order from the root, left branch fully before the right."""
        order: list[int] = []
        seen: set[int] = set()

        def visit(nid: int):
            if nid in seen:
                return
            seen.add(nid)
            for c in self.node(nid).children:
                visit(c)
            order.append(nid)

        visit(self.root)
        return order

    def with_params(self, params: MiningParams) -> "QueryTree":
        return replace(self, params=params)

    def with_breakpoints(self, edges: Iterable[tuple[int, int]]) -> "QueryTree":
        annos = tuple(BreakpointAnno(tuple(e), True) for e in edges)
        return replace(self, breakpoints=annos)

    def param_dependents(self) -> dict[str, set[int]]:
        """Which nodes read each editable mining parameter."""
        out: dict[str, set[int]] = {}
        for n in self.nodes:
            refs: set[str] = set()
            if isinstance(n.op, Select):
                refs = param_refs(n.op.predicate)
            elif isinstance(n.op, Project):
                for _, e in n.op.bindings:
                    refs |= param_refs(e)
            elif isinstance(n.op, Join):
                refs = param_refs(n.op.predicate)
            for name in refs:
                out.setdefault(name, set()).add(n.id)
        return out

    def span_of(self, node_id: int) -> ModuleSpan | None:
        for s in self.spans:
            if node_id in s.nodes:
                return s
        return None


# ---------------------------------------------------------------------------
# Schema inference + validation


@dataclass(frozen=True)
class Defect:
    code: str
    node: int | None
    message: str


def _empty(schema: Schema) -> NestedRelation:
    return NestedRelation(schema, frozenset())


def node_output_schema(
    node: PlanNode, child_schemas: Sequence[Schema], params: MiningParams
) -> Schema:
    """Output schema of one node, derived by running the reference operator
    on empty inputs (so validation can never drift from execution)."""
    bind = dict(params.bindings())
    bind.setdefault("n", 1)  # n is bound at data load; any value types the same
    op = node.op
    if isinstance(op, Source):
        raise TreeError("source schemas come from the catalog")
    if isinstance(op, Select):
        return ops.select(_empty(child_schemas[0]), op.predicate, bind).schema
    if isinstance(op, Project):
        return ops.project(_empty(child_schemas[0]), op.bindings, bind).schema
    if isinstance(op, Nest):
        return ops.nest(_empty(child_schemas[0]), op.by).schema
    if isinstance(op, Unnest):
        return ops.unnest(_empty(child_schemas[0]), op.attr).schema
    if isinstance(op, Grouping):
        return ops.grouping(_empty(child_schemas[0]), op.by, op.aggs).schema
    if isinstance(op, Join):
        return ops.join(
            _empty(child_schemas[0]),
            _empty(child_schemas[1]),
            op.predicate,
            roles=(op.left_role, op.right_role),
            params=bind,
        ).schema
    if isinstance(op, Union):
        return ops.union(_empty(child_schemas[0]), _empty(child_schemas[1])).schema
    if isinstance(op, Difference):
        return ops.difference(_empty(child_schemas[0]), _empty(child_schemas[1])).schema
    if isinstance(op, Intersection):
        return ops.intersection(_empty(child_schemas[0]), _empty(child_schemas[1])).schema
    if isinstance(op, Product):
        return ops.product(_empty(child_schemas[0]), _empty(child_schemas[1])).schema
    if isinstance(op, Rename):
        return child_schemas[0]
    raise TreeError(f"unknown operator {op!r}")


def infer_schemas(
    tree: QueryTree, catalog: Mapping[str, Schema]
) -> dict[int, Schema]:
    out: dict[int, Schema] = {}
    for nid in tree.evaluation_order():
        node = tree.node(nid)
        if isinstance(node.op, Source):
            if node.op.name not in catalog:
                raise TreeError(f"unbound source {node.op.name!r}")
            out[nid] = catalog[node.op.name]
        else:
            out[nid] = node_output_schema(
                node, [out[c] for c in node.children], tree.params
            )
    return out


def validate_tree(
    tree: QueryTree, catalog: Mapping[str, Schema] | None = None
) -> list[Defect]:
    """Structural checks plus, when source schemas are given, a full
    bottom-up typecheck.  Returns defects rather than raising."""
    defects: list[Defect] = []
    ids = {n.id for n in tree.nodes}
    if tree.root not in ids:
        defects.append(Defect("NoRoot", None, f"root {tree.root} missing"))
        return defects
    for n in tree.nodes:
        want = 0 if isinstance(n.op, Source) else 2 if isinstance(n.op, _BINARY) else 1
        if len(n.children) != want:
            defects.append(
                Defect("Arity", n.id, f"{type(n.op).__name__} expects {want} children")
            )
        for c in n.children:
            if c not in ids:
                defects.append(Defect("MissingChild", n.id, f"child {c} not in tree"))
    # sharing: the DAG is a tree except for at most one shared subtree root
    refs: dict[int, int] = {}
    for n in tree.nodes:
        for c in n.children:
            refs[c] = refs.get(c, 0) + 1
    shared = [nid for nid, k in refs.items() if k > 1]
    if len(shared) > 1:
        defects.append(
            Defect("Sharing", None, f"more than one shared subtree: {sorted(shared)}")
        )
    edges = set(tree.edges())
    for bp in tree.breakpoints:
        if tuple(bp.edge) not in edges:
            defects.append(Defect("BadBreakpoint", None, f"no edge {bp.edge}"))
    # spans: known kind, disjoint, contiguous (connected through child edges)
    seen_nodes: set[int] = set()
    for s in tree.spans:
        if s.kind not in SPAN_KINDS:
            defects.append(Defect("BadSpanKind", None, f"unknown span kind {s.kind!r}"))
        if s.nodes & seen_nodes:
            defects.append(Defect("SpanOverlap", None, f"span {s.kind} overlaps another"))
        seen_nodes |= s.nodes
        missing = s.nodes - ids
        if missing:
            defects.append(Defect("BadSpan", None, f"span nodes {sorted(missing)} missing"))
            continue
        if s.nodes and not _connected(tree, s.nodes):
            defects.append(
                Defect("SpanGap", None, f"span {s.kind} is not contiguous")
            )
    if catalog is not None and not defects:
        try:
            infer_schemas(tree, catalog)
        except (ExprError, SchemaMismatch, ModelError, TreeError) as e:
            nid = _failing_node(tree, catalog)
            defects.append(Defect(type(e).__name__, nid, str(e)))
    return defects


def _failing_node(tree: QueryTree, catalog: Mapping[str, Schema]) -> int | None:
    out: dict[int, Schema] = {}
    for nid in tree.evaluation_order():
        node = tree.node(nid)
        try:
            if isinstance(node.op, Source):
                out[nid] = catalog[node.op.name]
            else:
                out[nid] = node_output_schema(
                    node, [out[c] for c in node.children], tree.params
                )
        except Exception:
            return nid
    return None


def _connected(tree: QueryTree, nodes: frozenset[int]) -> bool:
    nodes = set(nodes)
    start = next(iter(nodes))
    frontier = [start]
    reached = {start}
    while frontier:
        cur = frontier.pop()
        neighbors = [c for c in tree.node(cur).children if c in nodes]
        neighbors += [p for p in tree.parents()[cur] if p in nodes]
        for nb in neighbors:
            if nb not in reached:
                reached.add(nb)
                frontier.append(nb)
    return reached == nodes


# ---------------------------------------------------------------------------
# Template builders


class _Builder:
    def __init__(self, start: int = 0):
        self.nodes: list[PlanNode] = []
        self._next = start

    def add(self, op: OpPayload, children: Sequence[int] = (), step: str | None = None) -> int:
        nid = self._next
        self._next += 1
        self.nodes.append(PlanNode(nid, op, tuple(children), step))
        return nid


def _gt(params: MiningParams) -> str:
    return ">" if params.threshold_mode == "strict" else ">="


def _support_filter(params: MiningParams) -> Predicate:
    return Compare(
        attr("count_tid"), _gt(params), Arith("*", ParamRef("n"), ParamRef("minsup"))
    )


def _confidence_filter(params: MiningParams) -> Predicate:
    return Compare(attr("conf"), _gt(params), ParamRef("minconf"))


def _prep_projection(tid_attr: str, item_attr: str) -> Project:
    return Project((("tid", attr(tid_attr)), ("item", attr(item_attr))))


def _fi_chain(
    b: _Builder, below: int, params: MiningParams, steps: Mapping[str, str]
) -> list[int]:
    """The powerset->unnest->group->threshold->support chain shared by all
    templates; returns its node ids bottom-up."""
    n3 = b.add(
        Project((("tid", attr("tid")), ("itemset", Powerset(attr("item"))))),
        [below],
        steps.get("powerset"),
    )
    n4 = b.add(Unnest("itemset"), [n3], steps.get("unnest"))
    n5 = b.add(
        Grouping(("itemset",), (AggregateSpec("count", "tid"),)), [n4], steps.get("group")
    )
    n6 = b.add(Select(_support_filter(params)), [n5], steps.get("threshold"))
    n7 = b.add(
        Project(
            (
                ("freq_itemset", attr("itemset")),
                ("sup", Arith("/", attr("count_tid"), ParamRef("n"))),
            )
        ),
        [n6],
        steps.get("support"),
    )
    return [n3, n4, n5, n6, n7]


def _rule_chain(
    b: _Builder, a_in: int, b_in: int, params: MiningParams, steps: Mapping[str, str]
) -> list[int]:
    """The subset-join + confidence chain (classic steps 9-13); `a_in`/`b_in`
    are the node ids of the A and B inputs (possibly the same node)."""
    n9 = b.add(
        Join(
            Compare(attr("A.freq_itemset"), "subset", attr("B.freq_itemset")),
            left_role="A",
            right_role="B",
        ),
        [a_in, b_in],
        steps.get("join"),
    )
    n10 = b.add(
        Project(
            (
                ("BD", attr("A.freq_itemset")),
                ("BD_sup", attr("A.sup")),
                ("sp", attr("B.freq_itemset")),
                ("sp_sup", attr("B.sup")),
            )
        ),
        [n9],
        steps.get("rename"),
    )
    n11 = b.add(
        Project(
            (
                ("BD", attr("BD")),
                ("BD_sup", attr("BD_sup")),
                ("sp", attr("sp")),
                ("sp_sup", attr("sp_sup")),
                ("conf", Arith("/", attr("sp_sup"), attr("BD_sup"))),
            )
        ),
        [n10],
        steps.get("conf"),
    )
    n12 = b.add(Select(_confidence_filter(params)), [n11], steps.get("conf_filter"))
    n13 = b.add(
        Project(
            (
                ("BD", attr("BD")),
                ("HD", SetDiff(attr("sp"), attr("BD"))),
                ("sup", attr("sp_sup")),
                ("conf", attr("conf")),
            )
        ),
        [n12],
        steps.get("final"),
    )
    return [n9, n10, n11, n12, n13]


def build_classic_tree(
    source: str,
    params: MiningParams,
    tid_attr: str = "tid",
    item_attr: str = "item",
) -> QueryTree:
    """The 13-step query tree for discovering all association rules."""
    b = _Builder()
    src = b.add(Source(source))
    n1 = b.add(_prep_projection(tid_attr, item_attr), [src], "1")
    n2 = b.add(Nest(("tid",)), [n1], "2")
    fi = _fi_chain(
        b, n2, params,
        {"powerset": "3", "unnest": "4", "group": "5", "threshold": "6", "support": "7"},
    )
    n8 = b.add(Rename(("A", "B")), [fi[-1]], "8")
    rules = _rule_chain(
        b, n8, n8, params,
        {"join": "9", "rename": "10", "conf": "11", "conf_filter": "12", "final": "13"},
    )
    spans = (
        ModuleSpan("data-preparation", frozenset([n1]), (), "1"),
        ModuleSpan("frequent-itemsets", frozenset([n2, *fi]), ("minsup",), "2-7"),
        ModuleSpan("rule-generation", frozenset([n8, *rules]), ("minconf",), "8-13"),
    )
    return QueryTree(
        nodes=tuple(b.nodes),
        root=rules[-1],
        params=params,
        spans=spans,
        kind="classic",
        n_binding=(source, tid_attr),
    )


def _card_predicate(name: str, lo: int, hi: int | None) -> Predicate | None:
    ref = attr(name)
    if hi is not None and lo == hi:
        return Compare(ref, "=", Const(lo))
    terms: list[Predicate] = []
    if lo > 1:
        terms.append(Compare(ref, ">=", Const(lo)))
    if hi is not None:
        terms.append(Compare(ref, "<=", Const(hi)))
    if not terms:
        return None
    return terms[0] if len(terms) == 1 else And(tuple(terms))


def build_mine_rule_tree(
    source: str,
    params: MiningParams,
    max_trans_items: int | None = None,
    head_card: tuple[int, int | None] = (1, None),
    body_card: tuple[int, int | None] = (1, None),
    tid_attr: str = "tid",
    item_attr: str = "item",
    min_trans_items: int | None = None,
) -> QueryTree:
    """Classic tree extended with a transaction-width filter in data
    preparation and rule-side cardinality filters after rule generation.

    Vacuous constraint stages are omitted, so the fully-unconstrained call
    builds exactly the classic structure.
    """
    for lo, hi in (head_card, body_card):
        if lo < 1 or (hi is not None and hi < lo):
            raise InfeasibleConstraint(f"cardinality range {lo}..{hi} is empty")
    if max_trans_items is not None and max_trans_items < 0:
        raise InfeasibleConstraint("maximum transaction width must be >= 0")
    if (
        max_trans_items is not None
        and min_trans_items is not None
        and max_trans_items < min_trans_items
    ):
        raise InfeasibleConstraint("transaction width window is empty")

    b = _Builder()
    src = b.add(Source(source))
    n1 = b.add(_prep_projection(tid_attr, item_attr), [src], "1a")
    n2 = b.add(Nest(("tid",)), [n1], "1b")
    prep = [n1, n2]
    below = n2
    if max_trans_items is not None or (min_trans_items or 0) > 1:
        n_count = b.add(
            Project(
                (
                    ("tid", attr("tid")),
                    ("item", attr("item")),
                    ("count_item", Cardinality(attr("item"))),
                )
            ),
            [below],
            "2",
        )
        width_terms: list[Predicate] = []
        if max_trans_items is not None and max_trans_items == min_trans_items:
            width_terms.append(Compare(attr("count_item"), "=", Const(max_trans_items)))
        else:
            if max_trans_items is not None:
                width_terms.append(Compare(attr("count_item"), "<=", Const(max_trans_items)))
            if (min_trans_items or 0) > 1:
                width_terms.append(Compare(attr("count_item"), ">=", Const(min_trans_items)))
        pred = width_terms[0] if len(width_terms) == 1 else And(tuple(width_terms))
        n_filter = b.add(Select(pred), [n_count], "3")
        prep += [n_count, n_filter]
        below = n_filter
    fi = _fi_chain(b, below, params, {})
    n_ab = b.add(Rename(("A", "B")), [fi[-1]], "5")
    rules = _rule_chain(b, n_ab, n_ab, params, {})
    top = rules[-1]

    counts: list[tuple[str, Expr]] = []
    filters: list[Predicate] = []
    if not (head_card[0] == 1 and head_card[1] is None):
        counts.append(("HD_count", Cardinality(attr("HD"))))
        filters.append(_card_predicate("HD_count", *head_card))
    if not (body_card[0] == 1 and body_card[1] is None):
        counts.append(("BD_count", Cardinality(attr("BD"))))
        filters.append(_card_predicate("BD_count", *body_card))
    if counts:
        keep = [("BD", attr("BD")), ("HD", attr("HD")), ("sup", attr("sup")), ("conf", attr("conf"))]
        n_counts = b.add(Project(tuple(keep + counts)), [top], "7")
        pred = filters[0] if len(filters) == 1 else And(tuple(p for p in filters))
        n_sel = b.add(Select(pred), [n_counts], "8")
        top = b.add(Project(tuple(keep)), [n_sel], "9")

    spans = (
        ModuleSpan("data-preparation", frozenset(prep), (), "1"),
        ModuleSpan("frequent-itemsets", frozenset(fi), ("minsup",), "4"),
        ModuleSpan("rule-generation", frozenset([n_ab, *rules]), ("minconf",), "6"),
    )
    return QueryTree(
        nodes=tuple(b.nodes),
        root=top,
        params=params,
        spans=spans,
        kind="minerule",
        n_binding=(source, tid_attr),
    )


def _side_filter_terms(side: SideConstraints, ref_name: str) -> list[Predicate]:
    """Item-level constraint conjuncts a branch select can check on itemsets."""
    terms: list[Predicate] = []
    ref = attr(ref_name)
    if side.must_contain:
        terms.append(Compare(Const(frozenset(side.must_contain)), "subseteq", ref))
    for item in sorted(side.must_not_contain):
        terms.append(Compare(Const(item), "notin", ref))
    if side.subset_of is not None:
        terms.append(Compare(ref, "subseteq", Const(frozenset(side.subset_of))))
    return terms


def build_caq_tree(source: str, spec: CAQSpec, params: MiningParams,
                   tid_attr: str = "tid", item_attr: str = "item") -> QueryTree:
    """Constrained association query tree: width pruning in data preparation,
    cardinality-filtered body/head branches, subset join, head via set
    difference."""
    if spec.minsup is not None or spec.minconf is not None:
        params = params.with_(
            minsup=spec.minsup if spec.minsup is not None else params.minsup,
            minconf=spec.minconf if spec.minconf is not None else params.minconf,
        )
    body, head = spec.body, spec.head

    b = _Builder()
    src = b.add(Source(source))
    n1 = b.add(_prep_projection(tid_attr, item_attr), [src], "1a")
    n2 = b.add(Nest(("tid",)), [n1], "1b")
    prep = [n1, n2]
    below = n2
    if body.card_lo >= 2:
        # width pruning at the minimum body cardinality: dropping narrower
        # transactions cannot change the support of any itemset of size >= lo
        n_count = b.add(
            Project(
                (
                    ("tid", attr("tid")),
                    ("item", attr("item")),
                    ("count_item", Cardinality(attr("item"))),
                )
            ),
            [below],
            "2",
        )
        n_filter = b.add(
            Select(Compare(attr("count_item"), ">=", Const(body.card_lo))),
            [n_count],
            "3",
        )
        prep += [n_count, n_filter]
        below = n_filter
    fi = _fi_chain(b, below, params, {})
    fi_top = fi[-1]

    lo_b, hi_b = body.card_lo, body.card_hi
    lo_s = body.card_lo + head.card_lo
    hi_s = None if (body.card_hi is None or head.card_hi is None) else body.card_hi + head.card_hi
    branches_vacuous = (
        body.vacuous and head.vacuous and _card_predicate("num_of_items", lo_s, hi_s) is None
    )
    if branches_vacuous:
        a_in = b.add(Rename(("A",)), [fi_top])
        b_in = b.add(Rename(("B",)), [fi_top])
    else:
        n_num = b.add(
            Project(
                (
                    ("freq_itemset", attr("freq_itemset")),
                    ("sup", attr("sup")),
                    ("num_of_items", Cardinality(attr("freq_itemset"))),
                )
            ),
            [fi_top],
            "5",
        )
        a_terms = [t for t in [_card_predicate("num_of_items", lo_b, hi_b)] if t]
        a_terms += _side_filter_terms(body, "freq_itemset")
        a_pred = a_terms[0] if len(a_terms) == 1 else And(tuple(a_terms)) if a_terms else None
        # superset branch: body+head cardinality window; required head items
        # must appear in the superset (they end up in HD = sp - BD)
        b_terms = [t for t in [_card_predicate("num_of_items", lo_s, hi_s)] if t]
        if head.must_contain:
            b_terms.append(
                Compare(Const(frozenset(head.must_contain)), "subseteq", attr("freq_itemset"))
            )
        b_pred = b_terms[0] if len(b_terms) == 1 else And(tuple(b_terms)) if b_terms else None

        keep = (("freq_itemset", attr("freq_itemset")), ("sup", attr("sup")))
        a_cur = n_num
        if a_pred is not None:
            a_cur = b.add(Select(a_pred), [a_cur], "6A")
        a_cur = b.add(Project(keep), [a_cur], "7A")
        a_in = b.add(Rename(("A",)), [a_cur])
        b_cur = n_num
        if b_pred is not None:
            b_cur = b.add(Select(b_pred), [b_cur], "6B")
        b_cur = b.add(Project(keep), [b_cur], "7B")
        b_in = b.add(Rename(("B",)), [b_cur])

    rules = _rule_chain(b, a_in, b_in, params, {})
    top = rules[-1]

    head_terms = _side_filter_terms(head, "HD")
    if head_terms:
        pred = head_terms[0] if len(head_terms) == 1 else And(tuple(head_terms))
        top = b.add(Select(pred), [top])

    spans = (
        ModuleSpan("data-preparation", frozenset(prep), (), "1"),
        ModuleSpan("frequent-itemsets", frozenset(fi), ("minsup",), "4"),
        ModuleSpan("rule-generation", frozenset([a_in, b_in, *rules]), ("minconf",), "8"),
    )
    return QueryTree(
        nodes=tuple(b.nodes),
        root=top,
        params=params,
        spans=spans,
        kind="caq",
        n_binding=(source, tid_attr),
        caq=spec,
    )


# ---------------------------------------------------------------------------
# Module detection


def _is_powerset_project(op: OpPayload) -> bool:
    return isinstance(op, Project) and any(
        isinstance(e, Powerset) for _, e in op.bindings
    )


def _is_support_project(op: OpPayload) -> bool:
    # exactly (itemset passthrough, count/n): the shape module algorithms bind to
    if not isinstance(op, Project) or len(op.bindings) != 2:
        return False
    first, second = op.bindings
    return (
        isinstance(first[1], AttrRef)
        and isinstance(second[1], Arith)
        and second[1].op == "/"
        and "n" in param_refs(second[1])
    )


def _is_threshold_select(op: OpPayload) -> bool:
    return isinstance(op, Select) and {"minsup", "n"} <= param_refs(op.predicate)


def _is_conf_select(op: OpPayload) -> bool:
    return isinstance(op, Select) and "minconf" in param_refs(op.predicate)


def _is_setdiff_project(op: OpPayload) -> bool:
    # the rule projection shape (BD, HD = sp - BD, sup, conf)
    if not isinstance(op, Project) or len(op.bindings) != 4:
        return False
    exprs = [e for _, e in op.bindings]
    return (
        isinstance(exprs[1], (SetDiff,))
        or (isinstance(exprs[1], Arith) and exprs[1].op == "-")
    ) and all(isinstance(e, AttrRef) for e in (exprs[0], exprs[2], exprs[3]))


def annotate_modules(tree: QueryTree) -> QueryTree:
    """Detect the three module kinds by structural pattern matching.

    Idempotent; regions that match nothing stay unannotated.  Recognizes the
    frequent-itemset chain with or without a leading NEST (the nest belongs
    to data preparation when width filtering sits between it and the
    powerset step).
    """
    parents = tree.parents()
    spans: list[ModuleSpan] = []
    claimed: set[int] = set()

    # frequent itemsets: powerset-project -> unnest -> group -> threshold -> support
    fi_top: int | None = None
    for n in tree.nodes:
        if not _is_powerset_project(n.op):
            continue
        chain = [n.id]
        cur = n.id
        ok = True
        for probe in (Unnest, Grouping, None, None):
            ps = parents[cur]
            if len(ps) != 1:
                ok = False
                break
            cur = ps[0]
            chain.append(cur)
        if not ok or len(chain) != 5:
            continue
        shape = [tree.node(i).op for i in chain]
        if not (
            isinstance(shape[1], Unnest)
            and isinstance(shape[2], Grouping)
            and _is_threshold_select(shape[3])
            and _is_support_project(shape[4])
        ):
            continue
        child = tree.node(n.id).children[0]
        if isinstance(tree.node(child).op, Nest):
            chain.insert(0, child)
        spans.append(
            ModuleSpan("frequent-itemsets", frozenset(chain), ("minsup",))
        )
        claimed |= set(chain)
        fi_top = chain[-1]

    # rule generation: join(subset) ... conf select ... set-difference project
    for n in tree.nodes:
        if not isinstance(n.op, Join):
            continue
        chain = [n.id]
        cur = n.id
        found_conf = found_diff = False
        while True:
            ps = [p for p in parents[cur]]
            if len(ps) != 1:
                break
            cur = ps[0]
            op = tree.node(cur).op
            if isinstance(op, (Project, Select)):
                chain.append(cur)
                found_conf = found_conf or _is_conf_select(op)
                if _is_setdiff_project(op):
                    found_diff = True
                    break
            else:
                break
        if not (found_conf and found_diff):
            continue
        for c in set(n.children):
            if isinstance(tree.node(c).op, Rename):
                chain.append(c)
        spans.append(
            ModuleSpan("rule-generation", frozenset(chain), ("minconf",))
        )
        claimed |= set(chain)

    # data preparation: the contiguous region between the sources and the
    # frequent-itemset span
    if fi_top is not None:
        fi_span = next(s for s in spans if s.kind == "frequent-itemsets")
        entry = list(tree.node(_lowest(tree, fi_span)).children)
        prep: list[int] = []
        frontier = list(entry)
        while frontier:
            cur = frontier.pop()
            node = tree.node(cur)
            if isinstance(node.op, Source) or cur in claimed:
                continue
            prep.append(cur)
            frontier.extend(node.children)
        if prep:
            spans.append(ModuleSpan("data-preparation", frozenset(prep), ()))
            claimed |= set(prep)

    # keep display labels and fused flags of existing spans when unchanged
    old = {s.kind + ":" + ",".join(map(str, sorted(s.nodes))): s for s in tree.spans}
    merged = []
    ordered = sorted(
        spans, key=lambda s: SPAN_KINDS.index(s.kind)
    )
    for s in ordered:
        key = s.kind + ":" + ",".join(map(str, sorted(s.nodes)))
        prev = old.get(key)
        if prev is not None:
            merged.append(prev)
        else:
            merged.append(s)
    return replace(tree, spans=tuple(merged))


def _lowest(tree: QueryTree, span: ModuleSpan) -> int:
    for nid in span.nodes:
        if not any(c in span.nodes for c in tree.node(nid).children):
            return nid
    return min(span.nodes)
