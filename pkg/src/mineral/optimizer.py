"""Optimizer stages 3-7: value-independent logical rewrites, algorithm
selection per node/module, alternative-plan enumeration, cost estimation,
and best-plan choice.

The cost unit is an abstract "tuple production", not I/O or time; the model
is the simplest monotone one that makes the final plan choice meaningful:

* naive powerset over the frequent-itemset span costs n * (2^w - 1),
* level-wise (Apriori) mining costs n candidate tests per level, candidates
  at level k bounded by min(C(m,k), n*C(w,k)), levels truncated one past the
  last k where the crude density estimate (w/m)^k still clears minsup,
* the constrained variant additionally truncates levels at the pushed size
  cap and shrinks the item universe,
* rule generation costs F^2 pair tests (F the level-sum itemset estimate),
  plus 3F materialization steps when run node by node,
* remaining nodes cost one scan of the prepared input (n*w) each, joins
  outside the recognized spans (n*w)^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from .expr import (
    And,
    Arith,
    AttrRef,
    Cardinality,
    Compare,
    Const,
    Expr,
    Not,
    Or,
    Powerset,
    Predicate,
    SetDiff,
    attr,
    param_refs,
)
from .mining import ItemsetConstraints
from .model import NestedRelation, Schema
from .params import MiningParams
from .tree import (
    Grouping,
    Join,
    ModuleSpan,
    Nest,
    PlanNode,
    Project,
    QueryTree,
    Rename,
    Select,
    Source,
    Unnest,
    annotate_modules,
)


class OptimizerError(Exception):
    pass


class NoAlgorithmApplicable(OptimizerError):
    def __init__(self, node: int, op: str):
        super().__init__(f"no algorithm in the catalog for node {node} ({op})")
        self.node = node


class EmptyPlanSet(OptimizerError):
    pass


# ---------------------------------------------------------------------------
# Statistics


@dataclass(frozen=True)
class Stats:
    """Dataset statistics the cost formulas consume.

    Per-item frequencies are optional context for future selectivity
    refinements; the shipped formulas use only n, m and w.
    """

    n: int  # transaction count
    m: int  # distinct items
    w: int  # maximum transaction width
    item_freqs: tuple[tuple[str, int], ...] | None = None

    def __post_init__(self):
        if min(self.n, self.m, self.w) < 0 or self.w > max(self.m, 0):
            raise OptimizerError(f"inconsistent stats n={self.n} m={self.m} w={self.w}")


def stats_from_relation(r: NestedRelation, tid: str = "tid", item: str = "item") -> Stats:
    ti, ii = r.schema.index(tid), r.schema.index(item)
    groups: dict = {}
    freqs: dict = {}
    for t in r.tuples:
        groups.setdefault(t[ti], set()).add(t[ii])
        freqs[t[ii]] = freqs.get(t[ii], 0) + 1
    w = max((len(s) for s in groups.values()), default=0)
    return Stats(
        n=len(groups), m=len(freqs), w=w,
        item_freqs=tuple(sorted(freqs.items(), key=lambda kv: repr(kv[0]))),
    )


# ---------------------------------------------------------------------------
# Rewrite rules


@dataclass(frozen=True)
class RewriteRule:
    name: str
    soundness_note: str
    transform: Callable[[QueryTree], QueryTree | None]  # None = no match
    enabled: bool = True


@dataclass(frozen=True)
class RewriteEvent:
    rule: str
    detail: str


@dataclass(frozen=True)
class RewriteResult:
    tree: QueryTree
    trace: tuple[RewriteEvent, ...]


def _single_parent(tree: QueryTree, nid: int) -> bool:
    return len(tree.parents()[nid]) == 1


def _swap_nodes(tree: QueryTree, new_nodes: Iterable[PlanNode], **changes) -> QueryTree:
    return replace(tree, nodes=tuple(new_nodes), **changes)


def _conjuncts(p: Predicate) -> list[Predicate]:
    return list(p.terms) if isinstance(p, And) else [p]


def _fuse_selects(tree: QueryTree) -> QueryTree | None:
    """select(select(r, p1), p2) == select(r, p1 AND p2)."""
    for n in tree.nodes:
        if not isinstance(n.op, Select):
            continue
        child = tree.node(n.children[0])
        if not isinstance(child.op, Select) or not _single_parent(tree, child.id):
            continue
        fused = And(tuple(_conjuncts(child.op.predicate) + _conjuncts(n.op.predicate)))
        nodes = []
        for x in tree.nodes:
            if x.id == child.id:
                continue
            if x.id == n.id:
                nodes.append(replace(x, op=Select(fused), children=child.children))
            else:
                nodes.append(x)
        spans = tuple(
            replace(s, nodes=frozenset(i for i in s.nodes if i != child.id))
            for s in tree.spans
        )
        bps = tuple(
            replace(bp, edge=(bp.edge[0], n.id)) if bp.edge[1] == child.id
            else bp
            for bp in tree.breakpoints
            if bp.edge != (child.id, n.id)
        )
        return _swap_nodes(tree, nodes, spans=spans, breakpoints=bps)
    return None


def _refs_of(p: Predicate) -> set[str]:
    out: set[str] = set()

    def walk_e(e: Expr):
        if isinstance(e, AttrRef):
            out.add(e.name)
        elif isinstance(e, (Arith, SetDiff)):
            walk_e(e.left), walk_e(e.right)
        elif isinstance(e, (Powerset, Cardinality)):
            walk_e(e.arg)

    def walk(q: Predicate):
        if isinstance(q, Compare):
            walk_e(q.left), walk_e(q.right)
        elif isinstance(q, (And, Or)):
            for t in q.terms:
                walk(t)
        elif isinstance(q, Not):
            walk(q.term)

    walk(p)
    return out


def _substitute_refs(p: Predicate, mapping: Mapping[str, Expr]) -> Predicate:
    def sub_e(e: Expr) -> Expr:
        if isinstance(e, AttrRef):
            return mapping.get(e.name, e)
        if isinstance(e, Arith):
            return Arith(e.op, sub_e(e.left), sub_e(e.right))
        if isinstance(e, SetDiff):
            return SetDiff(sub_e(e.left), sub_e(e.right))
        if isinstance(e, Powerset):
            return Powerset(sub_e(e.arg))
        if isinstance(e, Cardinality):
            return Cardinality(sub_e(e.arg))
        return e

    def sub(q: Predicate) -> Predicate:
        if isinstance(q, Compare):
            return Compare(sub_e(q.left), q.op, sub_e(q.right))
        if isinstance(q, And):
            return And(tuple(sub(t) for t in q.terms))
        if isinstance(q, Or):
            return Or(tuple(sub(t) for t in q.terms))
        if isinstance(q, Not):
            return Not(sub(q.term))
        return q

    return sub(p)


def _select_below_project(tree: QueryTree) -> QueryTree | None:
    """Push a selection beneath a projection when the predicate only reads
    pass-through (pure attribute reference) bindings."""
    for n in tree.nodes:
        if not isinstance(n.op, Select):
            continue
        child = tree.node(n.children[0])
        if not isinstance(child.op, Project) or not _single_parent(tree, child.id):
            continue
        pass_through = {
            name: e for name, e in child.op.bindings if isinstance(e, AttrRef)
        }
        refs = _refs_of(n.op.predicate) - set(param_refs(n.op.predicate))
        if not refs or not refs <= set(pass_through):
            continue
        pushed = _substitute_refs(n.op.predicate, pass_through)
        nodes = []
        for x in tree.nodes:
            if x.id == n.id:  # select takes the project's place
                nodes.append(replace(x, op=child.op, children=(child.id,)))
            elif x.id == child.id:  # project becomes the pushed select
                nodes.append(replace(x, op=Select(pushed), children=child.children))
            else:
                nodes.append(x)
        return _swap_nodes(tree, nodes)
    return None


def _select_below_join(tree: QueryTree) -> QueryTree | None:
    """Push side-local conjuncts of a selection over a join into the
    corresponding input (children must be distinct subtrees)."""
    for n in tree.nodes:
        if not isinstance(n.op, Select):
            continue
        child = tree.node(n.children[0])
        if not isinstance(child.op, Join) or not _single_parent(tree, child.id):
            continue
        left_id, right_id = child.children
        if left_id == right_id:
            continue
        lp, rp = child.op.left_role + ".", child.op.right_role + "."
        stay: list[Predicate] = []
        push_left: list[Predicate] = []
        push_right: list[Predicate] = []
        for term in _conjuncts(n.op.predicate):
            refs = _refs_of(term) - set(param_refs(term))
            if refs and all(r.startswith(lp) for r in refs):
                push_left.append(
                    _substitute_refs(term, {r: attr(r[len(lp):]) for r in refs})
                )
            elif refs and all(r.startswith(rp) for r in refs):
                push_right.append(
                    _substitute_refs(term, {r: attr(r[len(rp):]) for r in refs})
                )
            else:
                stay.append(term)
        if not push_left and not push_right:
            continue
        next_id = max(x.id for x in tree.nodes) + 1
        nodes = list(tree.nodes)
        new_left, new_right = left_id, right_id
        if push_left:
            pred = push_left[0] if len(push_left) == 1 else And(tuple(push_left))
            nodes.append(PlanNode(next_id, Select(pred), (left_id,)))
            new_left = next_id
            next_id += 1
        if push_right:
            pred = push_right[0] if len(push_right) == 1 else And(tuple(push_right))
            nodes.append(PlanNode(next_id, Select(pred), (right_id,)))
            new_right = next_id
            next_id += 1
        out = []
        for x in nodes:
            if x.id == child.id:
                out.append(replace(x, children=(new_left, new_right)))
            elif x.id == n.id:
                if stay:
                    pred = stay[0] if len(stay) == 1 else And(tuple(stay))
                    out.append(replace(x, op=Select(pred)))
                else:
                    out.append(replace(x, op=Rename(()), children=(child.id,)))
            else:
                out.append(x)
        return _swap_nodes(tree, out)
    return None


def _fuse_powerset_prune(tree: QueryTree) -> QueryTree | None:
    """Mark frequent-itemset spans fusable: powerset generation combines with
    support pruning into one constrained-powerset unit a module-level
    algorithm may implement."""
    if not any(s.kind == "frequent-itemsets" for s in tree.spans):
        tree = annotate_modules(tree)
    changed = False
    spans = []
    for s in tree.spans:
        if s.kind == "frequent-itemsets" and not s.fused:
            spans.append(replace(s, fused=True))
            changed = True
        else:
            spans.append(s)
    return replace(tree, spans=tuple(spans)) if changed else None


def _branch_lower_bounds(tree: QueryTree, fi_top: int) -> list[int]:
    """Lower cardinality bound each branch select enforces on itemsets."""
    parents = tree.parents()
    bounds = []
    stack = list(parents[fi_top])
    seen = set()
    while stack:
        nid = stack.pop()
        if nid in seen:
            continue
        seen.add(nid)
        node = tree.node(nid)
        if isinstance(node.op, Select):
            lo = _card_lower_bound(node.op.predicate)
            if lo is not None:
                bounds.append(lo)
                continue
        if isinstance(node.op, (Project, Select, Rename)):
            stack.extend(parents[nid])
    return bounds


def _card_lower_bound(p: Predicate) -> int | None:
    for term in _conjuncts(p):
        if not isinstance(term, Compare):
            continue
        left, op, right = term.left, term.op, term.right
        if isinstance(left, AttrRef) and left.name == "num_of_items" and isinstance(right, Const):
            if op == "=" or op == ">=":
                return int(right.value)
    return None


def _push_cardinality_constraint(tree: QueryTree) -> QueryTree | None:
    """Insert the data-preparation width filter of a constrained query:
    transactions narrower than the minimum body cardinality cannot support
    any itemset of that size, so dropping them is support-preserving."""
    fi = next((s for s in tree.spans if s.kind == "frequent-itemsets"), None)
    if fi is None:
        annotated = annotate_modules(tree)
        fi = next((s for s in annotated.spans if s.kind == "frequent-itemsets"), None)
        if fi is None:
            return None
        tree = annotated
    fi_top = _span_top(tree, fi)
    bounds = _branch_lower_bounds(tree, fi_top)
    if len(bounds) < 2 or min(bounds) < 2:
        return None
    lo = min(bounds)
    # already width-filtered?
    for n in tree.nodes:
        if isinstance(n.op, Select) and "count_item" in _refs_of(n.op.predicate):
            return None
    nest_id = next(
        (n.id for n in tree.nodes if isinstance(n.op, Nest)), None
    )
    if nest_id is None:
        return None
    parents = tree.parents()[nest_id]
    if len(parents) != 1:
        return None
    parent = tree.node(parents[0])
    next_id = max(n.id for n in tree.nodes) + 1
    proj = PlanNode(
        next_id,
        Project(
            (
                ("tid", attr("tid")),
                ("item", attr("item")),
                ("count_item", Cardinality(attr("item"))),
            )
        ),
        (nest_id,),
    )
    sel = PlanNode(
        next_id + 1,
        Select(Compare(attr("count_item"), ">=", Const(lo))),
        (proj.id,),
    )
    nodes = []
    for x in tree.nodes:
        if x.id == parent.id:
            nodes.append(
                replace(x, children=tuple(sel.id if c == nest_id else c for c in x.children))
            )
        else:
            nodes.append(x)
    nodes += [proj, sel]
    spans = tuple(
        replace(s, nodes=s.nodes | {proj.id, sel.id})
        if s.kind == "data-preparation" and nest_id in s.nodes
        else s
        for s in tree.spans
    )
    return _swap_nodes(tree, nodes, spans=spans)


def _push_item_constraints(tree: QueryTree) -> QueryTree | None:
    """Record the item-level constraints of a constrained query on the
    frequent-itemset span so the constrained mining algorithm can prune
    during generation (branch selections still re-check)."""
    if tree.caq is None:
        return None
    derived = derive_caq_constraints(tree.caq)
    if derived == ItemsetConstraints():
        return None
    changed = False
    spans = []
    for s in tree.spans:
        if s.kind == "frequent-itemsets" and s.constraints is None:
            spans.append(replace(s, constraints=derived))
            changed = True
        else:
            spans.append(s)
    return replace(tree, spans=tuple(spans)) if changed else None


def _group_by_pull_up(tree: QueryTree) -> QueryTree | None:
    # named in the source framework but never constructed there; retained as
    # a disabled identity stub
    return None


def standard_rules() -> tuple[RewriteRule, ...]:
    return (
        RewriteRule(
            "select-fusion",
            "conjunction of cascaded selections filters the same tuples",
            _fuse_selects,
        ),
        RewriteRule(
            "select-below-project",
            "selection on pass-through attributes commutes with projection",
            _select_below_project,
        ),
        RewriteRule(
            "select-below-join",
            "side-local conjuncts filter one input without changing matches",
            _select_below_join,
        ),
        RewriteRule(
            "fuse-powerset-prune",
            "powerset generation combined with support pruning is the same map",
            _fuse_powerset_prune,
        ),
        RewriteRule(
            "push-cardinality-constraint",
            "transactions narrower than the minimum body cardinality support no rule",
            _push_cardinality_constraint,
        ),
        RewriteRule(
            "push-item-constraints",
            "generation-time item pruning; branch selections re-check the output",
            _push_item_constraints,
        ),
        RewriteRule(
            "group-by-pull-up",
            "identity stub; no worked construction exists",
            _group_by_pull_up,
            enabled=False,
        ),
    )


def apply_rewrites(
    tree: QueryTree, rules: Sequence[RewriteRule] | None = None
) -> RewriteResult:
    """Fixed-point application in deterministic rule order."""
    if rules is None:
        rules = standard_rules()
    trace: list[RewriteEvent] = []
    for _ in range(100):
        progressed = False
        for rule in rules:
            if not rule.enabled:
                continue
            out = rule.transform(tree)
            if out is not None:
                trace.append(RewriteEvent(rule.name, rule.soundness_note))
                tree = out
                progressed = True
                break
        if not progressed:
            break
    return RewriteResult(tree, tuple(trace))


# ---------------------------------------------------------------------------
# Plans


@dataclass(frozen=True)
class AlgoChoice:
    """An algorithm assigned to one node or one module span."""

    algorithm: str
    node: int | None = None
    span: ModuleSpan | None = None

    def target_key(self) -> str:
        if self.span is not None:
            return f"span:{self.span.kind}"
        return f"node:{self.node}"


@dataclass(frozen=True)
class PhysicalPlan:
    tree: QueryTree
    choices: tuple[AlgoChoice, ...]
    cost: Fraction | None = None

    def key(self) -> str:
        return ";".join(
            f"{c.target_key()}={c.algorithm}" for c in sorted(self.choices, key=lambda c: c.target_key())
        )

    def choice_for_span(self, kind: str) -> str | None:
        for c in self.choices:
            if c.span is not None and c.span.kind == kind:
                return c.algorithm
        return None


FI_ALGOS = ("NaivePowerset", "Apriori", "ConstrainedApriori")
RG_ALGOS = ("StepwiseRuleGen", "DirectRuleGen")

NODE_ALGOS = {
    Source: "scan-filter",
    Select: "scan-filter",
    Project: "scan-filter",
    Unnest: "scan-filter",
    Rename: "scan-filter",
    Nest: "hash-group",
    Grouping: "hash-group",
    Join: "nested-loop-join",
}

DEFAULT_CATALOG: dict = {
    "frequent-itemsets": FI_ALGOS,
    "rule-generation": RG_ALGOS,
    "nodes": NODE_ALGOS,
}


def _span_top(tree: QueryTree, span: ModuleSpan) -> int:
    parents = tree.parents()
    for nid in span.nodes:
        if not any(p in span.nodes for p in parents[nid]):
            return nid
    return max(span.nodes)


def derive_caq_constraints(caq) -> ItemsetConstraints:
    """Constraints safely pushable into shared frequent-itemset generation:
    the size band must admit bodies and body+head supersets; only items
    banned from both sides can leave the universe."""
    body, head = caq.body, caq.head
    hi = None
    if body.card_hi is not None and head.card_hi is not None:
        hi = body.card_hi + head.card_hi
    universe = None
    if body.subset_of is not None and head.subset_of is not None:
        universe = body.subset_of | head.subset_of
    return ItemsetConstraints(
        size_lo=1,
        size_hi=hi,
        must_contain=frozenset(),
        must_not_contain=body.must_not_contain & head.must_not_contain,
        universe=universe,
    )


def span_constraints(tree: QueryTree, span: ModuleSpan) -> ItemsetConstraints:
    """Constraints the constrained mining algorithm may use for a span."""
    if span.constraints is not None:
        return span.constraints
    if tree.caq is not None:
        return derive_caq_constraints(tree.caq)
    return ItemsetConstraints()


def enumerate_plans(
    tree: QueryTree,
    catalog: Mapping | None = None,
    max_plans: int = 64,
) -> list[PhysicalPlan]:
    """Cartesian product of applicable choices per span, capped and ordered
    deterministically.  Nodes outside recognized spans get their single
    node-level algorithm."""
    catalog = dict(DEFAULT_CATALOG if catalog is None else catalog)
    if not tree.spans:
        tree = annotate_modules(tree)
    node_algos = catalog.get("nodes", NODE_ALGOS)
    span_nodes: set[int] = set()
    span_options: list[list[AlgoChoice]] = []
    for span in tree.spans:
        algos = catalog.get(span.kind, ())
        if algos:
            span_nodes |= set(span.nodes)
            span_options.append([AlgoChoice(a, span=span) for a in algos])
    node_choices: list[AlgoChoice] = []
    for n in tree.nodes:
        if n.id in span_nodes:
            continue
        algo = node_algos.get(type(n.op))
        if algo is None:
            raise NoAlgorithmApplicable(n.id, type(n.op).__name__)
        node_choices.append(AlgoChoice(algo, node=n.id))
    plans: list[PhysicalPlan] = []

    def expand(i: int, picked: list[AlgoChoice]):
        if len(plans) >= max_plans:
            return
        if i == len(span_options):
            plans.append(PhysicalPlan(tree, tuple(picked + node_choices)))
            return
        for choice in span_options[i]:
            expand(i + 1, picked + [choice])

    expand(0, [])
    return plans


def reference_plan(tree: QueryTree) -> PhysicalPlan:
    """The stepwise plan: every span runs node by node through the reference
    operators, so every node materializes (trace mode, golden tests)."""
    if not tree.spans:
        tree = annotate_modules(tree)
    choices = []
    span_nodes: set[int] = set()
    for span in tree.spans:
        if span.kind == "frequent-itemsets":
            choices.append(AlgoChoice("NaivePowerset", span=span))
            span_nodes |= set(span.nodes)
        elif span.kind == "rule-generation":
            choices.append(AlgoChoice("StepwiseRuleGen", span=span))
            span_nodes |= set(span.nodes)
    for n in tree.nodes:
        if n.id not in span_nodes:
            choices.append(AlgoChoice(NODE_ALGOS.get(type(n.op), "scan-filter"), node=n.id))
    return PhysicalPlan(tree, tuple(choices))


# ---------------------------------------------------------------------------
# Cost model


def _level_candidates(stats: Stats, k: int) -> int:
    return min(math.comb(stats.m, k), stats.n * math.comb(stats.w, k))


def _passing_levels(stats: Stats, minsup: Fraction) -> int:
    """Last level the density estimate (w/m)^k predicts to be non-empty."""
    if stats.w == 0 or stats.m == 0 or stats.n == 0:
        return 0
    p = Fraction(stats.w, stats.m)
    k = 0
    while k < stats.w and p ** (k + 1) > minsup:
        k += 1
    return max(k, 1)


def _itemset_estimate(stats: Stats, minsup: Fraction, size_hi: int | None = None) -> int:
    last = _passing_levels(stats, minsup)
    if size_hi is not None:
        last = min(last, size_hi)
    return sum(_level_candidates(stats, k) for k in range(1, last + 1))


def _fi_cost(algorithm: str, stats: Stats, params: MiningParams,
             constraints: ItemsetConstraints) -> Fraction:
    if stats.n == 0 or stats.w == 0:
        return Fraction(0)
    if algorithm == "NaivePowerset":
        return Fraction(stats.n) * ((1 << stats.w) - 1)
    last = _passing_levels(stats, params.minsup)
    gen_to = last + 1
    eff = stats
    if algorithm == "ConstrainedApriori":
        if constraints.size_hi is not None:
            gen_to = min(gen_to, constraints.size_hi)
        if constraints.universe is not None:
            m = min(stats.m, len(constraints.universe))
            eff = Stats(stats.n, m, min(stats.w, m))
    total = sum(_level_candidates(eff, k) for k in range(1, gen_to + 1))
    return Fraction(total) * stats.n


def estimate_cost(plan: PhysicalPlan, stats: Stats) -> Fraction:
    """Deterministic abstract cost of a plan under the given statistics."""
    params = plan.tree.params
    scan = Fraction(stats.n * max(stats.w, 1))
    fi_est = _itemset_estimate(stats, params.minsup)
    total = Fraction(0)
    for choice in plan.choices:
        if choice.span is not None:
            if choice.span.kind == "frequent-itemsets":
                total += _fi_cost(
                    choice.algorithm, stats, params,
                    span_constraints(plan.tree, choice.span),
                )
            elif choice.span.kind == "rule-generation":
                pairs = Fraction(fi_est) * fi_est
                if choice.algorithm == "StepwiseRuleGen":
                    pairs += 3 * fi_est
                total += pairs
            else:
                total += scan * len(choice.span.nodes)
        else:
            op = type(plan.tree.node(choice.node).op)
            total += scan * scan if op is Join else scan
    return total


def with_costs(plans: Sequence[PhysicalPlan], stats: Stats) -> list[PhysicalPlan]:
    return [replace(p, cost=estimate_cost(p, stats)) for p in plans]


def choose_plan(plans: Sequence[PhysicalPlan], stats: Stats) -> PhysicalPlan:
    """Minimum estimated cost wins; ties break on the deterministic plan key."""
    if not plans:
        raise EmptyPlanSet("no plans to choose from")
    costed = with_costs(plans, stats)
    return min(costed, key=lambda p: (p.cost, p.key()))
