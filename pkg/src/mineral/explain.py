"""Stable text rendering of trees, rewrite traces and plan tables for the
`explain` surface.  Operators print with their glyph names (with an ASCII
fallback) and the node ids of the template trees match the template step
numbering where applicable."""

from __future__ import annotations

from .expr import AggregateSpec, render_expr, render_predicate
from .optimizer import PhysicalPlan, RewriteResult, Stats, with_costs
from .tree import (
    Difference,
    Grouping,
    Intersection,
    Join,
    Nest,
    PlanNode,
    Product,
    Project,
    QueryTree,
    Rename,
    Select,
    Source,
    Union,
    Unnest,
)

GLYPHS = {
    "select": "σ",      # sigma
    "project": "π",     # pi
    "nest": "Γ",        # Gamma
    "unnest": "η",      # eta
    "group": "⊛",       # circled asterisk
    "powerset": "℘",    # Weierstrass P
    "card": "V",
    "join": "⋈",
    "union": "∪",
    "difference": "−",
    "intersection": "∩",
    "product": "×",
}

ASCII = {
    "select": "sel",
    "project": "proj",
    "nest": "nest",
    "unnest": "unnest",
    "group": "group",
    "powerset": "pow",
    "card": "card",
    "join": "join",
    "union": "union",
    "difference": "difference",
    "intersection": "intersection",
    "product": "product",
}


def _sym(name: str, unicode_ok: bool) -> str:
    return (GLYPHS if unicode_ok else ASCII)[name]


def _render_aggs(aggs) -> str:
    return ", ".join(f"{a.func} {a.target}" for a in aggs)


def node_label(node: PlanNode, unicode_ok: bool = True) -> str:
    op = node.op
    if isinstance(op, Source):
        return op.name
    if isinstance(op, Select):
        return f"{_sym('select', unicode_ok)} {render_predicate(op.predicate)}"
    if isinstance(op, Project):
        inner = ", ".join(f"({n}, {render_expr(e)})" for n, e in op.bindings)
        text = f"{_sym('project', unicode_ok)}({inner})"
        return text if unicode_ok else text.replace("P(", "pow(", 1)
    if isinstance(op, Nest):
        return f"{_sym('nest', unicode_ok)}({', '.join(op.by)})"
    if isinstance(op, Unnest):
        return f"{_sym('unnest', unicode_ok)}({op.attr})"
    if isinstance(op, Grouping):
        return f"{', '.join(op.by)}{_sym('group', unicode_ok)}{_render_aggs(op.aggs)}"
    if isinstance(op, Join):
        return f"{_sym('join', unicode_ok)} {render_predicate(op.predicate)}"
    if isinstance(op, Rename):
        return f"define {', '.join(op.roles)}" if op.roles else "pass"
    if isinstance(op, Union):
        return _sym("union", unicode_ok)
    if isinstance(op, Difference):
        return _sym("difference", unicode_ok)
    if isinstance(op, Intersection):
        return _sym("intersection", unicode_ok)
    if isinstance(op, Product):
        return _sym("product", unicode_ok)
    return type(op).__name__


def render_tree(tree: QueryTree, unicode_ok: bool = True) -> str:
    """Indented tree listing, root first, with node ids and module spans."""
    lines = [f"query tree ({tree.kind}), {len(tree.nodes)} nodes"]
    span_by_node = {}
    for s in tree.spans:
        for nid in s.nodes:
            span_by_node[nid] = s
    printed: set[int] = set()

    def walk(nid: int, depth: int):
        node = tree.node(nid)
        span = span_by_node.get(nid)
        tag = f" [{span.kind}{' fused' if span and span.fused else ''}]" if span else ""
        step = f" (step {node.step})" if node.step else ""
        shared = " (shared)" if nid in printed else ""
        lines.append(f"{'  ' * depth}({nid}){step} {node_label(node, unicode_ok)}{tag}{shared}")
        if nid in printed:
            return
        printed.add(nid)
        for c in node.children:
            walk(c, depth + 1)

    walk(tree.root, 0)
    return "\n".join(lines)


def render_rewrite_trace(result: RewriteResult) -> str:
    if not result.trace:
        return "rewrites: none applied"
    lines = ["rewrites:"]
    for ev in result.trace:
        lines.append(f"  {ev.rule}: {ev.detail}")
    return "\n".join(lines)


def render_plan_table(plans: list[PhysicalPlan], stats: Stats, chosen: PhysicalPlan) -> str:
    costed = with_costs(plans, stats)
    lines = [f"plans (stats: n={stats.n}, m={stats.m}, w={stats.w}):"]
    for i, p in enumerate(costed):
        spans = [
            f"{c.span.kind}={c.algorithm}" for c in p.choices if c.span is not None
        ]
        mark = " *chosen*" if p.key() == chosen.key() else ""
        cost = f"{p.cost}" if p.cost is not None else "?"
        lines.append(f"  plan {i}: cost={cost}  {'; '.join(spans) or 'node-wise'}{mark}")
    return "\n".join(lines)


def render_explain(
    tree: QueryTree,
    rewrite: RewriteResult,
    plans: list[PhysicalPlan],
    stats: Stats,
    chosen: PhysicalPlan,
    unicode_ok: bool = True,
) -> str:
    return "\n".join(
        [
            render_tree(rewrite.tree, unicode_ok),
            "",
            render_rewrite_trace(rewrite),
            "",
            render_plan_table(plans, stats, chosen),
        ]
    )
