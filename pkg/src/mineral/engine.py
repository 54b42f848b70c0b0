"""Breakpoint-capable execution engine.

A Session materializes a physical plan node by node in dependency order
(children before parents, the A branch of a join fully before the B branch),
keeping an immutable snapshot per node.  Execution pauses at enabled
breakpoint edges; while paused the user may inspect snapshots, edit minsup or
minconf (invalidating exactly the dependent nodes and their ancestors),
resume, or cancel.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Mapping

from . import ops
from .mining import (
    POWERSET_ROW_CAP,
    ItemsetConstraints,
    ResourceLimit,
    apriori_frequent_itemsets,
    naive_frequent_itemsets,
    rules_from_branches,
    transactions_from_relation,
)
from .model import NestedRelation, Schema, SetType, canonical_render, set_of, RATIONAL
from .optimizer import PhysicalPlan, reference_plan, span_constraints
from .params import InvalidValue, MiningParams
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
    Difference,
    Intersection,
    Product,
    Union,
    validate_tree,
)
from .expr import Powerset, compile_expr


class EngineError(Exception):
    pass


class UnboundSource(EngineError):
    def __init__(self, name: str):
        super().__init__(f"source relation {name!r} is not bound")
        self.name = name


class NotMaterialized(EngineError):
    def __init__(self, node: int):
        super().__init__(f"node {node} is not materialized")
        self.node = node


class SessionBusy(EngineError):
    pass


class Cancelled(EngineError):
    pass


class InvalidBreakpoint(EngineError):
    """A breakpoint strictly inside a span executed atomically by a
    module-level algorithm; such an edge would have to map onto the
    algorithm's internals, which an atomic span cannot honor."""


class NodeState(str, Enum):
    PENDING = "pending"
    MATERIALIZED = "materialized"
    INVALIDATED = "invalidated"


@dataclass(frozen=True)
class Snapshot:
    node: int
    relation: NestedRelation
    rows: int
    produced_at: int

    def render(self) -> str:
        return canonical_render(self.relation)


@dataclass(frozen=True)
class PauseReport:
    materialized: tuple[tuple[int, int], ...]  # (node id, row count)
    paused_at: tuple[int, int] | None  # breakpoint edge, when paused there
    done: bool


@dataclass(frozen=True)
class InvalidationReport:
    param: str
    invalidated: tuple[int, ...]


_session_ids = itertools.count(1)


class Session:
    """One interactive execution of a physical plan over bound relations."""

    def __init__(
        self,
        plan: PhysicalPlan | QueryTree,
        data: Mapping[str, NestedRelation],
        session_id: str | None = None,
        row_cap: int = POWERSET_ROW_CAP,
        validate: bool = True,
    ):
        if isinstance(plan, QueryTree):
            plan = reference_plan(plan)
        self.plan = plan
        self.tree = plan.tree
        self.id = session_id or f"s{next(_session_ids)}"
        self.row_cap = row_cap
        self.data = dict(data)
        for name in self.tree.source_names():
            if name not in self.data:
                raise UnboundSource(name)
        if validate:
            defects = validate_tree(self.tree, {k: v.schema for k, v in self.data.items()})
            if defects:
                raise EngineError(f"invalid tree: {defects[0].message}")
        self.params = self._bind_n(self.tree.params)
        self._atomic = self._atomic_spans()
        self._skip = {
            nid for span, _ in self._atomic.values() for nid in span.nodes
        } - {top for top in self._atomic}
        self.breakpoints: set[tuple[int, int]] = {
            tuple(bp.edge) for bp in self.tree.breakpoints if bp.enabled
        }
        self._check_breakpoints()
        self.order = [n for n in self.tree.evaluation_order() if n not in self._skip]
        self.states: dict[int, NodeState] = {n.id: NodeState.PENDING for n in self.tree.nodes}
        self.snapshots: dict[int, Snapshot] = {}
        self.events: list[str] = []
        self.status = "paused"
        self._cleared: set[tuple[int, int]] = set()
        self._counter = 0
        self._target: int | str = "end"
        self._log("open", None)

    # -- construction helpers ------------------------------------------------

    def _bind_n(self, params: MiningParams) -> MiningParams:
        if self.tree.n_binding is None:
            return params
        source, tid_attr = self.tree.n_binding
        rel = self.data[source]
        i = rel.schema.index(tid_attr)
        n = len({t[i] for t in rel.tuples})
        return params.with_(n=n if n > 0 else 1)

    def _atomic_spans(self) -> dict[int, tuple[ModuleSpan, str]]:
        """Span-top node id -> (span, algorithm) for module-level choices."""
        out: dict[int, tuple[ModuleSpan, str]] = {}
        for choice in self.plan.choices:
            if choice.span is None or choice.algorithm in ("NaivePowerset", "StepwiseRuleGen"):
                continue
            top = self._span_top(choice.span)
            out[top] = (choice.span, choice.algorithm)
        return out

    def _span_top(self, span: ModuleSpan) -> int:
        parents = self.tree.parents()
        for nid in span.nodes:
            if not any(p in span.nodes for p in parents[nid]):
                return nid
        raise EngineError(f"span {span.kind} has no top node")

    def _check_breakpoints(self) -> None:
        for edge in self.breakpoints:
            child, parent = edge
            for span, algo in self._atomic.values():
                if child in span.nodes and parent in span.nodes:
                    raise InvalidBreakpoint(
                        f"breakpoint {edge} lies inside the {span.kind} span, "
                        f"which plan algorithm {algo} executes atomically"
                    )

    def _log(self, event: str, node: int | None) -> None:
        self.events.append(f"{time.time():.6f}\t{event}\t{'' if node is None else node}")

    # -- public API ----------------------------------------------------------

    def set_breakpoint(self, edge: tuple[int, int], enabled: bool = True) -> None:
        self._require_not_cancelled()
        if self.status == "running":
            raise SessionBusy("cannot toggle breakpoints while running")
        if tuple(edge) not in set(self.tree.edges()):
            raise EngineError(f"no edge {edge} in the tree")
        if enabled:
            self.breakpoints.add(tuple(edge))
            self._check_breakpoints()
        else:
            self.breakpoints.discard(tuple(edge))

    def run_until(self, target: int | str = "end") -> PauseReport:
        """Materialize toward `target`: a node id, "breakpoint", or "end"."""
        self._require_not_cancelled()
        if self.status == "running":
            raise SessionBusy("session is already running")
        if isinstance(target, int) and target not in self.tree:
            raise EngineError(f"no node {target}")
        self._target = target if isinstance(target, int) else "end"
        stop_at_bp = True
        return self._advance(self._target, stop_at_bp)

    def resume(self) -> PauseReport:
        """Continue to the next breakpoint or completion, recomputing any
        invalidated nodes along the way."""
        self._require_not_cancelled()
        if self.status == "running":
            raise SessionBusy("session is already running")
        self._log("resume", None)
        return self._advance(self._target, True)

    def step(self) -> PauseReport:
        """Materialize exactly the next pending node on the path to the root."""
        self._require_not_cancelled()
        if self.status == "running":
            raise SessionBusy("session is already running")
        for nid in self.order:
            if self.states[nid] is not NodeState.MATERIALIZED:
                return self._advance(nid, False)
        return PauseReport((), None, True)

    def cancel(self) -> None:
        self.status = "cancelled"
        self._log("cancel", None)

    def inspect(self, node: int) -> Snapshot:
        if node not in self.tree:
            raise EngineError(f"no node {node}")
        snap = self.snapshots.get(node)
        if snap is None or self.states[node] is not NodeState.MATERIALIZED:
            raise NotMaterialized(node)
        return snap

    def set_param(self, name: str, value) -> InvalidationReport:
        self._require_not_cancelled()
        if self.status == "running":
            raise SessionBusy("session is busy")
        if name not in ("minsup", "minconf"):
            raise InvalidValue(f"only minsup and minconf are editable, not {name!r}")
        value = Fraction(value)
        if not 0 < value <= 1:
            raise InvalidValue(f"{name} must be in (0,1], got {value}")
        self.params = self.params.with_(**{name: value})
        dependents = self.tree.param_dependents().get(name, set())
        dirty = self._with_ancestors(dependents)
        invalidated = []
        for nid in self.order:
            if nid in dirty and self.states[nid] is NodeState.MATERIALIZED:
                self.states[nid] = NodeState.INVALIDATED
                self.snapshots.pop(nid, None)
                invalidated.append(nid)
        for edge in list(self._cleared):
            if edge[1] in invalidated:  # re-executed nodes re-arm their breakpoints
                self._cleared.discard(edge)
        if self.status == "done" and invalidated:
            self.status = "paused"
        self._log(f"set:{name}={value}", None)
        return InvalidationReport(name, tuple(invalidated))

    def trace(self) -> list[Snapshot]:
        """Operator-node snapshots in evaluation order (materialized only).

        Sources are inputs, not intermediate results, so they are
        omitted from the trace; inspect() still serves them."""
        return [
            self.snapshots[n]
            for n in self.order
            if n in self.snapshots and not isinstance(self.tree.node(n).op, Source)
        ]

    # -- execution core --------------------------------------------------

    def _require_not_cancelled(self):
        if self.status == "cancelled":
            raise Cancelled("session is cancelled")

    def _with_ancestors(self, seeds: set[int]) -> set[int]:
        parents = self.tree.parents()
        out = set(seeds)
        frontier = list(seeds)
        while frontier:
            for p in parents[frontier.pop()]:
                if p not in out:
                    out.add(p)
                    frontier.append(p)
        return out

    def _needed(self, target: int | str) -> set[int]:
        if target == "end":
            root = self.tree.root
        else:
            root = target
        need: set[int] = set()
        frontier = [root]
        while frontier:
            cur = frontier.pop()
            if cur in need:
                continue
            need.add(cur)
            frontier.extend(self.tree.node(cur).children)
        return need

    def _advance(self, target: int | str, stop_at_bp: bool) -> PauseReport:
        self.status = "running"
        needed = self._needed(target)
        materialized: list[tuple[int, int]] = []
        try:
            for nid in self.order:
                if nid not in needed or nid in self._skip:
                    continue
                if self.states[nid] is NodeState.MATERIALIZED:
                    continue
                if stop_at_bp:
                    for edge in sorted(self.breakpoints):
                        child, parent = edge
                        if parent != nid:
                            continue
                        if edge in self._cleared:
                            continue
                        if self.states.get(child) is NodeState.MATERIALIZED or child in self._skip:
                            self._cleared.add(edge)
                            self.status = "paused"
                            self._log("pause", nid)
                            return PauseReport(tuple(materialized), edge, False)
                snap = self._execute(nid)
                self.snapshots[nid] = snap
                self.states[nid] = NodeState.MATERIALIZED
                materialized.append((nid, snap.rows))
                self._log("materialize", nid)
                if nid == target:
                    break
        except Exception:
            self.status = "paused"
            raise
        done = self.states[self.tree.root] is NodeState.MATERIALIZED
        self.status = "done" if done else "paused"
        self._log("done" if done else "pause", None)
        return PauseReport(tuple(materialized), None, done)

    def _execute(self, nid: int) -> Snapshot:
        node = self.tree.node(nid)
        if nid in self._atomic:
            rel = self._execute_span(*self._atomic[nid])
        else:
            rel = self._execute_node(node)
        self._counter += 1
        return Snapshot(nid, rel, len(rel), self._counter)

    def _child_rel(self, nid: int) -> NestedRelation:
        state = self.states[nid]
        if state is not NodeState.MATERIALIZED:
            raise NotMaterialized(nid)
        return self.snapshots[nid].relation

    def _execute_node(self, node: PlanNode) -> NestedRelation:
        op = node.op
        bind = self.params.bindings()
        if isinstance(op, Source):
            return self.data[op.name]
        inputs = [self._child_rel(c) for c in node.children]
        if isinstance(op, Select):
            return ops.select(inputs[0], op.predicate, bind)
        if isinstance(op, Project):
            self._enforce_cap(op, inputs[0])
            return ops.project(inputs[0], op.bindings, bind)
        if isinstance(op, Nest):
            return ops.nest(inputs[0], op.by)
        if isinstance(op, Unnest):
            return ops.unnest(inputs[0], op.attr)
        if isinstance(op, Grouping):
            return ops.grouping(inputs[0], op.by, op.aggs)
        if isinstance(op, Join):
            return ops.join(
                inputs[0], inputs[1], op.predicate,
                roles=(op.left_role, op.right_role), params=bind,
            )
        if isinstance(op, Union):
            return ops.union(inputs[0], inputs[1])
        if isinstance(op, Difference):
            return ops.difference(inputs[0], inputs[1])
        if isinstance(op, Intersection):
            return ops.intersection(inputs[0], inputs[1])
        if isinstance(op, Product):
            return ops.product(inputs[0], inputs[1])
        if isinstance(op, Rename):
            return inputs[0]
        raise EngineError(f"cannot execute {op!r}")

    def _enforce_cap(self, op: Project, rel: NestedRelation) -> None:
        for _, e in op.bindings:
            if isinstance(e, Powerset):
                f, _t = compile_expr(e.arg, rel.schema, self.params.bindings())
                expansion = sum((1 << len(f(t))) - 1 for t in rel.tuples)
                if expansion > self.row_cap:
                    raise ResourceLimit(
                        f"powerset expansion of {expansion} rows exceeds the cap "
                        f"of {self.row_cap}"
                    )

    def _span_bottom_input(self, span: ModuleSpan) -> NestedRelation:
        bottoms = [
            nid for nid in span.nodes
            if not any(c in span.nodes for c in self.tree.node(nid).children)
        ]
        # the FI span has one entry; rule-generation has the two branches
        if len(bottoms) != 1:
            raise EngineError(f"span {span.kind} has {len(bottoms)} entry nodes")
        children = self.tree.node(bottoms[0]).children
        return self._child_rel(children[0])

    def _execute_span(self, span: ModuleSpan, algorithm: str) -> NestedRelation:
        if span.kind == "frequent-itemsets":
            rel = self._span_bottom_input(span)
            ts = transactions_from_relation(rel, n=self.params.n)
            if algorithm == "Apriori":
                freq = apriori_frequent_itemsets(ts, self.params)
            elif algorithm == "ConstrainedApriori":
                freq = apriori_frequent_itemsets(
                    ts, self.params, span_constraints(self.tree, span)
                )
            else:
                freq = naive_frequent_itemsets(ts, self.params, self.row_cap)
            top = self.tree.node(self._span_top(span))
            names = [n for n, _ in top.op.bindings]
            item_t = rel.schema.type_of("item")
            elem = item_t.element if isinstance(item_t, SetType) else item_t
            schema = Schema([(names[0], set_of(elem)), (names[1], RATIONAL)])
            return NestedRelation(
                schema, frozenset((s, sup) for s, sup in freq.items())
            )
        if span.kind == "rule-generation":
            join_id = next(
                nid for nid in span.nodes if isinstance(self.tree.node(nid).op, Join)
            )
            join_node = self.tree.node(join_id)
            sides = []
            for c in join_node.children:
                cur = c
                while cur in span.nodes:
                    cur = self.tree.node(cur).children[0]
                sides.append(self._child_rel(cur))
            a_rel, b_rel = sides

            def branch_supports(rel: NestedRelation) -> dict:
                si = next(
                    i for i, (_, t) in enumerate(rel.schema.attrs)
                    if isinstance(t, SetType)
                )
                ri = next(
                    i for i, (_, t) in enumerate(rel.schema.attrs)
                    if not isinstance(t, SetType)
                )
                return {t[si]: t[ri] for t in rel.tuples}

            rules = rules_from_branches(
                branch_supports(a_rel), branch_supports(b_rel), self.params
            )
            top = self.tree.node(self._span_top(span))
            names = [n for n, _ in top.op.bindings]
            item_t = a_rel.schema.attrs[0][1]
            schema = Schema(
                [(names[0], item_t), (names[1], item_t), (names[2], RATIONAL), (names[3], RATIONAL)]
            )
            return NestedRelation(
                schema,
                frozenset((r.body, r.head, r.sup, r.conf) for r in rules),
            )
        raise EngineError(f"no module algorithm for span kind {span.kind}")


def open_session(
    plan: PhysicalPlan | QueryTree,
    data: Mapping[str, NestedRelation],
    session_id: str | None = None,
) -> Session:
    return Session(plan, data, session_id)


def run_to_completion(
    plan: PhysicalPlan | QueryTree,
    data: Mapping[str, NestedRelation],
    validate: bool = True,
) -> NestedRelation:
    """Evaluate a plan start to finish and return the root relation."""
    session = Session(plan, data, validate=validate)
    session.run_until("end")
    return session.inspect(session.tree.root).relation


def trace_all(
    plan: PhysicalPlan | QueryTree, data: Mapping[str, NestedRelation]
) -> list[Snapshot]:
    """Run to completion with a snapshot per node, in evaluation order."""
    session = Session(plan, data)
    session.run_until("end")
    return session.trace()
