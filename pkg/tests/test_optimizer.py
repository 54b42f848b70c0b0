from fractions import Fraction

import pytest

from mineral.engine import run_to_completion
from mineral.expr import AggregateSpec, Arith, Compare, Const, ParamRef, attr
from mineral.mining import ItemsetConstraints
from mineral.model import INT, STRING, Schema, make_relation, relation_equal
from mineral.params import MiningParams
from mineral.optimizer import (
    AlgoChoice,
    EmptyPlanSet,
    NoAlgorithmApplicable,
    PhysicalPlan,
    Stats,
    apply_rewrites,
    choose_plan,
    enumerate_plans,
    estimate_cost,
    reference_plan,
    standard_rules,
    stats_from_relation,
    with_costs,
)
from mineral.tree import (
    CAQSpec,
    Join,
    PlanNode,
    Project,
    QueryTree,
    Select,
    SideConstraints,
    Source,
    build_caq_tree,
    build_classic_tree,
    build_mine_rule_tree,
)
from tests.conftest import TID_ITEM

F = Fraction
DESK = Stats(n=4, m=5, w=3)
WIDE = Stats(n=1000, m=50, w=20)


def rule_named(name):
    return next(r for r in standard_rules() if r.name == name)


# -- individual rewrite rules --------------------------------------------------

def test_select_fusion_fires_and_preserves_output(purchase):
    params = MiningParams(F(1, 2), F(1, 2))
    p1 = Compare(attr("tid"), ">", Const(1))
    p2 = Compare(attr("item"), "=", Const("J"))
    tree = QueryTree(
        nodes=(
            PlanNode(0, Source("R")),
            PlanNode(1, Select(p1), (0,)),
            PlanNode(2, Select(p2), (1,)),
        ),
        root=2, params=params,
    )
    out = rule_named("select-fusion").transform(tree)
    assert out is not None
    assert len(out.nodes) == 2
    assert relation_equal(
        run_to_completion(out, {"R": purchase}),
        run_to_completion(tree, {"R": purchase}),
    )


def test_select_below_project_fires(purchase):
    params = MiningParams(F(1, 2), F(1, 2))
    tree = QueryTree(
        nodes=(
            PlanNode(0, Source("R")),
            PlanNode(1, Project((("t", attr("tid")), ("item", attr("item")))), (0,)),
            PlanNode(2, Select(Compare(attr("t"), ">", Const(2))), (1,)),
        ),
        root=2, params=params,
    )
    out = rule_named("select-below-project").transform(tree)
    assert out is not None
    root_node = out.node(out.root)
    assert isinstance(root_node.op, Project)  # projection now on top
    assert relation_equal(
        run_to_completion(out, {"R": purchase}),
        run_to_completion(tree, {"R": purchase}),
    )


def test_select_below_project_skips_computed_bindings(classic_params):
    tree = build_classic_tree("Purchase", classic_params)
    # the conf filter reads a computed attribute; the rule must not fire there
    assert rule_named("select-below-project").transform(tree) is None


def test_select_below_join_fires(purchase):
    params = MiningParams(F(1, 2), F(1, 2))
    a = make_relation(TID_ITEM, [(1, "x"), (2, "y")])
    join_pred = Compare(attr("A.tid"), "=", attr("B.tid"))
    local = Compare(attr("A.item"), "=", Const("J"))
    tree = QueryTree(
        nodes=(
            PlanNode(0, Source("R")),
            PlanNode(1, Source("S")),
            PlanNode(2, Join(join_pred), (0, 1)),
            PlanNode(3, Select(local), (2,)),
        ),
        root=3, params=params,
    )
    out = rule_named("select-below-join").transform(tree)
    assert out is not None
    data = {"R": purchase, "S": a}
    assert relation_equal(
        run_to_completion(out, data), run_to_completion(tree, data)
    )
    # the pushed selection sits below the join on the A side
    join_node = next(n for n in out.nodes if isinstance(n.op, Join))
    left = out.node(join_node.children[0])
    assert isinstance(left.op, Select)


def test_select_below_join_skips_self_join(classic_params):
    tree = build_classic_tree("Purchase", classic_params)
    assert rule_named("select-below-join").transform(tree) is None


def test_fuse_powerset_prune_marks_span(classic_params):
    tree = build_classic_tree("Purchase", classic_params)
    out = rule_named("fuse-powerset-prune").transform(tree)
    assert out is not None
    fi = next(s for s in out.spans if s.kind == "frequent-itemsets")
    assert fi.fused
    assert sorted(fi.nodes) == [2, 3, 4, 5, 6, 7]
    # idempotent: second application is a no-op
    assert rule_named("fuse-powerset-prune").transform(out) is None


def test_push_cardinality_constraint_inserts_width_filter(newpurchase, relaxed_params):
    spec = CAQSpec(SideConstraints(2, 2), SideConstraints(2, 2))
    with_filter = build_caq_tree("S", spec, relaxed_params)
    # simulate the unpruned tree: drop the width projection+selection
    drop = {with_filter.node_by_step("2").id, with_filter.node_by_step("3").id}
    nest_id = next(n.id for n in with_filter.nodes if type(n.op).__name__ == "Nest")
    nodes = []
    for n in with_filter.nodes:
        if n.id in drop:
            continue
        if any(c in drop for c in n.children):
            nodes.append(
                PlanNode(n.id, n.op, tuple(nest_id if c in drop else c for c in n.children), n.step)
            )
        else:
            nodes.append(n)
    spans = tuple(
        type(s)(s.kind, frozenset(s.nodes - drop), s.params, s.label)
        for s in with_filter.spans
    )
    unpruned = QueryTree(tuple(nodes), with_filter.root, with_filter.params,
                         spans, kind="caq", n_binding=with_filter.n_binding,
                         caq=with_filter.caq)
    out = rule_named("push-cardinality-constraint").transform(unpruned)
    assert out is not None
    added = [n for n in out.nodes if n.id not in {x.id for x in unpruned.nodes}]
    assert any(isinstance(n.op, Select) for n in added)
    data = {"S": newpurchase}
    assert relation_equal(
        run_to_completion(out, data), run_to_completion(with_filter, data)
    )
    # already-filtered tree: no match
    assert rule_named("push-cardinality-constraint").transform(with_filter) is None


def test_push_item_constraints_annotates_span(relaxed_params):
    spec = CAQSpec(
        SideConstraints(2, 2, must_not_contain=frozenset("Z")),
        SideConstraints(2, 2, must_not_contain=frozenset("Z")),
    )
    tree = build_caq_tree("S", spec, relaxed_params)
    out = rule_named("push-item-constraints").transform(tree)
    assert out is not None
    fi = next(s for s in out.spans if s.kind == "frequent-itemsets")
    assert isinstance(fi.constraints, ItemsetConstraints)
    assert fi.constraints.must_not_contain == frozenset("Z")


def test_group_by_pull_up_is_disabled_stub(classic_params):
    rule = rule_named("group-by-pull-up")
    assert not rule.enabled
    assert rule.transform(build_classic_tree("P", classic_params)) is None


def test_apply_rewrites_empty_rule_list_is_identity(classic_params):
    tree = build_classic_tree("Purchase", classic_params)
    result = apply_rewrites(tree, rules=())
    assert result.tree is tree
    assert result.trace == ()


def test_apply_rewrites_records_trace(classic_params):
    tree = build_classic_tree("Purchase", classic_params)
    result = apply_rewrites(tree)
    assert any(e.rule == "fuse-powerset-prune" for e in result.trace)


def test_rewrite_soundness_on_templates(corpus40, relaxed_params):
    """Each shipped rule preserves the output of every template tree."""
    from mineral.corpus import params_for

    for ds in corpus40[:20]:
        params = params_for(ds)
        data = {"R": ds.relation}
        trees = [
            build_classic_tree("R", params),
            build_mine_rule_tree("R", params, max_trans_items=4, head_card=(1, 1)),
            build_caq_tree("R", CAQSpec(SideConstraints(2, 2), SideConstraints(1, 1)), params),
        ]
        for tree in trees:
            want = run_to_completion(tree, data, validate=False)
            for rule in standard_rules():
                if not rule.enabled:
                    continue
                out = rule.transform(tree)
                if out is None:
                    continue
                got = run_to_completion(out, data, validate=False)
                assert relation_equal(got, want), (ds.seed, rule.name)


# -- plan enumeration ----------------------------------------------------------

def test_enumerate_classic_has_all_fi_choices(classic_params):
    plans = enumerate_plans(build_classic_tree("P", classic_params))
    fi = {p.choice_for_span("frequent-itemsets") for p in plans}
    assert fi == {"NaivePowerset", "Apriori", "ConstrainedApriori"}
    assert len(plans) >= 3


def test_enumerate_single_select_is_one_plan():
    tree = QueryTree(
        nodes=(
            PlanNode(0, Source("R")),
            PlanNode(1, Select(Compare(attr("tid"), ">", Const(1))), (0,)),
        ),
        root=1, params=MiningParams(F(1, 2), F(1, 2)),
    )
    plans = enumerate_plans(tree)
    assert len(plans) == 1
    assert all(c.algorithm == "scan-filter" for c in plans[0].choices)


def test_enumerate_respects_cap(classic_params):
    plans = enumerate_plans(build_classic_tree("P", classic_params), max_plans=1)
    assert len(plans) == 1


def test_enumerate_missing_catalog_entry(classic_params):
    tree = build_classic_tree("P", classic_params)
    with pytest.raises(NoAlgorithmApplicable):
        enumerate_plans(tree, catalog={"nodes": {}})


def test_plan_coverage_total_and_disjoint(classic_params):
    tree = build_classic_tree("P", classic_params)
    for plan in enumerate_plans(tree):
        covered = []
        for c in plan.choices:
            covered.extend(c.span.nodes if c.span is not None else [c.node])
        assert sorted(covered) == sorted(n.id for n in tree.nodes)


# -- cost model ------------------------------------------------------------------

def test_fi_span_cost_desk_scale(classic_params):
    tree = build_classic_tree("P", classic_params)
    from mineral.optimizer import _fi_cost

    assert _fi_cost("NaivePowerset", DESK, tree.params, ItemsetConstraints()) == 28


def test_naive_cost_w1_is_n(classic_params):
    tree = build_classic_tree("P", classic_params)
    from mineral.optimizer import _fi_cost

    assert _fi_cost("NaivePowerset", Stats(7, 3, 1), tree.params, ItemsetConstraints()) == 7


def test_wide_stats_prefer_apriori(classic_params):
    tree = build_classic_tree("P", classic_params)
    from mineral.optimizer import _fi_cost

    naive = _fi_cost("NaivePowerset", WIDE, tree.params, ItemsetConstraints())
    apriori = _fi_cost("Apriori", WIDE, tree.params, ItemsetConstraints())
    assert naive > apriori


def test_choose_plan_picks_apriori_family_when_wide(classic_params):
    plans = enumerate_plans(build_classic_tree("P", classic_params))
    best = choose_plan(plans, WIDE)
    assert best.choice_for_span("frequent-itemsets") in ("Apriori", "ConstrainedApriori")


def test_choose_plan_single(classic_params):
    plans = enumerate_plans(build_classic_tree("P", classic_params), max_plans=1)
    assert choose_plan(plans, DESK).key() == plans[0].key()


def test_choose_plan_empty():
    with pytest.raises(EmptyPlanSet):
        choose_plan([], DESK)


def test_choose_plan_scaling_invariance(classic_params):
    plans = enumerate_plans(build_classic_tree("P", classic_params))
    costed = with_costs(plans, WIDE)
    best = choose_plan(plans, WIDE)
    scaled = sorted(costed, key=lambda p: (p.cost * 17, p.key()))
    assert scaled[0].key() == best.key()


def test_costs_deterministic(classic_params):
    tree = build_classic_tree("P", classic_params)
    plans = enumerate_plans(tree)
    c1 = [estimate_cost(p, DESK) for p in plans]
    c2 = [estimate_cost(p, DESK) for p in plans]
    assert c1 == c2
    assert all(c >= 0 for c in c1)


def test_stats_from_relation(purchase):
    s = stats_from_relation(purchase)
    assert (s.n, s.m, s.w) == (4, 5, 3)


# -- plan equivalence (full output comparison) -----------------------------------

def test_plan_equivalence_on_slice(corpus40):
    from mineral.corpus import params_for

    for ds in corpus40[:15]:
        params = params_for(ds)
        data = {"R": ds.relation}
        for tree in (
            build_classic_tree("R", params),
            build_caq_tree("R", CAQSpec(SideConstraints(2, 2), SideConstraints(1, 1)), params),
        ):
            want = run_to_completion(tree, data, validate=False)
            for plan in enumerate_plans(tree):
                got = run_to_completion(plan, data, validate=False)
                assert relation_equal(got, want), (ds.seed, plan.key())


def test_soundness_harness_catches_a_broken_rule(purchase, classic_params):
    """Meta-check: an unsound transformer (drops the confidence filter) must
    fail the before/after comparison the soundness tests rely on."""
    from dataclasses import replace as dc_replace

    from mineral.expr import param_refs

    def drop_conf_filter(tree):
        victim = next(
            (n for n in tree.nodes
             if isinstance(n.op, Select)
             and "minconf" in param_refs(n.op.predicate)),
            None,
        )
        if victim is None:
            return None
        child = victim.children[0]
        nodes = []
        for n in tree.nodes:
            if n.id == victim.id:
                continue
            if victim.id in n.children:
                nodes.append(dc_replace(
                    n, children=tuple(child if c == victim.id else c for c in n.children)
                ))
            else:
                nodes.append(n)
        spans = tuple(
            dc_replace(s, nodes=frozenset(i for i in s.nodes if i != victim.id))
            for s in tree.spans
        )
        return dc_replace(tree, nodes=tuple(nodes), spans=spans)

    tree = build_classic_tree("Purchase", classic_params.with_(minconf=F(3, 5)))
    broken = drop_conf_filter(tree)
    assert broken is not None
    want = run_to_completion(tree, {"Purchase": purchase})
    got = run_to_completion(broken, {"Purchase": purchase})
    assert not relation_equal(got, want)  # the harness distinguishes them
