from fractions import Fraction

import pytest

from mineral.engine import (
    Cancelled,
    EngineError,
    InvalidBreakpoint,
    NodeState,
    NotMaterialized,
    Session,
    SessionBusy,
    UnboundSource,
    run_to_completion,
    trace_all,
)
from mineral.mining import ResourceLimit
from mineral.model import make_relation, relation_equal
from mineral.optimizer import AlgoChoice, enumerate_plans, reference_plan
from mineral.params import InvalidValue
from mineral.tree import (
    CAQSpec,
    SideConstraints,
    build_caq_tree,
    build_classic_tree,
    build_mine_rule_tree,
)
from tests.conftest import TID_ITEM

F = Fraction

CLASSIC_STEP_COUNTS = {1: 10, 2: 4, 3: 4, 4: 20, 5: 11, 6: 7, 7: 7, 8: 7,
               9: 12, 10: 12, 11: 12, 12: 9, 13: 9}


@pytest.fixture
def classic(classic_params):
    return build_classic_tree("Purchase", classic_params)


def test_open_session_all_pending(classic, purchase):
    s = Session(classic, {"Purchase": purchase})
    assert len(s.states) == 14
    assert all(st is NodeState.PENDING for st in s.states.values())
    assert s.params.n == 4


def test_open_session_unbound_source(classic):
    with pytest.raises(UnboundSource):
        Session(classic, {})


def test_n_bound_pre_filter(newpurchase, relaxed_params):
    tree = build_caq_tree(
        "NewPurchase", CAQSpec(SideConstraints(2, 2), SideConstraints(2, 2)), relaxed_params
    )
    s = Session(tree, {"NewPurchase": newpurchase})
    assert s.params.n == 4  # tid 3 is filtered later, n keeps the load-time count


def test_run_until_node_7(classic, purchase):
    s = Session(classic, {"Purchase": purchase})
    report = s.run_until(7)
    rows = dict(report.materialized)
    assert rows[5] == 11 and rows[6] == 7 and rows[7] == 7
    assert s.states[8] is NodeState.PENDING
    assert not report.done


def test_run_until_completion_rule_set(classic, purchase):
    s = Session(classic, {"Purchase": purchase})
    report = s.run_until("end")
    assert report.done
    out = s.inspect(13).relation
    assert len(out) == 9
    assert all(t[2] == F(1, 2) and t[3] == F(1) for t in out.tuples)


def test_run_until_already_materialized_is_noop(classic, purchase):
    s = Session(classic, {"Purchase": purchase})
    s.run_until(5)
    report = s.run_until(5)
    assert report.materialized == ()


def test_inspect_pending_raises(classic, purchase):
    s = Session(classic, {"Purchase": purchase})
    with pytest.raises(NotMaterialized):
        s.inspect(5)


def test_trace_matches_classic_step_counts(classic, purchase):
    snaps = trace_all(classic, {"Purchase": purchase})
    assert len(snaps) == 13  # one table per step; the input is not repeated
    counts = {snap.node: snap.rows for snap in snaps}
    for node, want in CLASSIC_STEP_COUNTS.items():
        assert counts[node] == want, node


def test_trace_caq_intermediates(newpurchase, relaxed_params):
    tree = build_caq_tree(
        "NewPurchase", CAQSpec(SideConstraints(2, 2), SideConstraints(2, 2)), relaxed_params
    )
    snaps = {s.node: s for s in trace_all(tree, {"NewPurchase": newpurchase})}
    by_step = {tree.node(n).step: s for n, s in snaps.items() if tree.node(n).step}
    count_snap = by_step["2"].relation
    ci = count_snap.schema.index("count_item")
    ti = count_snap.schema.index("tid")
    assert sorted((t[ti], t[ci]) for t in count_snap.tuples) == [(1, 2), (2, 4), (3, 1), (4, 3)]
    assert {t[ti] for t in by_step["3"].relation.tuples} == {1, 2, 4}
    assert by_step["5"].rows == 17
    assert by_step["6A"].rows == 7
    assert by_step["6B"].rows == 1


def test_trace_empty_dataset(classic):
    empty = make_relation(TID_ITEM, [])
    snaps = trace_all(classic, {"Purchase": empty})
    assert all(s.rows == 0 for s in snaps if s.node != 0)


def test_snapshot_render_stable(classic, purchase):
    s = Session(classic, {"Purchase": purchase})
    s.run_until(5)
    first = s.inspect(5).render()
    assert s.inspect(5).render() == first


# -- breakpoints ---------------------------------------------------------------

def test_pause_at_every_edge_then_resume(classic, purchase):
    tree = classic.with_breakpoints(classic.edges())
    s = Session(tree, {"Purchase": purchase})
    report = s.run_until("end")
    resumes = 0
    while not report.done:
        report = s.resume()
        resumes += 1
    assert resumes == 13
    baseline = run_to_completion(classic, {"Purchase": purchase})
    assert relation_equal(s.inspect(13).relation, baseline)


def test_pause_transparency_subsets_of_edges(classic, purchase):
    baseline = run_to_completion(classic, {"Purchase": purchase})
    for edges in ([(1, 2)], [(5, 6), (11, 12)], [(12, 13)]):
        s = Session(classic.with_breakpoints(edges), {"Purchase": purchase})
        report = s.run_until("end")
        while not report.done:
            report = s.resume()
        assert relation_equal(s.inspect(13).relation, baseline)


def test_breakpoint_pause_state(classic, purchase):
    s = Session(classic.with_breakpoints([(5, 6)]), {"Purchase": purchase})
    report = s.run_until("end")
    assert report.paused_at == (5, 6)
    assert s.states[5] is NodeState.MATERIALIZED
    assert s.states[6] is NodeState.PENDING
    assert s.status == "paused"


def test_breakpoint_inside_fused_span_rejected(classic, purchase):
    plans = enumerate_plans(classic)
    apriori_plan = next(
        p for p in plans
        if p.choice_for_span("frequent-itemsets") == "Apriori"
        and p.choice_for_span("rule-generation") == "StepwiseRuleGen"
    )
    tree_bp = apriori_plan.tree.with_breakpoints([(3, 4)])
    from dataclasses import replace

    bad_plan = replace(apriori_plan, tree=tree_bp)
    with pytest.raises(InvalidBreakpoint):
        Session(bad_plan, {"Purchase": purchase})
    # spanning edge into the module is fine: (1, 2) ends outside the atomic span
    ok_plan = replace(apriori_plan, tree=apriori_plan.tree.with_breakpoints([(1, 2)]))
    Session(ok_plan, {"Purchase": purchase})


def test_step_materializes_one_node(classic, purchase):
    s = Session(classic, {"Purchase": purchase})
    r1 = s.step()
    assert [n for n, _ in r1.materialized] == [0]
    r2 = s.step()
    assert [n for n, _ in r2.materialized] == [1]


# -- parameter edits -------------------------------------------------------------

def test_minsup_edit_before_step6(classic, purchase):
    s = Session(classic.with_breakpoints([(5, 6)]), {"Purchase": purchase})
    s.run_until("end")
    report = s.set_param("minsup", F(1, 2))
    assert report.invalidated == ()  # step 6 has not run yet
    final = s.resume()
    assert final.done
    freq = s.inspect(7).relation
    assert [set(t[0]) for t in freq.sorted_tuples()] == [{"J"}]
    assert len(s.inspect(13).relation) == 0


def test_minconf_edit_after_completion_invalidates_two(classic, purchase):
    s = Session(classic, {"Purchase": purchase})
    s.run_until("end")
    report = s.set_param("minconf", F(9, 10))
    assert report.invalidated == (12, 13)
    resumed = s.resume()
    assert [n for n, _ in resumed.materialized] == [12, 13]
    assert len(s.inspect(13).relation) == 9  # all confs are 1 > 0.9


def test_edit_resume_equals_fresh_run(classic, purchase, classic_params):
    s = Session(classic.with_breakpoints([(5, 6)]), {"Purchase": purchase})
    s.run_until("end")
    s.set_param("minsup", F(2, 5))
    report = s.resume()
    assert report.done
    fresh = build_classic_tree("Purchase", classic_params.with_(minsup=F(2, 5)))
    assert relation_equal(
        s.inspect(13).relation, run_to_completion(fresh, {"Purchase": purchase})
    )


def test_set_param_validation(classic, purchase):
    s = Session(classic, {"Purchase": purchase})
    with pytest.raises(InvalidValue):
        s.set_param("minsup", 0)
    with pytest.raises(InvalidValue):
        s.set_param("minsup", F(3, 2))
    with pytest.raises(InvalidValue):
        s.set_param("threshold_mode", F(1, 2))


def test_edit_resume_soundness_on_corpus(corpus40):
    from mineral.corpus import params_for

    for ds in corpus40[:12]:
        params = params_for(ds)
        tree = build_classic_tree("R", params)
        s = Session(tree, {"R": ds.relation}, validate=False)
        s.run_until("end")
        new_minsup = F(1, 2) if params.minsup != F(1, 2) else F(1, 5)
        s.set_param("minsup", new_minsup)
        report = s.resume()
        assert report.done
        fresh = build_classic_tree("R", params.with_(minsup=new_minsup))
        assert relation_equal(
            s.inspect(tree.root).relation,
            run_to_completion(fresh, {"R": ds.relation}, validate=False),
        ), ds.seed


# -- cancel / errors ---------------------------------------------------------------

def test_cancel_freezes_session(classic, purchase):
    s = Session(classic, {"Purchase": purchase})
    s.run_until(5)
    s.cancel()
    with pytest.raises(Cancelled):
        s.resume()
    with pytest.raises(Cancelled):
        s.set_param("minsup", F(1, 2))
    # snapshots remain readable
    assert s.inspect(5).rows == 11


def test_resource_limit_propagates(classic_params):
    wide_rows = [(1, f"i{k}") for k in range(24)]
    wide = make_relation(TID_ITEM, wide_rows)
    tree = build_classic_tree("Purchase", classic_params)
    s = Session(tree, {"Purchase": wide}, row_cap=10**6)
    with pytest.raises(ResourceLimit):
        s.run_until("end")
    assert s.status == "paused"


def test_run_until_unknown_node(classic, purchase):
    s = Session(classic, {"Purchase": purchase})
    with pytest.raises(EngineError):
        s.run_until(99)


def test_atomic_plan_skips_interior_nodes(classic, purchase):
    plans = enumerate_plans(classic)
    direct = next(
        p for p in plans
        if p.choice_for_span("frequent-itemsets") == "Apriori"
        and p.choice_for_span("rule-generation") == "DirectRuleGen"
    )
    s = Session(direct, {"Purchase": purchase})
    report = s.run_until("end")
    assert report.done
    assert s.states[7] is NodeState.MATERIALIZED  # FI span top
    assert s.states[4] is NodeState.PENDING  # interior skipped
    assert s.states[13] is NodeState.MATERIALIZED
    assert s.states[10] is NodeState.PENDING
    baseline = run_to_completion(classic, {"Purchase": purchase})
    assert relation_equal(s.inspect(13).relation, baseline)


def test_event_log_records_lifecycle(classic, purchase):
    s = Session(classic, {"Purchase": purchase})
    s.run_until(3)
    s.cancel()
    events = [line.split("\t")[1] for line in s.events]
    assert events[0] == "open"
    assert "materialize" in events
    assert events[-1] == "cancel"


def test_minerule_session(purchase, relaxed_params):
    tree = build_mine_rule_tree("Purchase", relaxed_params, max_trans_items=6,
                                head_card=(1, 1))
    out = run_to_completion(tree, {"Purchase": purchase})
    assert len(out) == 13
