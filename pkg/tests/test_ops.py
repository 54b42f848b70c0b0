from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mineral import ops
from mineral.expr import (
    TRUE,
    FALSE,
    AggregateSpec,
    And,
    Arith,
    Compare,
    Const,
    ParamRef,
    Powerset,
    attr,
)
from mineral.model import (
    INT,
    RATIONAL,
    STRING,
    Schema,
    SchemaMismatch,
    make_relation,
    relation_equal,
    set_of,
)
from tests.conftest import TID_ITEM

PARAMS = {"n": 4, "minsup": Fraction(3, 10), "minconf": Fraction(6, 10)}


def classic_pipeline(purchase):
    """Steps 1-5 of the classic pipeline, via the reference operators."""
    r1 = ops.project(purchase, [("tid", attr("tid")), ("item", attr("item"))])
    r2 = ops.nest(r1, ["tid"])
    r3 = ops.project(r2, [("tid", attr("tid")), ("itemset", Powerset(attr("item")))])
    r4 = ops.unnest(r3, "itemset")
    r5 = ops.grouping(r4, ["itemset"], [AggregateSpec("count", "tid")])
    return r1, r2, r3, r4, r5


def test_classic_pipeline_step_counts(purchase):
    r1, r2, r3, r4, r5 = classic_pipeline(purchase)
    assert (len(r1), len(r2), len(r3), len(r4), len(r5)) == (10, 4, 4, 20, 11)


def test_nest_groups_by_tid(purchase):
    _, r2, *_ = classic_pipeline(purchase)
    rows = {t[0]: t[1] for t in r2.tuples}
    assert rows[1] == frozenset("JH")
    assert rows[2] == frozenset("CBJ")
    assert rows[3] == frozenset("SJ")
    assert rows[4] == frozenset("CBJ")


def test_nest_newpurchase(newpurchase):
    nested = ops.nest(newpurchase, ["tid"])
    rows = {t[0]: t[1] for t in nested.tuples}
    assert rows == {
        1: frozenset("HS"),
        2: frozenset("BCHJ"),
        3: frozenset("J"),
        4: frozenset("BCJ"),
    }


def test_nest_all_distinct_keys_gives_singletons():
    r = make_relation(TID_ITEM, [(1, "a"), (2, "b")])
    nested = ops.nest(r, ["tid"])
    assert all(len(t[1]) == 1 for t in nested.tuples)


def test_nest_requires_non_key_attribute(purchase):
    with pytest.raises(SchemaMismatch):
        ops.nest(purchase, ["tid", "item"])


def test_grouping_counts(purchase):
    *_, r5 = classic_pipeline(purchase)
    counts = {"".join(sorted(t[0])): t[1] for t in r5.tuples}
    assert counts == {
        "B": 2, "C": 2, "H": 1, "J": 4, "S": 1,
        "BC": 2, "BJ": 2, "CJ": 2, "HJ": 1, "JS": 1, "BCJ": 2,
    }


def test_grouping_by_all_attributes_counts_one(purchase):
    g = ops.grouping(purchase, ["tid", "item"], [AggregateSpec("count", "item", "c")])
    assert all(t[-1] == 1 for t in g.tuples)


def test_grouping_aggregates_exact():
    schema = Schema([("k", STRING), ("v", INT)])
    r = make_relation(schema, [("a", 1), ("a", 2), ("b", 5)])
    g = ops.grouping(r, ["k"], [
        AggregateSpec("sum", "v"), AggregateSpec("min", "v"),
        AggregateSpec("max", "v"), AggregateSpec("average", "v"),
    ])
    rows = {t[0]: t[1:] for t in g.tuples}
    assert rows["a"] == (3, 1, 2, Fraction(3, 2))
    assert rows["b"] == (5, 5, 5, Fraction(5, 1))


def test_select_support_threshold(purchase):
    *_, r5 = classic_pipeline(purchase)
    p = Compare(attr("count_tid"), ">", Arith("*", ParamRef("n"), ParamRef("minsup")))
    r6 = ops.select(r5, p, PARAMS)
    names = {"".join(sorted(t[0])) for t in r6.tuples}
    assert names == {"B", "C", "J", "BC", "BJ", "CJ", "BCJ"}


def test_select_true_is_identity(purchase):
    assert relation_equal(ops.select(purchase, TRUE), purchase)


def test_select_width_filter_drops_narrow_transaction(newpurchase):
    from mineral.expr import Cardinality

    nested = ops.nest(newpurchase, ["tid"])
    with_count = ops.project(nested, [
        ("tid", attr("tid")), ("item", attr("item")),
        ("count_item", Cardinality(attr("item"))),
    ])
    filtered = ops.select(with_count, Compare(attr("count_item"), ">=", Const(2)))
    assert {t[0] for t in filtered.tuples} == {1, 2, 4}


def test_project_step7_supports(purchase):
    *_, r5 = classic_pipeline(purchase)
    p = Compare(attr("count_tid"), ">", Arith("*", ParamRef("n"), ParamRef("minsup")))
    r6 = ops.select(r5, p, PARAMS)
    r7 = ops.project(r6, [
        ("freq_itemset", attr("itemset")),
        ("sup", Arith("/", attr("count_tid"), ParamRef("n"))),
    ], PARAMS)
    sups = {"".join(sorted(t[0])): t[1] for t in r7.tuples}
    assert sups["J"] == Fraction(1)
    assert all(v == Fraction(1, 2) for k, v in sups.items() if k != "J")


def test_project_to_constant_collapses():
    r = make_relation(TID_ITEM, [(1, "a"), (2, "b"), (3, "c")])
    out = ops.project(r, [("k", Const(1, INT))])
    assert len(out) == 1


def test_project_duplicate_output_names_rejected(purchase):
    with pytest.raises(SchemaMismatch):
        ops.project(purchase, [("x", attr("tid")), ("x", attr("item"))])


def test_unnest_of_empty_set_produces_no_tuples():
    schema = Schema([("tid", INT), ("s", set_of(STRING))])
    r = make_relation(schema, [(1, []), (2, ["a"])])
    out = ops.unnest(r, "s")
    assert len(out) == 1


def test_join_subset_pairs(purchase):
    *_, r5 = classic_pipeline(purchase)
    p6 = Compare(attr("count_tid"), ">", Arith("*", ParamRef("n"), ParamRef("minsup")))
    r7 = ops.project(
        ops.select(r5, p6, PARAMS),
        [("freq_itemset", attr("itemset")), ("sup", Arith("/", attr("count_tid"), ParamRef("n")))],
        PARAMS,
    )
    joined = ops.join(
        r7, r7, Compare(attr("A.freq_itemset"), "subset", attr("B.freq_itemset"))
    )
    assert len(joined) == 12
    assert joined.schema.names == ("A.freq_itemset", "A.sup", "B.freq_itemset", "B.sup")


def test_join_false_is_empty(purchase):
    out = ops.join(purchase, purchase, FALSE)
    assert len(out) == 0


def test_join_size2_vs_size4_branches():
    # branch A: the seven 2-itemsets of the constrained example, branch B: {BCHJ}
    sets = Schema([("freq_itemset", set_of(STRING)), ("sup", RATIONAL)])
    a = make_relation(sets, [
        (frozenset(s), Fraction(1, 2)) for s in ("SH", "HC", "HB", "HJ", "BC", "CJ", "BJ")
    ])
    b = make_relation(sets, [(frozenset("BCHJ"), Fraction(1, 4))])
    joined = ops.join(a, b, Compare(attr("A.freq_itemset"), "subset", attr("B.freq_itemset")))
    assert len(joined) == 6  # {S,H} is no subset of {B,C,H,J}


def test_set_operators(purchase):
    assert relation_equal(ops.union(purchase, purchase), purchase)
    assert len(ops.difference(purchase, purchase)) == 0
    assert relation_equal(ops.intersection(purchase, purchase), purchase)
    a = make_relation(Schema([("x", INT)]), [(1,), (2,)])
    b = make_relation(Schema([("y", INT)]), [(1,), (2,), (3,)])
    assert len(ops.product(a, b)) == 6
    with pytest.raises(SchemaMismatch):
        ops.union(a, b)
    with pytest.raises(SchemaMismatch):
        ops.product(a, a)


def test_powerset_macro_matches_composition(purchase):
    r2 = ops.nest(purchase, ["tid"])
    macro = ops.powerset_macro(r2, "item", "itemset")
    manual = ops.unnest(
        ops.project(r2, [("tid", attr("tid")), ("itemset", Powerset(attr("item")))]),
        "itemset",
    )
    assert relation_equal(macro, manual)
    assert len(macro) == 20


def test_operators_do_not_mutate_inputs(purchase):
    before = set(purchase.tuples)
    ops.select(purchase, TRUE)
    ops.nest(purchase, ["tid"])
    ops.project(purchase, [("tid", attr("tid"))])
    assert set(purchase.tuples) == before


# -- properties -------------------------------------------------------------

_kv_rows = st.lists(
    st.tuples(st.integers(1, 6), st.sampled_from("abcdef")), max_size=50
)


@given(_kv_rows)
@settings(max_examples=80, deadline=None)
def test_nest_unnest_roundtrip(rows):
    r = make_relation(TID_ITEM, rows)
    if not rows:
        return
    back = ops.unnest(ops.nest(r, ["tid"]), "item")
    assert relation_equal(back, r)


@given(_kv_rows)
@settings(max_examples=80, deadline=None)
def test_group_counts_sum_to_input_size(rows):
    r = make_relation(TID_ITEM, rows)
    if not len(r):
        return
    g = ops.grouping(r, ["item"], [AggregateSpec("count", "tid")])
    assert sum(t[1] for t in g.tuples) == len(r)


@given(_kv_rows, _kv_rows)
@settings(max_examples=50, deadline=None)
def test_join_equals_select_product(rows_a, rows_b):
    a = make_relation(TID_ITEM, rows_a)
    b = make_relation(TID_ITEM, rows_b)
    p = Compare(attr("A.tid"), "=", attr("B.tid"))
    joined = ops.join(a, b, p)
    via_product = ops.select(ops.product(a, b, roles=("A", "B")), p)
    assert relation_equal(joined, via_product)
    assert joined.tuples <= ops.product(a, b, roles=("A", "B")).tuples


@given(_kv_rows)
@settings(max_examples=50, deadline=None)
def test_select_fusion_law(rows):
    r = make_relation(TID_ITEM, rows)
    p1 = Compare(attr("tid"), ">", Const(2, INT))
    p2 = Compare(attr("item"), "=", Const("a", STRING))
    twice = ops.select(ops.select(r, p1), p2)
    fused = ops.select(r, And((p1, p2)))
    assert relation_equal(twice, fused)


def test_pipeline_counts_match_direct_subset_counts(corpus40):
    """Step-5 grouping counts equal |{tid : s subset items(tid)}| computed
    directly from the transactions (the oracle's counting rule)."""
    from mineral.corpus import params_for
    from mineral.mining import transactions_from_relation

    for ds in corpus40[:15]:
        r = ds.relation
        ts = transactions_from_relation(r)
        r2 = ops.nest(r, ["tid"])
        r4 = ops.powerset_macro(r2, "item", "itemset")
        r5 = ops.grouping(r4, ["itemset"], [AggregateSpec("count", "tid")])
        for tup in r5.tuples:
            itemset, count = tup
            direct = sum(1 for _, items in ts.transactions if itemset <= items)
            assert count == direct, ds.seed
