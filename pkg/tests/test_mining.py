from fractions import Fraction

import pytest

from mineral.mining import (
    ItemsetConstraints,
    MiningError,
    MissingSubsetSupport,
    ResourceLimit,
    Rule,
    TransactionSet,
    apriori_frequent_itemsets,
    bruteforce_oracle,
    naive_frequent_itemsets,
    oracle_rules,
    rules_from_branches,
    rules_from_itemsets,
    transactions_from_relation,
)
from mineral.corpus import corpus, params_for
from mineral.params import MiningParams

F = Fraction

PURCHASE_TS = TransactionSet(4, (
    (1, frozenset("JH")),
    (2, frozenset("CBJ")),
    (3, frozenset("SJ")),
    (4, frozenset("CBJ")),
))

# NewPurchase after the width-2 filter; n stays 4
NEWPURCHASE_FILTERED = TransactionSet(4, (
    (1, frozenset("SH")),
    (2, frozenset("BCHJ")),
    (4, frozenset("BCJ")),
))

CLASSIC = MiningParams(F(3, 10), F(6, 10))
RELAXED = MiningParams(F(1, 10), F(2, 10))

CLASSIC_FREQUENT = {
    frozenset("B"): F(1, 2), frozenset("C"): F(1, 2), frozenset("J"): F(1),
    frozenset("BC"): F(1, 2), frozenset("BJ"): F(1, 2), frozenset("CJ"): F(1, 2),
    frozenset("BCJ"): F(1, 2),
}


def itemset_names(freq):
    return {"".join(sorted(s)) for s in freq}


# -- oracle (the ground truth; written first, definition-level) -------------

def test_oracle_reproduces_classic_frequent_set():
    assert bruteforce_oracle(PURCHASE_TS, CLASSIC) == CLASSIC_FREQUENT


def test_oracle_downward_closed():
    freq = bruteforce_oracle(PURCHASE_TS, RELAXED)
    for s in freq:
        for item in s:
            if len(s) > 1:
                assert (s - {item}) in freq


def test_oracle_single_transaction():
    ts = TransactionSet(1, ((1, frozenset("AB")),))
    freq = bruteforce_oracle(ts, MiningParams(F(1, 2), F(1, 2)))
    assert itemset_names(freq) == {"A", "B", "AB"}
    assert all(v == F(1) for v in freq.values())


def test_oracle_item_cap():
    wide = TransactionSet(1, ((1, frozenset(f"i{k}" for k in range(21))),))
    with pytest.raises(ResourceLimit):
        bruteforce_oracle(wide, CLASSIC)


def test_oracle_strict_minsup_one_is_empty():
    assert bruteforce_oracle(PURCHASE_TS, MiningParams(F(1), F(1, 2))) == {}


def test_oracle_inclusive_mode_keeps_boundary():
    inclusive = MiningParams(F(1), F(1, 2), threshold_mode="inclusive")
    freq = bruteforce_oracle(PURCHASE_TS, inclusive)
    assert itemset_names(freq) == {"J"}


def test_oracle_newpurchase_filtered_17_itemsets():
    freq = bruteforce_oracle(NEWPURCHASE_FILTERED, RELAXED)
    assert len(freq) == 17
    assert freq[frozenset("BCHJ")] == F(1, 4)
    assert freq[frozenset("J")] == F(1, 2)  # tid 3 no longer counts, n still 4
    assert freq[frozenset("SH")] == F(1, 4)


# -- pipeline algorithms -----------------------------------------------------

def test_naive_matches_classic_frequent_set():
    assert naive_frequent_itemsets(PURCHASE_TS, CLASSIC) == CLASSIC_FREQUENT


def test_naive_strict_minsup_one_empty():
    assert naive_frequent_itemsets(PURCHASE_TS, MiningParams(F(1), F(1))) == {}


def test_naive_resource_limit():
    ts = TransactionSet(1, ((1, frozenset(f"i{k}" for k in range(24))),))
    with pytest.raises(ResourceLimit):
        naive_frequent_itemsets(ts, CLASSIC, row_cap=10**6)


def test_apriori_matches_naive_unconstrained():
    assert apriori_frequent_itemsets(PURCHASE_TS, CLASSIC) == CLASSIC_FREQUENT


def test_apriori_size_band_newpurchase():
    freq = apriori_frequent_itemsets(
        NEWPURCHASE_FILTERED, RELAXED, ItemsetConstraints(size_lo=2, size_hi=2)
    )
    assert itemset_names(freq) == {"HS", "CH", "BH", "HJ", "BC", "CJ", "BJ"}
    assert set(freq.values()) <= {F(1, 4), F(1, 2)}


def test_apriori_size_band_four():
    freq = apriori_frequent_itemsets(
        NEWPURCHASE_FILTERED, RELAXED, ItemsetConstraints(size_lo=4, size_hi=4)
    )
    assert freq == {frozenset("BCHJ"): F(1, 4)}


def test_apriori_never_generates_above_cap():
    freq = apriori_frequent_itemsets(
        PURCHASE_TS, RELAXED, ItemsetConstraints(size_hi=1)
    )
    assert all(len(s) == 1 for s in freq)


def test_apriori_item_constraints():
    cons = ItemsetConstraints(must_contain=frozenset("J"), must_not_contain=frozenset("S"))
    freq = apriori_frequent_itemsets(PURCHASE_TS, RELAXED, cons)
    assert all("J" in s and "S" not in s for s in freq)
    oracle = {
        s: v for s, v in bruteforce_oracle(PURCHASE_TS, RELAXED).items()
        if "J" in s and "S" not in s
    }
    assert freq == oracle


def test_infeasible_constraints_rejected():
    with pytest.raises(MiningError):
        ItemsetConstraints(size_lo=3, size_hi=2)


# -- rule generation ----------------------------------------------------------

def test_rules_classic_output():
    rules = rules_from_itemsets(CLASSIC_FREQUENT, CLASSIC)
    assert len(rules) == 9
    as_pairs = {("".join(sorted(r.body)), "".join(sorted(r.head))) for r in rules}
    assert as_pairs == {
        ("B", "C"), ("B", "J"), ("B", "CJ"),
        ("C", "B"), ("C", "J"), ("C", "BJ"),
        ("BC", "J"), ("BJ", "C"), ("CJ", "B"),
    }
    assert all(r.sup == F(1, 2) and r.conf == F(1) for r in rules)


def test_rules_from_single_itemset_is_empty():
    assert rules_from_itemsets({frozenset("J"): F(1)}, CLASSIC) == set()


def test_rules_caq_branches():
    bodies = apriori_frequent_itemsets(
        NEWPURCHASE_FILTERED, RELAXED, ItemsetConstraints(2, 2)
    )
    supersets = apriori_frequent_itemsets(
        NEWPURCHASE_FILTERED, RELAXED, ItemsetConstraints(4, 4)
    )
    rules = rules_from_branches(bodies, supersets, RELAXED)
    confs = {
        ("".join(sorted(r.body)), "".join(sorted(r.head))): r.conf for r in rules
    }
    assert confs == {
        ("BC", "HJ"): F(1, 2), ("BH", "CJ"): F(1),
        ("BJ", "CH"): F(1, 2), ("CH", "BJ"): F(1),
        ("CJ", "BH"): F(1, 2), ("HJ", "BC"): F(1),
    }
    assert all(r.sup == F(1, 4) for r in rules)


def test_missing_subset_support_raises_then_recounts():
    only_super = {frozenset("BCHJ"): F(1, 4)}
    with pytest.raises(MissingSubsetSupport):
        rules_from_itemsets(
            only_super, RELAXED,
            body_constraints=ItemsetConstraints(2, 2),
            head_constraints=ItemsetConstraints(2, 2),
        )
    rules = rules_from_itemsets(
        only_super, RELAXED,
        body_constraints=ItemsetConstraints(2, 2),
        head_constraints=ItemsetConstraints(2, 2),
        recount=NEWPURCHASE_FILTERED,
    )
    assert len(rules) == 6


def test_rule_invariants_enforced():
    with pytest.raises(MiningError):
        Rule(frozenset("A"), frozenset("A"), F(1, 2), F(1))
    with pytest.raises(MiningError):
        Rule(frozenset(), frozenset("A"), F(1, 2), F(1))


def test_transactions_from_relation_flat_and_nested(purchase):
    from mineral import ops

    ts = transactions_from_relation(purchase)
    assert ts.n == 4
    assert dict(ts.transactions)[2] == frozenset("CBJ")
    nested = ops.nest(purchase, ["tid"])
    ts2 = transactions_from_relation(nested, n=4)
    assert ts2.transactions == ts.transactions


def test_minerule_variant_rules():
    # the 11 frequent itemsets at minsup 1/10, singleton heads, conf > 1/5
    freq = bruteforce_oracle(PURCHASE_TS, RELAXED)
    assert len(freq) == 11
    rules = rules_from_itemsets(
        freq, RELAXED, head_constraints=ItemsetConstraints(size_lo=1, size_hi=1)
    )
    as_pairs = {("".join(sorted(r.body)), "".join(sorted(r.head))) for r in rules}
    assert as_pairs == {
        ("B", "C"), ("B", "J"), ("C", "B"), ("C", "J"), ("H", "J"),
        ("J", "B"), ("J", "C"), ("J", "H"), ("J", "S"), ("S", "J"),
        ("BC", "J"), ("BJ", "C"), ("CJ", "B"),
    }
    assert len(rules) == 13


# -- corpus equivalences -------------------------------------------------------

def test_oracle_equivalence_on_corpus(corpus200):
    for ds in corpus200:
        params = params_for(ds)
        ts = transactions_from_relation(ds.relation)
        oracle = bruteforce_oracle(ts, params)
        assert naive_frequent_itemsets(ts, params) == oracle, ds.seed
        assert apriori_frequent_itemsets(ts, params) == oracle, ds.seed


def test_downward_closure_on_corpus(corpus40):
    for ds in corpus40:
        params = params_for(ds)
        ts = transactions_from_relation(ds.relation)
        freq = apriori_frequent_itemsets(ts, params)
        for s in freq:
            if len(s) > 1:
                assert all((s - {i}) in freq for i in s), ds.seed


def test_constrained_equals_filtered_oracle_on_corpus(corpus40):
    for ds in corpus40:
        params = params_for(ds)
        ts = transactions_from_relation(ds.relation)
        cons = ItemsetConstraints(size_lo=1 + ds.seed % 2, size_hi=2 + ds.seed % 3)
        got = apriori_frequent_itemsets(ts, params, cons)
        want = {s: v for s, v in bruteforce_oracle(ts, params).items() if cons.admits(s)}
        assert got == want, ds.seed


def test_rule_arithmetic_on_corpus(corpus40):
    for ds in corpus40:
        params = params_for(ds)
        ts = transactions_from_relation(ds.relation)
        freq = bruteforce_oracle(ts, params)
        for rule in rules_from_itemsets(freq, params):
            assert rule.sup <= freq[rule.body]
            if rule.head in freq:
                assert rule.sup <= freq[rule.head]
            assert 0 < rule.conf <= 1
            assert rule.conf == rule.sup / freq[rule.body]


def test_oracle_rules_match_pipeline_rules_on_corpus(corpus40):
    for ds in corpus40:
        params = params_for(ds)
        ts = transactions_from_relation(ds.relation)
        assert oracle_rules(ts, params) == rules_from_itemsets(
            bruteforce_oracle(ts, params), params
        ), ds.seed
