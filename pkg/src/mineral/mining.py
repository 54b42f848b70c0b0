"""Physical mining algorithms behind the frequent-itemset and rule-generation
module spans, plus the independent brute-force oracle.

The oracle enumerates the item universe directly from the support/confidence
definitions and shares no code with the pipelines it checks; it is the ground
truth for every derived expected value in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping

from .model import NestedRelation, SetType
from .params import MiningParams


class MiningError(Exception):
    pass


class ResourceLimit(MiningError):
    """A plan materialization would exceed the configured row cap."""


class MissingSubsetSupport(MiningError):
    """Rule generation needs sup(body) for a body the itemset input lacks."""

    def __init__(self, body: frozenset):
        super().__init__(f"no support recorded for body {sorted(body)}")
        self.body = body


POWERSET_ROW_CAP = 10**7

Itemset = frozenset
FrequentItemsets = dict  # Itemset -> Fraction support


@dataclass(frozen=True)
class TransactionSet:
    """Transactions plus the support denominator n.

    n is the transaction count bound at data-load time; after a width filter
    removes transactions, n keeps its pre-filter value so supports stay
    fractions of the original population.
    """

    n: int
    transactions: tuple[tuple[object, frozenset], ...]

    def __post_init__(self):
        tids = [tid for tid, _ in self.transactions]
        if len(set(tids)) != len(tids):
            raise MiningError("duplicate tid in transaction set")
        if self.n < 0:
            raise MiningError("n must be >= 0")

    @property
    def items(self) -> frozenset:
        out: set = set()
        for _, s in self.transactions:
            out |= s
        return frozenset(out)


def transactions_from_relation(
    r: NestedRelation, tid: str = "tid", item: str = "item", n: int | None = None
) -> TransactionSet:
    """Read transactions from a flat (tid, item) or nested (tid, {item}) relation."""
    ti = r.schema.index(tid)
    ii = r.schema.index(item)
    nested = isinstance(r.schema.type_of(item), SetType)
    groups: dict[object, set] = {}
    for t in r.tuples:
        bag = groups.setdefault(t[ti], set())
        if nested:
            bag |= t[ii]
        else:
            bag.add(t[ii])
    txns = tuple(sorted(groups.items(), key=lambda kv: repr(kv[0])))
    return TransactionSet(n if n is not None else len(txns), txns)


@dataclass(frozen=True)
class ItemsetConstraints:
    """Size band plus item-level constraints for constrained mining."""

    size_lo: int = 1
    size_hi: int | None = None
    must_contain: frozenset = frozenset()
    must_not_contain: frozenset = frozenset()
    universe: frozenset | None = None

    def __post_init__(self):
        if self.size_lo < 1:
            raise MiningError("size_lo must be >= 1")
        if self.size_hi is not None and self.size_hi < self.size_lo:
            raise MiningError(f"infeasible size range {self.size_lo}..{self.size_hi}")
        object.__setattr__(self, "must_contain", frozenset(self.must_contain))
        object.__setattr__(self, "must_not_contain", frozenset(self.must_not_contain))
        if self.universe is not None:
            object.__setattr__(self, "universe", frozenset(self.universe))

    def admits(self, s: frozenset) -> bool:
        if len(s) < self.size_lo:
            return False
        if self.size_hi is not None and len(s) > self.size_hi:
            return False
        if not self.must_contain <= s:
            return False
        if s & self.must_not_contain:
            return False
        if self.universe is not None and not s <= self.universe:
            return False
        return True


UNCONSTRAINED = ItemsetConstraints()


@dataclass(frozen=True)
class Rule:
    """body => head with support of body+head and confidence sup/sup(body)."""

    body: frozenset
    head: frozenset
    sup: Fraction
    conf: Fraction

    def __post_init__(self):
        if not self.body or not self.head:
            raise MiningError("rule body and head must be non-empty")
        if self.body & self.head:
            raise MiningError("rule body and head must be disjoint")


# ---------------------------------------------------------------------------
# Brute-force oracle (written first; definition-level, no shared pipeline code)


def bruteforce_oracle(ts: TransactionSet, params: MiningParams) -> FrequentItemsets:
    """Every non-empty subset of the item universe whose support passes the
    threshold.  Support of s = |{T : s subset-of T}| / n.  Universe capped at
    20 items to keep 2^|I| enumeration honest."""
    items = sorted(ts.items)
    if len(items) > 20:
        raise ResourceLimit(f"oracle handles at most 20 items, got {len(items)}")
    if ts.n == 0:
        return {}
    out: FrequentItemsets = {}
    for k in range(1, len(items) + 1):
        for combo in combinations(items, k):
            s = frozenset(combo)
            count = sum(1 for _, t in ts.transactions if s <= t)
            if params.passes_threshold(count, of=ts.n):
                out[s] = Fraction(count, ts.n)
    return out


def oracle_rules(
    ts: TransactionSet,
    params: MiningParams,
    body_constraints: ItemsetConstraints = UNCONSTRAINED,
    head_constraints: ItemsetConstraints = UNCONSTRAINED,
) -> set[Rule]:
    """Definition-level rule enumeration over the oracle's frequent itemsets."""
    freq = bruteforce_oracle(ts, params)
    out = set()
    for body, bsup in freq.items():
        for sp, ssup in freq.items():
            if not body < sp:
                continue
            head = sp - body
            if not (body_constraints.admits(body) and head_constraints.admits(head)):
                continue
            conf = ssup / bsup
            if params.passes_confidence(conf):
                out.add(Rule(body, head, ssup, conf))
    return out


# ---------------------------------------------------------------------------
# Pipeline algorithms


def naive_frequent_itemsets(
    ts: TransactionSet, params: MiningParams, row_cap: int = POWERSET_ROW_CAP
) -> FrequentItemsets:
    """Exact materialization of the powerset pipeline (Steps 2-7 semantics)."""
    expansion = sum((1 << len(t)) - 1 for _, t in ts.transactions)
    if expansion > row_cap:
        raise ResourceLimit(
            f"powerset expansion of {expansion} rows exceeds the cap of {row_cap}"
        )
    counts: dict[frozenset, int] = {}
    for _, t in ts.transactions:
        elems = sorted(t)
        for k in range(1, len(elems) + 1):
            for combo in combinations(elems, k):
                s = frozenset(combo)
                counts[s] = counts.get(s, 0) + 1
    return {
        s: Fraction(c, ts.n)
        for s, c in counts.items()
        if params.passes_threshold(c, of=ts.n)
    }


def apriori_frequent_itemsets(
    ts: TransactionSet,
    params: MiningParams,
    constraints: ItemsetConstraints = UNCONSTRAINED,
) -> FrequentItemsets:
    """Level-wise generation with downward-closure pruning.

    Size and universe constraints push into candidate generation (no
    candidate above size_hi is ever produced); must-contain filters apply to
    the output only, since subsets lacking the item are still needed for
    closure.
    """
    banned = constraints.must_not_contain
    txns = [t for _, t in ts.transactions]
    counts1: dict[frozenset, int] = {}
    for t in txns:
        for item in t:
            if item in banned:
                continue
            if constraints.universe is not None and item not in constraints.universe:
                continue
            s = frozenset((item,))
            counts1[s] = counts1.get(s, 0) + 1
    level = {
        s: c for s, c in counts1.items() if params.passes_threshold(c, of=ts.n)
    }
    freq_counts: dict[frozenset, int] = dict(level)
    k = 1
    while level and (constraints.size_hi is None or k < constraints.size_hi):
        k += 1
        prev = set(level)
        items = sorted({i for s in prev for i in s})
        candidates = set()
        for s in prev:
            for i in items:
                if i in s:
                    continue
                cand = s | {i}
                if len(cand) != k or cand in candidates:
                    continue
                # downward closure: every (k-1)-subset must be frequent
                if all(cand - {j} in prev for j in cand):
                    candidates.add(cand)
        level = {}
        for cand in candidates:
            c = sum(1 for t in txns if cand <= t)
            if params.passes_threshold(c, of=ts.n):
                level[cand] = c
        freq_counts.update(level)
    return {
        s: Fraction(c, ts.n)
        for s, c in freq_counts.items()
        if constraints.admits(s)
    }


def support_of(ts: TransactionSet, s: frozenset) -> Fraction:
    """Targeted second counting pass for one itemset."""
    count = sum(1 for _, t in ts.transactions if s <= t)
    return Fraction(count, ts.n)


def rules_from_itemsets(
    freq: Mapping[frozenset, Fraction],
    params: MiningParams,
    head_constraints: ItemsetConstraints = UNCONSTRAINED,
    body_constraints: ItemsetConstraints = UNCONSTRAINED,
    recount: TransactionSet | None = None,
) -> set[Rule]:
    """Emit body => superset-body for every admissible frequent pair.

    For every superset s in freq, candidate bodies are the proper non-empty
    subsets admitted by the body constraints whose complement is admitted by
    the head constraints.  A body absent from freq raises
    MissingSubsetSupport unless `recount` supplies a transaction set for a
    targeted second counting pass.
    """
    out: set[Rule] = set()
    recounted: dict[frozenset, Fraction] = {}
    for sp, ssup in freq.items():
        elems = sorted(sp)
        lo = body_constraints.size_lo
        hi = len(elems) - 1
        if body_constraints.size_hi is not None:
            hi = min(hi, body_constraints.size_hi)
        for k in range(lo, hi + 1):
            for combo in combinations(elems, k):
                body = frozenset(combo)
                head = sp - body
                if not head:
                    continue
                if not (body_constraints.admits(body) and head_constraints.admits(head)):
                    continue
                bsup = freq.get(body)
                if bsup is None:
                    bsup = recounted.get(body)
                if bsup is None:
                    if recount is None:
                        raise MissingSubsetSupport(body)
                    bsup = recounted[body] = support_of(recount, body)
                conf = ssup / bsup
                if params.passes_confidence(conf):
                    out.add(Rule(body, head, ssup, conf))
    return out


def rules_from_branches(
    bodies: Mapping[frozenset, Fraction],
    supersets: Mapping[frozenset, Fraction],
    params: MiningParams,
) -> set[Rule]:
    """Rule generation from the two filtered branches of a constrained query:
    every (body, superset) pair with body a proper subset of superset."""
    out = set()
    for body, bsup in bodies.items():
        for sp, ssup in supersets.items():
            if body < sp:
                conf = ssup / bsup
                if params.passes_confidence(conf):
                    out.add(Rule(body, sp - body, ssup, conf))
    return out
