"""Seeded random transaction datasets for property tests, demos, and the
`--data synth:` CLI convenience.  Everything is driven by an explicit seed;
the same seed always yields the same dataset."""

from __future__ import annotations

import random
import string
from dataclasses import dataclass
from fractions import Fraction

from .model import INT, STRING, NestedRelation, Schema, make_relation
from .params import MiningParams

ITEM_NAMES = tuple(string.ascii_lowercase)


@dataclass(frozen=True)
class RandomDataset:
    relation: NestedRelation  # flat (tid, item)
    minsup: Fraction
    minconf: Fraction
    seed: int


def random_transactions(
    rng: random.Random,
    max_items: int = 8,
    max_transactions: int = 12,
) -> list[tuple[int, frozenset[str]]]:
    m = rng.randint(2, max_items)
    universe = list(ITEM_NAMES[:m])
    count = rng.randint(1, max_transactions)
    txns = []
    for tid in range(1, count + 1):
        width = min(m, 1 + min(rng.randrange(4), rng.randrange(4)) + rng.randrange(2))
        txns.append((tid, frozenset(rng.sample(universe, width))))
    return txns


def random_dataset(seed: int, max_items: int = 8, max_transactions: int = 12) -> RandomDataset:
    rng = random.Random(seed)
    txns = random_transactions(rng, max_items, max_transactions)
    rows = [(tid, item) for tid, items in txns for item in items]
    rel = make_relation(Schema([("tid", INT), ("item", STRING)]), rows)
    minsup = Fraction(rng.randint(1, 5), 10)
    minconf = Fraction(rng.randint(1, 8), 10)
    return RandomDataset(rel, minsup, minconf, seed)


def corpus(size: int = 200, base_seed: int = 20010625) -> list[RandomDataset]:
    """The shared soundness corpus: `size` seeded datasets of at most 8 items
    and 12 transactions."""
    return [random_dataset(base_seed + i) for i in range(size)]


def synth_relation(seed: int, transactions: int, items: int) -> NestedRelation:
    rng = random.Random(seed)
    universe = [
        ITEM_NAMES[i] if i < 26 else f"item{i}" for i in range(items)
    ]
    rows = []
    for tid in range(1, transactions + 1):
        width = max(1, min(items, int(rng.gauss(items / 3, items / 6))))
        for item in rng.sample(universe, width):
            rows.append((tid, item))
    return make_relation(Schema([("tid", INT), ("item", STRING)]), rows)


def params_for(ds: RandomDataset) -> MiningParams:
    return MiningParams(ds.minsup, ds.minconf)
