"""Shared fixtures: the two worked-example tables (one-letter item aliases),
their CSV transcriptions, and the seeded soundness corpus."""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import pytest

from mineral.corpus import corpus
from mineral.model import INT, STRING, Schema, make_relation
from mineral.params import MiningParams

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

# Purchase: transactions 1:{J,H} 2:{C,B,J} 3:{S,J} 4:{C,B,J}
PURCHASE_ROWS = [
    (1, "J"), (1, "H"),
    (2, "C"), (2, "B"), (2, "J"),
    (3, "S"), (3, "J"),
    (4, "C"), (4, "B"), (4, "J"),
]

# NewPurchase: transactions 1:{S,H} 2:{H,C,B,J} 3:{J} 4:{B,C,J}
NEWPURCHASE_ROWS = [
    (1, "S"), (1, "H"),
    (2, "H"), (2, "C"), (2, "B"), (2, "J"),
    (3, "J"),
    (4, "B"), (4, "C"), (4, "J"),
]

TID_ITEM = Schema([("tid", INT), ("item", STRING)])


@pytest.fixture(scope="session")
def purchase():
    return make_relation(TID_ITEM, PURCHASE_ROWS)


@pytest.fixture(scope="session")
def newpurchase():
    return make_relation(TID_ITEM, NEWPURCHASE_ROWS)


@pytest.fixture(scope="session")
def classic_params():
    return MiningParams(Fraction(3, 10), Fraction(6, 10))


@pytest.fixture(scope="session")
def relaxed_params():
    return MiningParams(Fraction(1, 10), Fraction(2, 10))


@pytest.fixture(scope="session")
def purchase_csv():
    return DATA_DIR / "purchase.csv"


@pytest.fixture(scope="session")
def newpurchase_csv():
    return DATA_DIR / "newpurchase.csv"


@pytest.fixture(scope="session")
def corpus200():
    return corpus(200)


@pytest.fixture(scope="session")
def corpus40():
    return corpus(40)
