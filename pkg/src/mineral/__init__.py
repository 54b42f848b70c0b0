"""mineral: association-rule mining as nested relational algebra query trees.

The package builds, rewrites, plans and interactively executes mining
queries: a nested-relational data model with exact rationals, the eight
logical operators, three query-tree templates (classic, MINE RULE variant,
constrained association query), a rule-based optimizer with a cost model,
and a breakpoint-capable execution engine with CLI and HTTP surfaces.
"""

from .model import (
    DATE,
    INT,
    RATIONAL,
    STRING,
    NestedRelation,
    Schema,
    canonical_render,
    make_relation,
    relation_equal,
    set_of,
)
from .params import MiningParams
from .tree import (
    CAQSpec,
    QueryTree,
    SideConstraints,
    build_caq_tree,
    build_classic_tree,
    build_mine_rule_tree,
)

__all__ = [
    "DATE",
    "INT",
    "RATIONAL",
    "STRING",
    "NestedRelation",
    "Schema",
    "canonical_render",
    "make_relation",
    "relation_equal",
    "set_of",
    "MiningParams",
    "CAQSpec",
    "QueryTree",
    "SideConstraints",
    "build_caq_tree",
    "build_classic_tree",
    "build_mine_rule_tree",
]

__version__ = "0.1.0"
