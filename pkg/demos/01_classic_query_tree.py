"""Build the classic 13-step association-rule query tree, look at its shape,
and watch every intermediate relation as it evaluates over the department
store Purchase table.

Run:  python demos/01_classic_query_tree.py
"""

from fractions import Fraction
from pathlib import Path

from mineral.dataio import DatasetConfig, emit_table, load_transactions_csv
from mineral.engine import trace_all
from mineral.explain import render_tree
from mineral.params import MiningParams
from mineral.tree import build_classic_tree

DATA = Path(__file__).resolve().parent.parent / "data" / "purchase.csv"

purchase = load_transactions_csv(DatasetConfig(DATA))
print("The Purchase table:")
print(emit_table(purchase))

# 30% minimum support, 60% minimum confidence, thresholds strict.
params = MiningParams(Fraction(3, 10), Fraction(6, 10))
tree = build_classic_tree("Purchase", params)

# The tree has one source node plus the thirteen numbered steps: project,
# nest, powerset, unnest, group-count, support filter, support projection,
# the A/B aliases, subset join, two renaming projections, confidence filter,
# and the final head computation via set difference.
print()
print(render_tree(tree))

# Evaluate, keeping a snapshot per node.  Step 4 materializes all twenty
# (tid, itemset) rows; step 5 counts the eleven distinct itemsets; the
# support filter keeps seven; the subset join pairs twelve body/superset
# combinations; nine rules survive the confidence filter.
print()
for snap in trace_all(tree, {"Purchase": purchase}):
    step = tree.node(snap.node).step
    label = f"step {step}" if step else "source"
    print(f"--- {label}: {snap.rows} rows")
    if step in ("5", "7", "13"):
        print(emit_table(snap.relation))
