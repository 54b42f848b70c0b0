"""Interactive steering: pause a running mining job at a breakpoint, inspect
the itemset counts, raise the support threshold mid-flight, and resume.

The session only recomputes what the edit invalidated; nodes below the
parameter's first use are untouched, so an edit made before the threshold
step costs nothing.

Run:  python demos/02_breakpoints_and_steering.py
"""

from fractions import Fraction
from pathlib import Path

from mineral.dataio import DatasetConfig, emit_table, load_transactions_csv
from mineral.engine import Session
from mineral.params import MiningParams
from mineral.tree import build_classic_tree

DATA = Path(__file__).resolve().parent.parent / "data" / "purchase.csv"
purchase = load_transactions_csv(DatasetConfig(DATA))

params = MiningParams(Fraction(3, 10), Fraction(6, 10))
tree = build_classic_tree("Purchase", params)

# Enable a breakpoint on the edge feeding the support filter (step 6).
session = Session(tree.with_breakpoints([(5, 6)]), {"Purchase": purchase})

report = session.run_until("end")
print(f"paused at breakpoint edge {report.paused_at}")
print("itemset counts so far (step 5):")
print(emit_table(session.inspect(5).relation))

# The run so far used minsup = 3/10.  Raising it to 1/2 before step 6 has
# executed invalidates nothing:
invalidation = session.set_param("minsup", Fraction(1, 2))
print(f"\nraised minsup to 1/2; invalidated nodes: {list(invalidation.invalidated)}")

report = session.resume()
assert report.done
print("\nfrequent itemsets at the new threshold (step 7):")
print(emit_table(session.inspect(7).relation))
print("\nfinal rules (none: only {Joystick} stays frequent, and a single")
print("itemset admits no body/head split):")
print(emit_table(session.inspect(13).relation))

# Lowering the confidence threshold after completion invalidates exactly the
# confidence filter and the final projection; resume recomputes just those.
session2 = Session(tree, {"Purchase": purchase})
session2.run_until("end")
invalidation = session2.set_param("minconf", Fraction(9, 10))
print(f"\nminconf edit after completion invalidates: {list(invalidation.invalidated)}")
report = session2.resume()
print(f"resume recomputed {[n for n, _ in report.materialized]}; "
      f"final row count {session2.inspect(13).rows}")
