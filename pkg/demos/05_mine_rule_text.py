"""Parse the MINE RULE dialect, compile it onto the query-tree template, and
run it: transactions of at most six items, single-item heads, support 10%,
confidence 20%.

Run:  python demos/05_mine_rule_text.py
"""

from pathlib import Path

from mineral.dataio import DatasetConfig, emit_table, load_transactions_csv
from mineral.dsl import parse_mine_rule, render_mine_rule, compile_query
from mineral.engine import run_to_completion
from mineral.explain import render_tree

DATA = Path(__file__).resolve().parent.parent / "data" / "purchase.csv"
purchase = load_transactions_csv(DatasetConfig(DATA))

QUERY = """
MINE RULE SimpleAssociations AS
SELECT DISTINCT 1..n item AS BODY, 1..1 item AS HEAD, SUPPORT, CONFIDENCE
FROM Purchase
GROUP BY transaction
HAVING COUNT(*) <= 6
EXTRACTING RULES WITH SUPPORT: 0.1, CONFIDENCE: 0.2
"""

ast = parse_mine_rule(QUERY)
print("parsed and re-rendered:")
print(render_mine_rule(ast))

tree = compile_query(ast)
print()
print(render_tree(tree))

out = run_to_completion(tree, {"Purchase": purchase})
print()
print("the thirteen single-head rules:")
print(emit_table(out))
