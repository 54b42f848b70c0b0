"""Record real session-API responses into test/fixtures/ for the UI
contract tests.  Run from the repo root:

    python frontend/record_fixtures.py
"""

import json
from pathlib import Path

from fastapi.testclient import TestClient

from mineral.api import create_app

ROOT = Path(__file__).resolve().parent
FIXTURES = ROOT / "test" / "fixtures"
DATA = ROOT.parent / "data"


def dump(name: str, payload) -> None:
    (FIXTURES / f"{name}.json").write_text(json.dumps(payload, indent=2) + "\n")
    print(f"recorded {name}.json")


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    client = TestClient(create_app())
    client.post("/datasets", json={
        "name": "Purchase", "csv_text": (DATA / "purchase.csv").read_text(),
    })
    client.post("/datasets", json={
        "name": "NewPurchase", "csv_text": (DATA / "newpurchase.csv").read_text(),
    })

    # classic session lifecycle
    created = client.post("/sessions", json={
        "dataset": "Purchase", "template": "classic",
        "minsup": "3/10", "minconf": "3/5",
    }).json()
    sid = created["id"]
    dump("classic_created", created)

    dump("classic_run_to_2", client.post(
        f"/sessions/{sid}/run", json={"until": 2}).json())
    dump("classic_run_to_7", client.post(
        f"/sessions/{sid}/run", json={"until": 7}).json())
    dump("classic_run_to_end", client.post(
        f"/sessions/{sid}/run", json={"until": "end"}).json())
    dump("snapshot_node5", client.get(
        f"/sessions/{sid}/nodes/5/snapshot").json())
    dump("snapshot_node13", client.get(
        f"/sessions/{sid}/nodes/13/snapshot").json())
    dump("classic_patch_minconf", client.patch(
        f"/sessions/{sid}/params", json={"minconf": "0.9"}).json())
    dump("classic_resume", client.post(f"/sessions/{sid}/resume").json())

    # constrained session: branch fork below the frequent-itemset module
    caq = client.post("/sessions", json={
        "dataset": "NewPurchase",
        "query": "{(X1, X2) | count(X1) = 2 and count(X2) = 2}"
                 " with support: 0.1, confidence: 0.2",
    }).json()
    dump("caq_created", caq)
    dump("caq_run_to_end", client.post(
        f"/sessions/{caq['id']}/run", json={"until": "end"}).json())


if __name__ == "__main__":
    main()
