import { describe, expect, it } from "vitest";

import {
  buildTreeViewModel,
  changedNodes,
  controls,
  sessionListModel,
  snapshotTable,
} from "../src/viewmodel.js";
import { formatCell, formatFrac } from "../src/format.js";
import { SnapshotDoc } from "../src/types.js";
import {
  caqCreated,
  classicCreated,
  classicPatchMinconf,
  classicResume,
  classicRunTo2,
  classicRunTo7,
  classicRunToEnd,
  snapshotNode5,
} from "./fixtures.js";

describe("tree view model from a recorded classic session", () => {
  it("renders 13 step nodes plus the source and 3 module boxes", () => {
    const vm = buildTreeViewModel(classicCreated());
    expect(vm.nodes).toHaveLength(14);
    const steps = vm.nodes.map((n) => n.step).filter((s) => s !== null);
    expect(new Set(steps).size).toBe(13);
    expect(vm.boxes).toHaveLength(3);
    const kinds = vm.boxes.map((b) => b.kind).sort();
    expect(kinds).toEqual([
      "data-preparation",
      "frequent-itemsets",
      "rule-generation",
    ]);
  });

  it("module boxes cover exactly the server-reported span nodes", () => {
    const session = classicCreated();
    const vm = buildTreeViewModel(session);
    const byKind = new Map(vm.boxes.map((b) => [b.kind, b.nodes.slice().sort((a, b2) => a - b2)]));
    for (const span of session.tree.spans) {
      expect(byKind.get(span.kind)).toEqual(span.nodes.slice().sort((a, b) => a - b));
    }
  });

  it("mirrors node states and row counts verbatim", () => {
    const report = classicRunTo7();
    const vm = buildTreeViewModel(report.session);
    for (const node of vm.nodes) {
      expect(node.state).toBe(report.session.node_states[String(node.id)]);
      const want = report.session.row_counts[String(node.id)] ?? null;
      expect(node.rows).toBe(want);
    }
  });

  it("marks every server edge, each with its breakpoint flag", () => {
    const session = classicCreated();
    const vm = buildTreeViewModel(session);
    expect(vm.edges).toHaveLength(session.tree.edges.length);
    expect(vm.edges.every((e) => !e.breakpoint)).toBe(true);
  });

  it("lays the tree out top-down: every edge points upward", () => {
    const vm = buildTreeViewModel(classicCreated());
    const byId = new Map(vm.nodes.map((n) => [n.id, n]));
    for (const e of vm.edges) {
      expect(byId.get(e.child)!.y).toBeGreaterThan(byId.get(e.parent)!.y);
    }
  });

  it("renders the parameters as exact fractions", () => {
    const vm = buildTreeViewModel(classicCreated());
    expect(vm.minsup).toBe("3/10 (0.3)");
    expect(vm.minconf).toBe("3/5 (0.6)");
    expect(vm.n).toBe(4);
  });
});

describe("constrained-query session", () => {
  it("shows the A/B branch fork below the frequent-itemset module", () => {
    const session = caqCreated();
    const vm = buildTreeViewModel(session);
    const byId = new Map(vm.nodes.map((n) => [n.id, n]));
    const joins = vm.nodes.filter((n) => n.op === "join");
    expect(joins).toHaveLength(1);
    const into = vm.edges.filter((e) => e.parent === joins[0].id);
    const branchRoots = new Set(into.map((e) => e.child));
    expect(branchRoots.size).toBe(2); // two distinct branches
    const [a, b] = [...branchRoots].map((id) => byId.get(id)!);
    expect(a.x).not.toBe(b.x); // visibly forked
    const fiBox = vm.boxes.find((bx) => bx.kind === "frequent-itemsets")!;
    expect(a.y).toBeLessThan(fiBox.y); // branches sit above (after) the module
  });

  it("keeps the module box labels", () => {
    const vm = buildTreeViewModel(caqCreated());
    const labels = Object.fromEntries(vm.boxes.map((b) => [b.kind, b.label]));
    expect(labels).toEqual({
      "data-preparation": "1",
      "frequent-itemsets": "4",
      "rule-generation": "8",
    });
  });
});

describe("stepping updates", () => {
  it("diff of run-to-2 touches exactly the newly materialized nodes", () => {
    const before = classicCreated();
    const after = classicRunTo2();
    const touched = changedNodes(before, after.session);
    expect(touched).toEqual(after.materialized.map(([id]) => id).sort((a, b) => a - b));
  });

  it("diff of run-to-7 after run-to-2 is exactly nodes 3..7", () => {
    const touched = changedNodes(classicRunTo2().session, classicRunTo7().session);
    expect(touched).toEqual([3, 4, 5, 6, 7]);
  });

  it("a no-op poll changes nothing", () => {
    const s = classicRunTo7().session;
    expect(changedNodes(s, s)).toEqual([]);
  });
});

describe("parameter edit and resume", () => {
  it("patch minconf invalidates exactly the two dependent nodes", () => {
    const report = classicPatchMinconf();
    expect(report.invalidated).toEqual([12, 13]);
    const touched = changedNodes(classicRunToEnd().session, report.session);
    expect(touched).toEqual([12, 13]);
  });

  it("resume re-renders only the invalidated nodes", () => {
    const afterPatch = classicPatchMinconf().session;
    const afterResume = classicResume();
    expect(afterResume.materialized.map(([id]) => id)).toEqual([12, 13]);
    expect(changedNodes(afterPatch, afterResume.session)).toEqual([12, 13]);
  });
});

describe("snapshot tables come verbatim from the payload", () => {
  it("formats the recorded node-5 snapshot without touching the values", () => {
    const doc = snapshotNode5();
    const table = snapshotTable(doc);
    expect(table.header).toEqual(["itemset:set<string>", "count_tid:int"]);
    expect(table.cells).toHaveLength(11);
    // pointwise image of the payload: cell text is format(payload cell), only
    doc.rows.forEach((row, i) => {
      row.forEach((cell, j) => {
        expect(table.cells[i][j]).toBe(formatCell(cell));
      });
    });
  });

  it("displays deliberately inconsistent server values as-is (no recomputation)", () => {
    // a server bug would be faithfully displayed: sup 99/7 on a count of 2
    const doc: SnapshotDoc = {
      schema: [
        { name: "freq_itemset", type: "set<string>" },
        { name: "sup", type: "rational" },
      ],
      rows: [[["B", "C"], { num: 99, den: 7 }]],
      node: 7,
      row_count: 1,
    };
    const table = snapshotTable(doc);
    expect(table.cells[0][0]).toBe("{B, C}");
    expect(table.cells[0][1]).toBe(formatFrac({ num: 99, den: 7 }));
    expect(table.cells[0][1]).toContain("99/7");
  });

  it("paginates above 500 rows", () => {
    const rows = Array.from({ length: 1203 }, (_, i) => [i]);
    const doc: SnapshotDoc = {
      schema: [{ name: "k", type: "int" }],
      rows,
      node: 1,
      row_count: rows.length,
    };
    const p0 = snapshotTable(doc, 0);
    expect(p0.cells).toHaveLength(500);
    expect(p0.pageCount).toBe(3);
    const p2 = snapshotTable(doc, 2);
    expect(p2.cells).toHaveLength(203);
    expect(p2.cells[0][0]).toBe("1000");
    const clamped = snapshotTable(doc, 99);
    expect(clamped.page).toBe(2);
  });
});

describe("controls", () => {
  it("disables all mutating controls while a request is in flight", () => {
    const c = controls("paused", true);
    expect(c.canStep).toBe(false);
    expect(c.canRunToEnd).toBe(false);
    expect(c.canResume).toBe(false);
    expect(c.canEditParams).toBe(false);
  });

  it("running sessions accept no mutations; paused accept all", () => {
    expect(controls("running", false).canStep).toBe(false);
    expect(controls("running", false).canEditParams).toBe(false);
    const paused = controls("paused", false);
    expect(paused.canStep && paused.canRunToEnd && paused.canEditParams).toBe(true);
  });

  it("done sessions may edit parameters and resume, not step", () => {
    const done = controls("done", false);
    expect(done.canEditParams).toBe(true);
    expect(done.canResume).toBe(true);
    expect(done.canStep).toBe(false);
  });
});

describe("session list", () => {
  it("empty list yields the empty state", () => {
    expect(sessionListModel([]).empty).toBe(true);
  });

  it("items carry the kind, dataset and status", () => {
    const model = sessionListModel([classicCreated()]);
    expect(model.empty).toBe(false);
    expect(model.items[0].caption).toContain("classic on Purchase (paused)");
  });
});
