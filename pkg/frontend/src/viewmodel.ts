/** Pure view-model construction from SessionResource payloads.
 *
 * The view model mirrors the server's tree exactly: node set, edge set,
 * module boxes, states and row counts all come verbatim from the resource.
 * No relation is ever recomputed here; snapshot tables are formatted
 * straight from the snapshot endpoint's payload.
 */

import {
  NodeStateName,
  SessionResource,
  SnapshotDoc,
  WireSpan,
} from "./types.js";
import { formatCell, formatFrac } from "./format.js";

export const NODE_W = 230;
export const NODE_H = 40;
export const GAP_X = 40;
export const GAP_Y = 26;

export interface NodeView {
  id: number;
  op: string;
  label: string;
  step: string | null;
  state: NodeStateName;
  rows: number | null;
  x: number;
  y: number;
}

export interface EdgeView {
  child: number;
  parent: number;
  breakpoint: boolean;
}

export interface BoxView {
  kind: string;
  label: string | null;
  fused: boolean;
  nodes: number[];
  x: number;
  y: number;
  width: number;
  height: number;
}

export interface TreeViewModel {
  sessionId: string;
  status: SessionResource["status"];
  nodes: NodeView[];
  edges: EdgeView[];
  boxes: BoxView[];
  width: number;
  height: number;
  minsup: string;
  minconf: string;
  n: number | null;
  done: boolean;
}

interface Placement {
  x: number;
  y: number;
}

/** Columns via post-order subtree widths, rows via depth from the root
 * (final projection on top, sources at the bottom). */
function layout(session: SessionResource): Map<number, Placement> {
  const byId = new Map(session.tree.nodes.map((n) => [n.id, n]));
  const widths = new Map<number, number>();
  const seen = new Set<number>();

  function width(id: number): number {
    if (widths.has(id)) return widths.get(id)!;
    const node = byId.get(id)!;
    const fresh = [...new Set(node.children)].filter((c) => !seen.has(c));
    fresh.forEach((c) => seen.add(c));
    const w = fresh.length
      ? fresh.map(width).reduce((a, b) => a + b, 0)
      : 1;
    widths.set(id, w);
    return w;
  }
  seen.add(session.tree.root);
  width(session.tree.root);

  const placed = new Map<number, Placement>();

  function place(id: number, col: number, depth: number): void {
    if (placed.has(id)) return;
    const node = byId.get(id)!;
    const w = widths.get(id) ?? 1;
    placed.set(id, { x: col + w / 2, y: depth });
    let offset = col;
    for (const c of [...new Set(node.children)]) {
      if (placed.has(c)) continue;
      const cw = widths.get(c) ?? 1;
      place(c, offset, depth + 1);
      offset += cw;
    }
  }
  place(session.tree.root, 0, 0);

  // shared subtrees may sit shallower than one of their parents; push every
  // node below the deepest parent so edges always point upward
  let moved = true;
  while (moved) {
    moved = false;
    for (const [child, parent] of session.tree.edges) {
      const pc = placed.get(child)!;
      const pp = placed.get(parent)!;
      if (pc.y <= pp.y) {
        placed.set(child, { x: pc.x, y: pp.y + 1 });
        moved = true;
      }
    }
  }
  return placed;
}

export function buildTreeViewModel(session: SessionResource): TreeViewModel {
  const placement = layout(session);
  const maxDepth = Math.max(...[...placement.values()].map((p) => p.y));
  const maxCol = Math.max(...[...placement.values()].map((p) => p.x));

  // final projection on top, sources at the bottom: pixel y grows with
  // depth from the root
  const toPixels = (p: Placement): Placement => ({
    x: 20 + (p.x - 0.5) * (NODE_W + GAP_X),
    y: 20 + p.y * (NODE_H + GAP_Y),
  });

  const nodes: NodeView[] = session.tree.nodes.map((n) => {
    const px = toPixels(placement.get(n.id)!);
    return {
      id: n.id,
      op: n.op,
      label: n.label,
      step: n.step,
      state: session.node_states[String(n.id)] ?? "pending",
      rows: session.row_counts[String(n.id)] ?? null,
      x: px.x,
      y: px.y,
    };
  });

  const bpSet = new Set(session.breakpoints.map(([c, p]) => `${c}->${p}`));
  const edges: EdgeView[] = session.tree.edges.map(([child, parent]) => ({
    child,
    parent,
    breakpoint: bpSet.has(`${child}->${parent}`),
  }));

  const byId = new Map(nodes.map((n) => [n.id, n]));
  const boxes: BoxView[] = session.tree.spans.map((span: WireSpan) => {
    const members = span.nodes.map((id) => byId.get(id)!);
    const minX = Math.min(...members.map((m) => m.x));
    const maxX = Math.max(...members.map((m) => m.x));
    const minY = Math.min(...members.map((m) => m.y));
    const maxY = Math.max(...members.map((m) => m.y));
    return {
      kind: span.kind,
      label: span.label,
      fused: span.fused,
      nodes: [...span.nodes],
      x: minX - 10,
      y: minY - 8,
      width: maxX - minX + NODE_W + 20,
      height: maxY - minY + NODE_H + 16,
    };
  });

  return {
    sessionId: session.id,
    status: session.status,
    nodes,
    edges,
    boxes,
    width: 40 + (maxCol + 0.5) * (NODE_W + GAP_X),
    height: 40 + (maxDepth + 1) * (NODE_H + GAP_Y),
    minsup: formatFrac(session.params.minsup),
    minconf: formatFrac(session.params.minconf),
    n: session.params.n,
    done: session.status === "done",
  };
}

/** Node ids whose state or row count changed between two resources; this is
 * what stepping recolors - nothing else re-renders. */
export function changedNodes(
  before: SessionResource,
  after: SessionResource,
): number[] {
  const out: number[] = [];
  for (const node of after.tree.nodes) {
    const key = String(node.id);
    if (
      before.node_states[key] !== after.node_states[key] ||
      before.row_counts[key] !== after.row_counts[key]
    ) {
      out.push(node.id);
    }
  }
  return out.sort((a, b) => a - b);
}

export interface TableModel {
  header: string[];
  cells: string[][];
  page: number;
  pageCount: number;
  totalRows: number;
}

export const PAGE_SIZE = 500;

/** Snapshot table straight from the payload; paginates above 500 rows. */
export function snapshotTable(
  doc: SnapshotDoc,
  page = 0,
  pageSize = PAGE_SIZE,
): TableModel {
  const header = doc.schema.map((a) => `${a.name}:${a.type}`);
  const pageCount = Math.max(1, Math.ceil(doc.rows.length / pageSize));
  const clamped = Math.min(Math.max(page, 0), pageCount - 1);
  const slice = doc.rows.slice(clamped * pageSize, (clamped + 1) * pageSize);
  return {
    header,
    cells: slice.map((row) => row.map(formatCell)),
    page: clamped,
    pageCount,
    totalRows: doc.rows.length,
  };
}

export interface SessionListModel {
  empty: boolean;
  items: { id: string; caption: string }[];
}

export function sessionListModel(sessions: SessionResource[]): SessionListModel {
  return {
    empty: sessions.length === 0,
    items: sessions.map((s) => ({
      id: s.id,
      caption: `${s.id}: ${s.tree.kind} on ${s.dataset} (${s.status})`,
    })),
  };
}

export interface ControlsModel {
  canStep: boolean;
  canRunToEnd: boolean;
  canResume: boolean;
  canCancel: boolean;
  canEditParams: boolean;
}

/** Every mutating control is disabled whenever the session (or the client's
 * own in-flight request) is busy - the 409-avoidance rule. */
export function controls(
  status: SessionResource["status"],
  inflight: boolean,
): ControlsModel {
  const paused = status === "paused" && !inflight;
  const pausedOrDone = (status === "paused" || status === "done") && !inflight;
  return {
    canStep: paused,
    canRunToEnd: paused,
    canResume: pausedOrDone,
    canCancel: status !== "cancelled" && !inflight,
    canEditParams: pausedOrDone,
  };
}
