/** Wire types of the mineral session API (snake_case JSON). */

export interface Frac {
  num: number;
  den: number;
}

export type NodeStateName = "pending" | "materialized" | "invalidated";

export interface WireNode {
  id: number;
  op: string;
  label: string;
  step: string | null;
  children: number[];
}

export interface WireSpan {
  kind: string;
  nodes: number[];
  label: string | null;
  params: string[];
  fused: boolean;
}

export interface WireTree {
  root: number;
  kind: string;
  nodes: WireNode[];
  edges: [number, number][];
  spans: WireSpan[];
}

export interface SessionResource {
  id: string;
  dataset: string;
  status: "paused" | "running" | "done" | "cancelled";
  params: {
    minsup: Frac;
    minconf: Frac;
    n: number | null;
    threshold_mode: string;
  };
  tree: WireTree;
  node_states: Record<string, NodeStateName>;
  row_counts: Record<string, number>;
  breakpoints: [number, number][];
  plan: {
    choices: { algorithm: string; node: number | null; span: string | null }[];
    cost: Frac | null;
  };
}

export interface RunReport {
  materialized: [number, number][];
  paused_at: [number, number] | null;
  done: boolean;
  session: SessionResource;
}

export interface InvalidationReport {
  invalidated: number[];
  session: SessionResource;
}

export type JsonCell = number | string | Frac | JsonCell[];

export interface SnapshotDoc {
  schema: { name: string; type: string }[];
  rows: JsonCell[][];
  node: number;
  row_count: number;
}

export function isFrac(v: unknown): v is Frac {
  return (
    typeof v === "object" &&
    v !== null &&
    "num" in v &&
    "den" in v &&
    typeof (v as Frac).num === "number" &&
    typeof (v as Frac).den === "number"
  );
}
