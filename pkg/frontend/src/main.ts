/** App bootstrap: session list, create form, the steering surface.
 *
 * One session view is active at a time; its state refreshes on a 500 ms
 * poll (eventual consistency with the serialized session - the server is
 * the only computer of relational results).  Mutating controls are disabled
 * while any command is in flight or the session is busy. */

import { ApiClient, ApiError } from "./client.js";
import { renderTable, renderTree, toast } from "./render.js";
import { SessionResource } from "./types.js";
import {
  buildTreeViewModel,
  changedNodes,
  controls,
  sessionListModel,
  snapshotTable,
} from "./viewmodel.js";

const POLL_MS = 500;

const api = new ApiClient("");

interface AppState {
  session: SessionResource | null;
  inflight: boolean;
  flash: Set<number>;
  openSnapshot: number | null;
  snapshotPage: number;
  poller: number | null;
}

const state: AppState = {
  session: null,
  inflight: false,
  flash: new Set(),
  openSnapshot: null,
  snapshotPage: 0,
  poller: null,
};

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

function setStatus(text: string): void {
  el("status-line").textContent = text;
}

async function guard<T>(work: () => Promise<T>): Promise<T | null> {
  state.inflight = true;
  renderAll();
  try {
    return await work();
  } catch (err) {
    if (err instanceof ApiError && err.busy) {
      toast(el("toasts"), "session busy", "error");
    } else if (err instanceof ApiError) {
      toast(el("toasts"), `${err.status}: ${err.message}`, "error");
    } else {
      toast(el("toasts"), String(err), "error");
    }
    return null;
  } finally {
    state.inflight = false;
    renderAll();
  }
}

function adoptSession(next: SessionResource | null): void {
  if (next && state.session && next.id === state.session.id) {
    state.flash = new Set(changedNodes(state.session, next));
  } else {
    state.flash = new Set();
  }
  state.session = next;
  renderAll();
}

function renderAll(): void {
  const session = state.session;
  const c = controls(session?.status ?? "cancelled", state.inflight);
  (el<HTMLButtonElement>("btn-step")).disabled = !c.canStep || !session;
  (el<HTMLButtonElement>("btn-run-to")).disabled = !c.canStep || !session;
  (el<HTMLButtonElement>("btn-run-end")).disabled = !c.canRunToEnd || !session;
  (el<HTMLButtonElement>("btn-resume")).disabled = !c.canResume || !session;
  (el<HTMLButtonElement>("btn-cancel")).disabled = !c.canCancel || !session;
  (el<HTMLButtonElement>("btn-apply-params")).disabled = !c.canEditParams || !session;

  if (!session) {
    el("tree-host").textContent = "";
    el("session-meta").textContent = "no session selected";
    return;
  }
  const vm = buildTreeViewModel(session);
  el("session-meta").textContent =
    `${session.id} on ${session.dataset} - ${session.status} - ` +
    `minsup ${vm.minsup}, minconf ${vm.minconf}, n=${vm.n ?? "?"}`;
  renderTree(el("tree-host"), vm, state.flash, {
    onNodeClick: (id) => void openSnapshot(id),
    onEdgeClick: (child, parent, enabled) =>
      void guard(async () => {
        const res = await api.toggleBreakpoint(session.id, [child, parent], enabled);
        adoptSession(res.session);
      }),
  });
}

async function openSnapshot(node: number): Promise<void> {
  const session = state.session;
  if (!session) return;
  state.openSnapshot = node;
  state.snapshotPage = 0;
  try {
    const doc = await api.snapshot(session.id, node);
    renderTable(
      el("snapshot-host"),
      snapshotTable(doc, state.snapshotPage),
      `node ${node} snapshot`,
    );
  } catch (err) {
    if (err instanceof ApiError && err.status === 409) {
      toast(el("toasts"), `node ${node} is not materialized yet`, "info");
    } else {
      toast(el("toasts"), String(err), "error");
    }
  }
}

async function refreshSessionList(): Promise<void> {
  const model = sessionListModel(await api.listSessions());
  const host = el("session-list");
  host.textContent = "";
  if (model.empty) {
    const empty = document.createElement("div");
    empty.classList.add("empty-state");
    empty.textContent = "no sessions yet - create one above";
    host.appendChild(empty);
    return;
  }
  for (const item of model.items) {
    const btn = document.createElement("button");
    btn.textContent = item.caption;
    btn.addEventListener("click", () => selectSession(item.id));
    host.appendChild(btn);
  }
}

function selectSession(id: string): void {
  if (state.poller !== null) clearInterval(state.poller);
  void guard(async () => adoptSession(await api.getSession(id)));
  state.poller = setInterval(() => {
    if (state.inflight || !state.session || state.session.id !== id) return;
    void api
      .getSession(id)
      .then((s) => adoptSession(s))
      .catch(() => undefined);
  }, POLL_MS) as unknown as number;
}

function wireControls(): void {
  el("btn-step").addEventListener("click", () =>
    guard(async () => {
      const s = state.session!;
      const pending = s.tree.nodes
        .map((n) => n.id)
        .filter((id) => s.node_states[String(id)] !== "materialized");
      const order = nextPending(s, pending);
      if (order === null) return;
      const report = await api.run(s.id, order);
      adoptSession(report.session);
    }),
  );
  el("btn-run-to").addEventListener("click", () =>
    guard(async () => {
      const target = parseInt(
        (el<HTMLInputElement>("run-to-node")).value,
        10,
      );
      if (Number.isNaN(target)) return;
      const report = await api.run(state.session!.id, target);
      adoptSession(report.session);
    }),
  );
  el("btn-run-end").addEventListener("click", () =>
    guard(async () => {
      const report = await api.run(state.session!.id, "end");
      adoptSession(report.session);
    }),
  );
  el("btn-resume").addEventListener("click", () =>
    guard(async () => {
      const report = await api.resume(state.session!.id);
      adoptSession(report.session);
    }),
  );
  el("btn-cancel").addEventListener("click", () =>
    guard(async () => {
      await api.deleteSession(state.session!.id);
      adoptSession(null);
      await refreshSessionList();
    }),
  );
  el("btn-apply-params").addEventListener("click", async () => {
    el("param-error").textContent = "";
    const minsup = (el<HTMLInputElement>("param-minsup")).value.trim();
    const minconf = (el<HTMLInputElement>("param-minconf")).value.trim();
    const body: { minsup?: string; minconf?: string } = {};
    if (minsup) body.minsup = minsup;
    if (minconf) body.minconf = minconf;
    if (!Object.keys(body).length) return;
    state.inflight = true;
    renderAll();
    try {
      const report = await api.patchParams(state.session!.id, body);
      toast(
        el("toasts"),
        report.invalidated.length
          ? `invalidated nodes ${report.invalidated.join(", ")}`
          : "no materialized node depends on that parameter yet",
        "info",
      );
      adoptSession(report.session);
    } catch (err) {
      if (err instanceof ApiError && err.status === 400) {
        el("param-error").textContent = err.message; // validation shown inline
      } else if (err instanceof ApiError && err.busy) {
        toast(el("toasts"), "session busy", "error");
      } else {
        toast(el("toasts"), String(err), "error");
      }
    } finally {
      state.inflight = false;
      renderAll();
    }
  });
  el("btn-create").addEventListener("click", () =>
    guard(async () => {
      const dataset = (el<HTMLInputElement>("create-dataset")).value.trim();
      const template = (el<HTMLSelectElement>("create-template")).value;
      const minsup = (el<HTMLInputElement>("create-minsup")).value.trim() || "0.3";
      const minconf = (el<HTMLInputElement>("create-minconf")).value.trim() || "0.6";
      const session = await api.createSession({
        dataset,
        template,
        minsup,
        minconf,
      });
      await refreshSessionList();
      selectSession(session.id);
    }),
  );
}

/** The next node the engine itself would materialize: the first pending id
 * in the server-reported evaluation order.  (Node ids are already ordered
 * for the template trees; the server re-validates the target anyway.) */
function nextPending(s: SessionResource, pending: number[]): number | null {
  if (!pending.length) return null;
  return Math.min(...pending);
}

window.addEventListener("DOMContentLoaded", () => {
  wireControls();
  void refreshSessionList();
  setStatus("ready");
});
