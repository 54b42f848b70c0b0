/** Raw-DOM/SVG rendering of the view models.  Deliberately framework-free:
 * the tree re-renders from scratch on session changes (desk-scale trees),
 * with a flash class on nodes the last command touched. */

import { BoxView, NodeView, TableModel, TreeViewModel, NODE_H, NODE_W } from "./viewmodel.js";

const SVG = "http://www.w3.org/2000/svg";

const STATE_CLASS: Record<string, string> = {
  pending: "node-pending",
  materialized: "node-materialized",
  invalidated: "node-invalidated",
};

export interface TreeCallbacks {
  onNodeClick(id: number): void;
  onEdgeClick(child: number, parent: number, enabled: boolean): void;
}

export function renderTree(
  host: HTMLElement,
  vm: TreeViewModel,
  flash: Set<number>,
  callbacks: TreeCallbacks,
): void {
  host.textContent = "";
  const svg = document.createElementNS(SVG, "svg");
  svg.setAttribute("width", String(vm.width));
  svg.setAttribute("height", String(vm.height));
  svg.classList.add("tree");

  for (const box of vm.boxes) {
    svg.appendChild(renderBox(box));
  }

  const byId = new Map(vm.nodes.map((n) => [n.id, n]));
  for (const edge of vm.edges) {
    const child = byId.get(edge.child)!;
    const parent = byId.get(edge.parent)!;
    const line = document.createElementNS(SVG, "line");
    line.setAttribute("x1", String(child.x + NODE_W / 2));
    line.setAttribute("y1", String(child.y));
    line.setAttribute("x2", String(parent.x + NODE_W / 2));
    line.setAttribute("y2", String(parent.y + NODE_H));
    line.classList.add("edge");
    svg.appendChild(line);

    const marker = document.createElementNS(SVG, "circle");
    marker.setAttribute("cx", String((child.x + parent.x) / 2 + NODE_W / 2));
    marker.setAttribute("cy", String((child.y + parent.y + NODE_H) / 2));
    marker.setAttribute("r", "6");
    marker.classList.add("bp", edge.breakpoint ? "bp-on" : "bp-off");
    const title = document.createElementNS(SVG, "title");
    title.textContent = `breakpoint ${edge.child} -> ${edge.parent} (click to toggle)`;
    marker.appendChild(title);
    marker.addEventListener("click", () =>
      callbacks.onEdgeClick(edge.child, edge.parent, !edge.breakpoint),
    );
    svg.appendChild(marker);
  }

  for (const node of vm.nodes) {
    svg.appendChild(renderNode(node, flash.has(node.id), callbacks));
  }
  host.appendChild(svg);
}

function renderBox(box: BoxView): SVGElement {
  const g = document.createElementNS(SVG, "g");
  const rect = document.createElementNS(SVG, "rect");
  rect.setAttribute("x", String(box.x));
  rect.setAttribute("y", String(box.y));
  rect.setAttribute("width", String(box.width));
  rect.setAttribute("height", String(box.height));
  rect.classList.add("module-box", `module-${box.kind}`);
  g.appendChild(rect);
  const label = document.createElementNS(SVG, "text");
  label.setAttribute("x", String(box.x + box.width - 6));
  label.setAttribute("y", String(box.y + 14));
  label.setAttribute("text-anchor", "end");
  label.classList.add("module-label");
  const tag = box.label ? `(${box.label}) ` : "";
  label.textContent = `${tag}${box.kind}${box.fused ? " [fused]" : ""}`;
  g.appendChild(label);
  return g;
}

function renderNode(
  node: NodeView,
  flashing: boolean,
  callbacks: TreeCallbacks,
): SVGElement {
  const g = document.createElementNS(SVG, "g");
  g.classList.add("node", STATE_CLASS[node.state] ?? "node-pending");
  if (flashing) g.classList.add("node-flash");
  g.setAttribute("data-node", String(node.id));

  const rect = document.createElementNS(SVG, "rect");
  rect.setAttribute("x", String(node.x));
  rect.setAttribute("y", String(node.y));
  rect.setAttribute("rx", "6");
  rect.setAttribute("width", String(NODE_W));
  rect.setAttribute("height", String(NODE_H));
  g.appendChild(rect);

  const title = document.createElementNS(SVG, "text");
  title.setAttribute("x", String(node.x + 8));
  title.setAttribute("y", String(node.y + 17));
  const step = node.step ? ` (step ${node.step})` : "";
  title.textContent = `(${node.id})${step}`;
  title.classList.add("node-id");
  g.appendChild(title);

  const label = document.createElementNS(SVG, "text");
  label.setAttribute("x", String(node.x + 8));
  label.setAttribute("y", String(node.y + 33));
  label.classList.add("node-label");
  label.textContent =
    node.label.length > 30 ? node.label.slice(0, 29) + "…" : node.label;
  const tip = document.createElementNS(SVG, "title");
  tip.textContent = node.label;
  g.appendChild(tip);
  g.appendChild(label);

  if (node.rows !== null) {
    const rows = document.createElementNS(SVG, "text");
    rows.setAttribute("x", String(node.x + NODE_W - 8));
    rows.setAttribute("y", String(node.y + 17));
    rows.setAttribute("text-anchor", "end");
    rows.classList.add("node-rows");
    rows.textContent = `${node.rows} rows`;
    g.appendChild(rows);
  }

  g.addEventListener("click", () => callbacks.onNodeClick(node.id));
  return g;
}

export function renderTable(host: HTMLElement, model: TableModel, caption: string): void {
  host.textContent = "";
  const head = document.createElement("div");
  head.classList.add("table-caption");
  head.textContent = caption;
  host.appendChild(head);

  const table = document.createElement("table");
  const thead = document.createElement("thead");
  const hr = document.createElement("tr");
  for (const name of model.header) {
    const th = document.createElement("th");
    th.textContent = name;
    hr.appendChild(th);
  }
  thead.appendChild(hr);
  table.appendChild(thead);
  const tbody = document.createElement("tbody");
  for (const row of model.cells) {
    const tr = document.createElement("tr");
    for (const cell of row) {
      const td = document.createElement("td");
      td.textContent = cell;
      tr.appendChild(td);
    }
    tbody.appendChild(tr);
  }
  table.appendChild(tbody);
  host.appendChild(table);

  const foot = document.createElement("div");
  foot.classList.add("table-footer");
  foot.textContent =
    model.pageCount > 1
      ? `page ${model.page + 1}/${model.pageCount} of ${model.totalRows} rows`
      : `${model.totalRows} rows`;
  host.appendChild(foot);
}

export function toast(host: HTMLElement, message: string, kind: "error" | "info"): void {
  const el = document.createElement("div");
  el.classList.add("toast", `toast-${kind}`);
  el.textContent = message;
  host.appendChild(el);
  setTimeout(() => el.remove(), 4000);
}
