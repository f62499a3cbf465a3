/** DOM painting for the dashboard.

Full re-render on every state change; the state is small enough that
diffing would buy nothing. The only DOM state that survives a render
is operator input: dirty weight fields, open/closed drill-downs, and
focus. Alarms outrank everything visually, the matrices hide inside
drill-downs, per the crisis-room priority order. */

import { formatCountdown, remainingSeconds } from "./countdown.js";
import type { ConsoleState, PanelState, SourceChip } from "./state.js";
import type { MatrixDoc } from "./types.js";

export interface Actions {
  submitWeights(values: Record<string, number>): void;
  preActivate(sourceId: string): void;
  forceSwitch(dataType: string, sourceId: string): void;
  ackChange(dataType: string): void;
  isBusy(key: string): boolean;
}

interface Preserved {
  dirtyWeights: Record<string, string>;
  openKeys: Set<string>;
  focusedWeight: string | null;
}

function preserve(root: HTMLElement): Preserved {
  const kept: Preserved = { dirtyWeights: {}, openKeys: new Set(), focusedWeight: null };
  for (const input of root.querySelectorAll<HTMLInputElement>("input[data-weight]")) {
    if (input.dataset["dirty"] === "1") {
      kept.dirtyWeights[input.dataset["weight"] ?? ""] = input.value;
    }
    const doc = root.ownerDocument;
    if (doc.activeElement === input) kept.focusedWeight = input.dataset["weight"] ?? null;
  }
  for (const details of root.querySelectorAll<HTMLDetailsElement>("details[data-key]")) {
    if (details.open) kept.openKeys.add(details.dataset["key"] ?? "");
  }
  return kept;
}

export function render(
  root: HTMLElement,
  state: ConsoleState,
  actions: Actions,
  nowMs: number,
): void {
  const doc = root.ownerDocument;
  const kept = preserve(root);
  root.textContent = "";

  const el = <K extends keyof HTMLElementTagNameMap>(
    tag: K,
    parent: Element,
    text?: string,
  ): HTMLElementTagNameMap[K] => {
    const node = doc.createElement(tag);
    if (text !== undefined) node.textContent = text;
    parent.appendChild(node);
    return node;
  };

  const header = el("header", root);
  el("h1", header, "operator console");
  const conn = el("span", header, state.connection);
  conn.className = `conn conn-${state.connection}`;
  conn.setAttribute("data-conn", state.connection);

  if (state.connection !== "live") {
    const banner = el("div", root,
      state.connection === "degraded"
        ? `connection lost, retrying (attempt ${state.retryAttempt + 1})`
        : "connecting to service...");
    banner.className = "banner banner-degraded";
    banner.setAttribute("data-degraded", "");
  }

  const alarming = Object.values(state.panels).filter((panel) => panel.alarm);
  if (alarming.length > 0) {
    const banner = el("div", root);
    banner.className = "banner banner-alarm";
    banner.setAttribute("data-alarm-banner", "");
    el("strong", banner, "ALARM");
    for (const panel of alarming) {
      el("div", banner,
        `${panel.dataType}: no activatable source` +
        (panel.decision ? ` (${panel.decision.rationale})` : ""));
    }
  }

  if (state.commandError !== null) {
    const note = el("div", root, state.commandError);
    note.className = "banner banner-error";
    note.setAttribute("data-command-error", "");
  }

  const stale = state.connection !== "live";
  for (const panel of Object.values(state.panels)) {
    renderPanel(root, panel, actions, nowMs, stale, el);
  }

  renderWeightEditor(root, state, actions, kept, el);

  const tickerBox = el("section", root);
  tickerBox.className = "ticker";
  el("h3", tickerBox, "event ticker");
  const list = el("ul", tickerBox);
  list.setAttribute("data-ticker", "");
  for (const entry of state.ticker) {
    el("li", list, `[${entry.kind}] ${entry.text}`).className = `tick tick-${entry.kind}`;
  }

  restore(root, kept);
}

type Make = <K extends keyof HTMLElementTagNameMap>(
  tag: K,
  parent: Element,
  text?: string,
) => HTMLElementTagNameMap[K];

function renderPanel(
  root: HTMLElement,
  panel: PanelState,
  actions: Actions,
  nowMs: number,
  stale: boolean,
  el: Make,
): void {
  const section = el("section", root);
  section.className = stale ? "panel panel-stale" : "panel";
  section.setAttribute("data-panel", panel.dataType);
  el("h2", section, panel.dataType);

  const activeRow = el("div", section);
  activeRow.className = "active-row";
  el("span", activeRow, "active source:");
  const activeChip = el("span", activeRow, panel.activeSource ?? "none");
  activeChip.className = panel.activeSource === null ? "chip chip-none" : "chip chip-active";
  activeChip.setAttribute("data-active-source", panel.activeSource ?? "");

  if (panel.changedAt !== null) {
    const indicator = el("span", activeRow,
      panel.activeSource === null
        ? `designation lost (was ${panel.changedFrom ?? "none"})`
        : `switched from ${panel.changedFrom ?? "none"}`);
    const fresh = nowMs - panel.changedAt < 5000 ? " indicator-fresh" : "";
    indicator.className = `indicator${fresh}`;
    indicator.setAttribute("data-indicator", panel.dataType);
    const ack = el("button", activeRow, "ack");
    ack.setAttribute("data-ack", panel.dataType);
    ack.addEventListener("click", () => actions.ackChange(panel.dataType));
  }

  const chips = el("div", section);
  chips.className = "chips";
  for (const chip of panel.sources) {
    renderChip(chips, panel, chip, actions, nowMs, el);
  }

  if (panel.decision !== null) {
    const card = el("div", section);
    card.className = "decision";
    card.setAttribute("data-decision", "");
    el("div", card,
      `latest decision: ${panel.decision.action} -> ${panel.decision.chosen ?? "none"}`);
    el("div", card, panel.decision.rationale).className = "rationale";
    const table = el("table", card);
    table.setAttribute("data-ranking", "");
    const head = el("tr", el("thead", table));
    for (const label of ["source", "rank", "features", "vulnerabilities"]) {
      el("th", head, label);
    }
    const body = el("tbody", table);
    for (const row of panel.decision.ranking) {
      const tr = el("tr", body);
      if (row["source-id"] === panel.decision.chosen) tr.className = "chosen";
      el("td", tr, row["source-id"]);
      el("td", tr, String(row["rank-score"]));
      el("td", tr, String(row["feature-sum"]));
      el("td", tr, String(row["vulnerability-sum"]));
    }
  }
}

function renderChip(
  chips: HTMLElement,
  panel: PanelState,
  chip: SourceChip,
  actions: Actions,
  nowMs: number,
  el: Make,
): void {
  const box = el("span", chips);
  box.className = `chip state-${chip.state}`;
  box.setAttribute("data-chip", chip.sourceId);
  el("span", box, `${chip.displayName}: ${chip.state}`);

  if (chip.state === "pending-activation" && chip.readyAt !== null) {
    const remaining = remainingSeconds(chip.readyAt, nowMs);
    const label = remaining > 0 ? `ready in ${formatCountdown(remaining)}` : "activating...";
    const countdown = el("span", box, label);
    countdown.className = "countdown";
    countdown.setAttribute("data-countdown-for", chip.sourceId);
  }

  const pre = el("button", box, "pre-activate");
  pre.setAttribute("data-pre-activate", chip.sourceId);
  pre.disabled =
    chip.state !== "unknown" || actions.isBusy(`pre-activate:${chip.sourceId}`);
  pre.addEventListener("click", () => actions.preActivate(chip.sourceId));

  const force = el("button", box, "force switch");
  force.setAttribute("data-force-switch", chip.sourceId);
  force.disabled =
    chip.sourceId === panel.activeSource ||
    chip.state === "failed" ||
    chip.state === "retired" ||
    actions.isBusy(`force-switch:${chip.sourceId}`);
  force.addEventListener("click", () => actions.forceSwitch(panel.dataType, chip.sourceId));
}

function renderWeightEditor(
  root: HTMLElement,
  state: ConsoleState,
  actions: Actions,
  kept: Preserved,
  el: Make,
): void {
  const firstMatrix = Object.values(state.matrices)[0];
  if (!firstMatrix) return;

  for (const [dataType, matrix] of Object.entries(state.matrices)) {
    const details = el("details", root);
    details.setAttribute("data-key", `matrix-${dataType}`);
    el("summary", details, `assessment matrix: ${dataType}`);
    renderMatrixTable(details, dataType, matrix, el);
  }

  const editor = el("details", root);
  editor.setAttribute("data-key", "weights");
  el("summary", editor, "weight editor");
  const box = el("div", editor);
  box.className = "weight-editor";
  box.setAttribute("data-weight-editor", "");
  const attributes = [
    ...firstMatrix["feature-attributes"],
    ...firstMatrix["vulnerability-attributes"],
  ];
  for (const attribute of attributes) {
    const row = el("label", box);
    row.className = "weight-row";
    el("span", row, attribute);
    const input = el("input", row);
    input.type = "number";
    input.step = "any";
    input.setAttribute("data-weight", attribute);
    input.value = String(state.weights[attribute] ?? 0);
    input.addEventListener("input", () => {
      input.dataset["dirty"] = "1";
    });
  }
  const apply = el("button", box, "apply weights");
  apply.setAttribute("data-apply-weights", "");
  apply.disabled = actions.isBusy("weights");
  apply.addEventListener("click", () => {
    const values: Record<string, number> = {};
    for (const input of box.querySelectorAll<HTMLInputElement>("input[data-weight]")) {
      values[input.dataset["weight"] ?? ""] = Number(input.value);
    }
    actions.submitWeights(values);
  });
  if (state.weightError !== null) {
    const error = el("span", box, state.weightError);
    error.className = "inline-error";
    error.setAttribute("data-weight-error", "");
  }
}

function renderMatrixTable(
  parent: HTMLElement,
  dataType: string,
  matrix: MatrixDoc,
  el: Make,
): void {
  const table = el("table", parent);
  table.setAttribute("data-matrix", dataType);
  const head = el("tr", el("thead", table));
  el("th", head, "attribute");
  for (const pair of matrix.pairs) {
    el("th", head, `${pair["source-a"]} / ${pair["source-b"]}`);
  }
  const body = el("tbody", table);

  const scoreRow = (attribute: string) => {
    const tr = el("tr", body);
    el("td", tr, attribute);
    for (const pair of matrix.pairs) {
      el("td", tr, String(pair.scores[attribute] ?? ""));
    }
  };
  const sumRow = (label: string, key: "feature-sum" | "vulnerability-sum") => {
    const tr = el("tr", body);
    tr.className = "sum-row";
    el("td", tr, label);
    for (const pair of matrix.pairs) {
      const cell = el("td", tr, String(pair[key]));
      const mark = key === "feature-sum" ? "data-feature-sum" : "data-vuln-sum";
      cell.setAttribute(mark, `${pair["source-a"]}|${pair["source-b"]}`);
    }
  };

  for (const attribute of matrix["feature-attributes"]) scoreRow(attribute);
  sumRow("SUM data features", "feature-sum");
  for (const attribute of matrix["vulnerability-attributes"]) scoreRow(attribute);
  sumRow("SUM source vulnerability", "vulnerability-sum");
}

function restore(root: HTMLElement, kept: Preserved): void {
  for (const details of root.querySelectorAll<HTMLDetailsElement>("details[data-key]")) {
    if (kept.openKeys.has(details.dataset["key"] ?? "")) details.open = true;
  }
  for (const input of root.querySelectorAll<HTMLInputElement>("input[data-weight]")) {
    const attribute = input.dataset["weight"] ?? "";
    if (attribute in kept.dirtyWeights) {
      input.value = kept.dirtyWeights[attribute] ?? input.value;
      input.dataset["dirty"] = "1";
    }
    if (kept.focusedWeight === attribute) input.focus();
  }
}
