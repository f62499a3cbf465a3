/** Console view model.

Everything here is a projection of service responses and stream events.
The store never ranks, never picks a source, and never guesses a state:
a designation changes only when a decision event (or a fresh snapshot)
says so. That keeps the dashboard honest when several operators act at
once; the server is the single authority and every browser converges. */

import type { FeedEvent, FeedStatus } from "./sse.js";
import type {
  ActiveInfo,
  DecisionDoc,
  DecisionRecord,
  MatrixDoc,
  MatrixUpdatedDoc,
  RegistryPayload,
  StatusDoc,
  TransitionDoc,
} from "./types.js";

const TICKER_LIMIT = 150;

export interface SourceChip {
  sourceId: string;
  displayName: string;
  standard: boolean;
  state: string;
  readyAt: number | null;
}

export interface PanelState {
  dataType: string;
  standard: string | null;
  activeSource: string | null;
  alarm: boolean;
  /** ms timestamp when the designation last changed; drives the indicator. */
  changedAt: number | null;
  changedFrom: string | null;
  decision: DecisionDoc | null;
  sources: SourceChip[];
}

export interface TickerEntry {
  id: number;
  kind: string;
  at: number;
  text: string;
}

export interface ConsoleState {
  connection: FeedStatus;
  retryAttempt: number;
  panels: Record<string, PanelState>;
  matrices: Record<string, MatrixDoc>;
  weights: Record<string, number>;
  packDigest: string | null;
  ticker: TickerEntry[];
  lastEventId: number;
  lastDecisionSeq: number;
  weightError: string | null;
  commandError: string | null;
}

/** Pre-flight check for the weight editor; invalid input sends nothing. */
export function weightInputError(attributeId: string, value: number): string | null {
  if (!Number.isFinite(value)) return `${attributeId}: not a number`;
  if (value < 0) return `${attributeId}: weight must be zero or positive`;
  return null;
}

function emptyState(): ConsoleState {
  return {
    connection: "connecting",
    retryAttempt: 0,
    panels: {},
    matrices: {},
    weights: {},
    packDigest: null,
    ticker: [],
    lastEventId: 0,
    lastDecisionSeq: 0,
    weightError: null,
    commandError: null,
  };
}

export class ConsoleStore {
  state: ConsoleState = emptyState();
  private listeners: (() => void)[] = [];

  subscribe(listener: () => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((entry) => entry !== listener);
    };
  }

  emit(): void {
    for (const listener of this.listeners) listener();
  }

  // -- snapshot loading (initial sync and post-reconnect resync) ------------

  loadRegistry(payload: RegistryPayload): void {
    for (const doc of payload.registry.sources) {
      const dataType = doc["data-type"];
      const panel = this.panel(dataType);
      if (doc.standard) panel.standard = doc["source-id"];
      const existing = panel.sources.find((c) => c.sourceId === doc["source-id"]);
      if (existing) {
        existing.displayName = doc["display-name"] ?? doc["source-id"];
        existing.standard = Boolean(doc.standard);
      } else {
        panel.sources.push({
          sourceId: doc["source-id"],
          displayName: doc["display-name"] ?? doc["source-id"],
          standard: Boolean(doc.standard),
          state: "unknown",
          readyAt: null,
        });
      }
    }
    this.emit();
  }

  loadStatuses(statuses: Record<string, StatusDoc>): void {
    for (const panel of Object.values(this.state.panels)) {
      for (const chip of panel.sources) {
        const doc = statuses[chip.sourceId];
        if (!doc) continue;
        chip.state = doc.state;
        chip.readyAt = doc.state === "pending-activation" ? doc["ready-at"] : null;
      }
    }
    this.emit();
  }

  /** Designations from a snapshot; never raises the change indicator. */
  loadActive(active: Record<string, ActiveInfo>): void {
    for (const [dataType, info] of Object.entries(active)) {
      const panel = this.panel(dataType);
      panel.activeSource = info["source-id"];
      panel.alarm = info.alarm;
      if (info.standard !== null) panel.standard = info.standard;
    }
    this.emit();
  }

  loadMatrix(dataType: string, matrix: MatrixDoc): void {
    this.state.matrices[dataType] = matrix;
    this.state.weights = { ...matrix.weights };
    this.emit();
  }

  loadDecisions(payload: { decisions: DecisionRecord[]; "latest-seq": number }): void {
    for (const record of payload.decisions) {
      this.panel(record["data-type"]).decision = record;
    }
    this.state.lastDecisionSeq = Math.max(
      this.state.lastDecisionSeq,
      payload["latest-seq"],
    );
    this.emit();
  }

  setPackDigest(digest: string): void {
    this.state.packDigest = digest;
    this.emit();
  }

  setConnection(status: FeedStatus, attempt = 0): void {
    this.state.connection = status;
    this.state.retryAttempt = attempt;
    this.emit();
  }

  // -- stream events ---------------------------------------------------------

  /** Apply one SSE event; duplicates from resume replays are dropped. */
  applyEvent(event: FeedEvent, nowMs: number): void {
    if (event.id !== null) {
      if (event.id <= this.state.lastEventId) return;
      this.state.lastEventId = event.id;
    }
    switch (event.event) {
      case "transition":
        this.onTransition(event.data as TransitionDoc, event.id);
        break;
      case "decision":
        this.onDecision(event.data as DecisionDoc, event.id, nowMs);
        break;
      case "alarm":
        this.onAlarm(event.data as DecisionDoc, event.id);
        break;
      case "matrix-updated":
        this.onMatrixUpdated(event.data as MatrixUpdatedDoc, event.id);
        break;
      default:
        break;
    }
    this.emit();
  }

  private onTransition(doc: TransitionDoc, id: number | null): void {
    const panel = this.panel(doc["data-type"]);
    const chip = panel.sources.find((c) => c.sourceId === doc["source-id"]);
    if (chip) {
      chip.state = doc.to;
      // the countdown resolves here, on the transition, not on the timer
      if (doc.to !== "pending-activation") chip.readyAt = null;
    }
    this.ticker(id, "transition", doc.at,
      `${doc["source-id"]}: ${doc.from ?? "untracked"} -> ${doc.to} (${doc.reason})`);
  }

  private onDecision(doc: DecisionDoc, id: number | null, nowMs: number): void {
    const panel = this.panel(doc["data-type"]);
    panel.decision = doc;
    if (doc.action === "activate-fallback") {
      if (doc.chosen !== panel.activeSource) {
        panel.changedFrom = panel.activeSource;
        panel.changedAt = nowMs;
      }
      panel.activeSource = doc.chosen;
      panel.alarm = false;
    } else if (doc.action === "alarm") {
      panel.changedFrom = panel.activeSource;
      panel.changedAt = nowMs;
      panel.activeSource = null;
      panel.alarm = true;
    }
    this.ticker(id, "decision", doc["decided-at"],
      `decision ${doc.action}: ${doc.chosen ?? "none"} (${doc.rationale})`);
  }

  private onAlarm(doc: DecisionDoc, id: number | null): void {
    this.panel(doc["data-type"]).alarm = true;
    this.ticker(id, "alarm", doc["decided-at"],
      `ALARM ${doc["data-type"]}: ${doc.rationale}`);
  }

  private onMatrixUpdated(doc: MatrixUpdatedDoc, id: number | null): void {
    this.state.packDigest = doc.digest;
    this.ticker(id, "matrix-updated", doc["prepared-at"],
      `assessment matrices rebuilt (${doc.digest})`);
  }

  // -- operator bookkeeping ----------------------------------------------------

  notePendingActivation(sourceId: string, readyAt: number): void {
    for (const panel of Object.values(this.state.panels)) {
      const chip = panel.sources.find((c) => c.sourceId === sourceId);
      if (chip) {
        chip.readyAt = readyAt;
        chip.state = "pending-activation";
      }
    }
    this.emit();
  }

  ackChange(dataType: string): void {
    const panel = this.panel(dataType);
    panel.changedAt = null;
    panel.changedFrom = null;
    this.emit();
  }

  setWeightError(message: string | null): void {
    this.state.weightError = message;
    this.emit();
  }

  setCommandError(message: string | null): void {
    this.state.commandError = message;
    this.emit();
  }

  // -- internals ---------------------------------------------------------------

  private panel(dataType: string): PanelState {
    let panel = this.state.panels[dataType];
    if (!panel) {
      panel = {
        dataType,
        standard: null,
        activeSource: null,
        alarm: false,
        changedAt: null,
        changedFrom: null,
        decision: null,
        sources: [],
      };
      this.state.panels[dataType] = panel;
    }
    return panel;
  }

  private ticker(id: number | null, kind: string, at: number, text: string): void {
    this.state.ticker.unshift({ id: id ?? 0, kind, at, text });
    if (this.state.ticker.length > TICKER_LIMIT) {
      this.state.ticker.length = TICKER_LIMIT;
    }
  }
}
