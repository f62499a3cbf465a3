/** App wiring: one client, one store, one SSE feed, one render loop.

Startup order matters. The latest event id is read first, then the
snapshots, then the feed resumes from that id: anything that happened
after the id is replayed on top of the snapshot, so nothing falls into
the gap between GET and stream. Snapshot loads never raise the change
indicator; only live decision events do. */

import { ApiError, ServiceClient } from "./api.js";
import { ConsoleStore, weightInputError } from "./state.js";
import { EventFeed, type FeedEvent } from "./sse.js";
import { render, type Actions } from "./ui.js";

export interface AppConfig {
  endpoint: string;
  token?: string;
}

/** Config comes from the URL alone: ?api=...&token=... */
export function configFromLocation(location: Location): AppConfig {
  const params = new URLSearchParams(location.search);
  const config: AppConfig = {
    endpoint: params.get("api") ?? location.origin,
  };
  const token = params.get("token");
  if (token !== null) config.token = token;
  return config;
}

export interface AppOptions {
  root: HTMLElement;
  client: ServiceClient;
  fetchImpl?: typeof fetch;
  nowMs?: () => number;
  /** re-render period for countdown chips; 0 disables the timer */
  tickMs?: number;
}

export class App {
  readonly store = new ConsoleStore();
  readonly actions: Actions;
  readonly feed: EventFeed;
  private readonly client: ServiceClient;
  private readonly root: HTMLElement;
  private readonly nowMs: () => number;
  private readonly tickMs: number;
  private readonly busy = new Set<string>();
  private timer: ReturnType<typeof setInterval> | null = null;
  private wasDegraded = false;
  private dataTypes: string[] = [];

  constructor(options: AppOptions) {
    this.root = options.root;
    this.client = options.client;
    this.nowMs = options.nowMs ?? Date.now;
    this.tickMs = options.tickMs ?? 500;
    this.feed = new EventFeed({
      url: (since) => this.client.eventsUrl(since),
      ...(options.fetchImpl ? { fetchImpl: options.fetchImpl } : {}),
      onEvent: (event) => this.onEvent(event),
      onStatus: (status, attempt) => {
        if (status === "degraded") this.wasDegraded = true;
        if (status === "live" && this.wasDegraded) {
          this.wasDegraded = false;
          void this.resync();
        }
        this.store.setConnection(status, attempt);
      },
    });
    this.actions = {
      submitWeights: (values) => void this.submitWeights(values),
      preActivate: (sourceId) => void this.preActivate(sourceId),
      forceSwitch: (dataType, sourceId) => void this.forceSwitch(dataType, sourceId),
      ackChange: (dataType) => this.store.ackChange(dataType),
      isBusy: (key) => this.busy.has(key),
    };
    this.store.subscribe(() => this.renderNow());
  }

  async start(): Promise<void> {
    const health = await this.client.health();
    this.dataTypes = health["data-types"];
    this.store.setPackDigest(health["pack-digest"]);
    this.store.loadRegistry(await this.client.registryDoc());
    await this.resync();
    this.feed.start(health["latest-event-id"]);
    if (this.tickMs > 0) {
      this.timer = setInterval(() => this.renderNow(), this.tickMs);
    }
  }

  stop(): void {
    this.feed.stop();
    if (this.timer !== null) clearInterval(this.timer);
  }

  renderNow(): void {
    render(this.root, this.store.state, this.actions, this.nowMs());
  }

  /** Snapshot refresh; also runs after every reconnect. */
  private async resync(): Promise<void> {
    const [statuses, active, decisions] = await Promise.all([
      this.client.statuses(),
      this.client.active(),
      this.client.decisions(this.store.state.lastDecisionSeq),
    ]);
    this.store.loadStatuses(statuses.statuses);
    this.store.loadActive(active);
    this.store.loadDecisions(decisions);
    await this.refreshMatrices();
  }

  private async refreshMatrices(): Promise<void> {
    for (const dataType of this.dataTypes) {
      const payload = await this.client.matrix(dataType);
      this.store.loadMatrix(dataType, payload.matrix);
    }
  }

  private onEvent(event: FeedEvent): void {
    this.store.applyEvent(event, this.nowMs());
    if (event.event === "matrix-updated") {
      void this.refreshMatrices();
    }
    if (event.event === "transition") {
      const doc = event.data as { to?: string };
      // service-initiated pre-activations carry no ready-at; fetch it
      if (doc.to === "pending-activation") {
        void this.client
          .statuses()
          .then((payload) => this.store.loadStatuses(payload.statuses))
          .catch(() => undefined);
      }
    }
  }

  private async submitWeights(values: Record<string, number>): Promise<void> {
    for (const [attribute, value] of Object.entries(values)) {
      const problem = weightInputError(attribute, value);
      if (problem !== null) {
        this.store.setWeightError(problem); // invalid input: no request leaves
        return;
      }
    }
    await this.guard("weights", async () => {
      this.store.setWeightError(null);
      await this.client.setWeights(values);
    }, (message) => this.store.setWeightError(message));
  }

  private async preActivate(sourceId: string): Promise<void> {
    await this.guard(`pre-activate:${sourceId}`, async () => {
      const ack = await this.client.preActivate(sourceId);
      this.store.notePendingActivation(ack["source-id"], ack["ready-at"]);
    });
  }

  private async forceSwitch(dataType: string, sourceId: string): Promise<void> {
    await this.guard(`force-switch:${sourceId}`, async () => {
      await this.client.forceSwitch(dataType, sourceId);
    });
  }

  /** Serializes a command; a second click while in flight is a no-op. */
  private async guard(
    key: string,
    body: () => Promise<void>,
    onError?: (message: string) => void,
  ): Promise<void> {
    if (this.busy.has(key)) return;
    this.busy.add(key);
    this.store.setCommandError(null);
    this.store.emit();
    try {
      await body();
    } catch (error) {
      const message = error instanceof ApiError ? error.message : String(error);
      if (onError) onError(message);
      else this.store.setCommandError(message);
    } finally {
      this.busy.delete(key);
      this.store.emit();
    }
  }
}

export function startFromLocation(window: Window): App {
  const config = configFromLocation(window.location);
  const root = window.document.getElementById("app");
  if (root === null) throw new Error("missing #app container");
  const client = new ServiceClient(config);
  const app = new App({ root: root as HTMLElement, client });
  void app.start();
  return app;
}
