/** SSE consumption over fetch streams.

One connection feeds the whole dashboard. On any drop the feed reports
degraded, retries with exponential backoff, and resumes from the last
event id it saw, so the service's ring buffer replays what was missed. */

export interface FeedEvent {
  id: number | null;
  event: string;
  data: unknown;
}

/** Incremental parser for the service's `id:`/`event:`/`data:` frames. */
export class SseParser {
  private buffer = "";
  private id: number | null = null;
  private eventName = "";
  private dataLines: string[] = [];

  feed(chunk: string): FeedEvent[] {
    this.buffer += chunk;
    const events: FeedEvent[] = [];
    let index: number;
    while ((index = this.buffer.indexOf("\n")) >= 0) {
      const line = this.buffer.slice(0, index).replace(/\r$/, "");
      this.buffer = this.buffer.slice(index + 1);
      const done = this.line(line);
      if (done) events.push(done);
    }
    return events;
  }

  private line(line: string): FeedEvent | null {
    if (line === "") return this.dispatch();
    if (line.startsWith(":")) return null; // keepalive comment
    const colon = line.indexOf(":");
    const field = colon < 0 ? line : line.slice(0, colon);
    let value = colon < 0 ? "" : line.slice(colon + 1);
    if (value.startsWith(" ")) value = value.slice(1);
    if (field === "id") this.id = Number.parseInt(value, 10);
    else if (field === "event") this.eventName = value;
    else if (field === "data") this.dataLines.push(value);
    return null;
  }

  private dispatch(): FeedEvent | null {
    if (this.dataLines.length === 0 && this.eventName === "") {
      this.id = null;
      return null;
    }
    const raw = this.dataLines.join("\n");
    let data: unknown = raw;
    try {
      data = JSON.parse(raw);
    } catch {
      // leave non-JSON payloads as the raw string
    }
    const event: FeedEvent = { id: this.id, event: this.eventName, data };
    this.id = null;
    this.eventName = "";
    this.dataLines = [];
    return event;
  }
}

export type FeedStatus = "connecting" | "live" | "degraded";

export interface FeedOptions {
  url: (since: number) => string;
  onEvent: (event: FeedEvent) => void;
  onStatus?: (status: FeedStatus, attempt: number) => void;
  fetchImpl?: typeof fetch;
  minBackoffMs?: number;
  maxBackoffMs?: number;
}

export class EventFeed {
  lastId = 0;
  private stopped = false;
  private controller: AbortController | null = null;
  private attempt = 0;
  private readonly fetchImpl: typeof fetch;
  private readonly minBackoffMs: number;
  private readonly maxBackoffMs: number;

  constructor(private readonly options: FeedOptions) {
    this.fetchImpl = options.fetchImpl ?? fetch;
    this.minBackoffMs = options.minBackoffMs ?? 500;
    this.maxBackoffMs = options.maxBackoffMs ?? 8000;
  }

  start(sinceId = 0): void {
    this.lastId = sinceId;
    void this.loop();
  }

  stop(): void {
    this.stopped = true;
    this.controller?.abort();
  }

  private status(status: FeedStatus): void {
    this.options.onStatus?.(status, this.attempt);
  }

  private async loop(): Promise<void> {
    while (!this.stopped) {
      try {
        await this.consume();
      } catch {
        // fall through to the retry path below
      }
      if (this.stopped) break;
      this.status("degraded");
      const wait = Math.min(
        this.maxBackoffMs,
        this.minBackoffMs * 2 ** Math.min(this.attempt, 10),
      );
      this.attempt += 1;
      await new Promise((resolve) => setTimeout(resolve, wait));
    }
  }

  private async consume(): Promise<void> {
    this.status("connecting");
    this.controller = new AbortController();
    const response = await this.fetchImpl(this.options.url(this.lastId), {
      signal: this.controller.signal,
    });
    if (!response.ok || response.body === null) {
      throw new Error(`stream rejected: ${response.status}`);
    }
    this.status("live");
    this.attempt = 0;
    const parser = new SseParser();
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      for (const event of parser.feed(decoder.decode(value, { stream: true }))) {
        // the resume replay can overlap what we already processed
        if (event.id !== null && event.id <= this.lastId) continue;
        if (event.id !== null) this.lastId = event.id;
        this.options.onEvent(event);
      }
    }
  }
}
