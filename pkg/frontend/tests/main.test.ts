import { Window } from "happy-dom";
import { describe, expect, it, vi } from "vitest";

import type { ServiceClient } from "../src/api.js";
import { App, configFromLocation } from "../src/main.js";
import type { MatrixDoc } from "../src/types.js";

const MATRIX: MatrixDoc = {
  "data-type": "traffic",
  "registry-version": "v1",
  "created-at": 0,
  weights: { delay: 1 },
  "feature-attributes": ["delay"],
  "vulnerability-attributes": [],
  sources: ["traffic-sensors"],
  pairs: [],
};

function makeRoot(): HTMLElement {
  const window = new Window();
  const root = window.document.createElement("div");
  window.document.body.appendChild(root);
  return root as unknown as HTMLElement;
}

/** Stub of the ServiceClient surface the App touches; no network. */
function stubClient(overrides: Partial<Record<string, unknown>> = {}): ServiceClient {
  const never = new Promise<Response>(() => undefined); // keeps the feed quiet
  return {
    endpoint: "http://svc",
    eventsUrl: (since: number) => `http://svc/events?since=${since}`,
    health: vi.fn(async () => ({
      status: "ok",
      version: "0.1.0",
      "registry-version": "v1",
      "pack-digest": "d1",
      "data-types": ["traffic"],
      "latest-event-id": 0,
      time: 0,
    })),
    registryDoc: vi.fn(async () => ({
      version: "v1",
      registry: {
        weights: { delay: 1 },
        sources: [
          {
            "source-id": "traffic-sensors",
            "data-type": "traffic",
            standard: true,
            "attribute-values": {},
          },
        ],
      },
    })),
    statuses: vi.fn(async () => ({
      statuses: {
        "traffic-sensors": {
          state: "active",
          since: 0,
          "ready-at": null,
          "last-seen": 0,
          "staleness-horizon": 3,
        },
      },
    })),
    active: vi.fn(async () => ({
      traffic: {
        "source-id": "traffic-sensors",
        alarm: false,
        standard: "traffic-sensors",
        state: "active",
        "ready-at": null,
      },
    })),
    decisions: vi.fn(async () => ({ decisions: [], "latest-seq": 0 })),
    matrix: vi.fn(async () => ({ digest: "m1", matrix: MATRIX, table: [] })),
    setWeights: vi.fn(async () => ({ "pack-digest": "d2", matrices: {}, weights: {} })),
    preActivate: vi.fn(
      async () => new Promise((resolve) =>
        setTimeout(() => resolve({ "source-id": "traffic-sensors", "ready-at": 99 }), 20),
      ),
    ),
    forceSwitch: vi.fn(async () => ({})),
    fetchForFeed: never,
    ...overrides,
  } as unknown as ServiceClient;
}

function quietFetch(): typeof fetch {
  // a stream that stays open and silent, standing in for /events
  return (async () =>
    new Response(new ReadableStream<Uint8Array>({ start: () => undefined }), {
      status: 200,
    })) as unknown as typeof fetch;
}

describe("configFromLocation", () => {
  it("reads endpoint and token from the query string", () => {
    const config = configFromLocation({
      search: "?api=http://svc:8787&token=abc",
      origin: "http://console",
    } as Location);
    expect(config).toEqual({ endpoint: "http://svc:8787", token: "abc" });
  });

  it("falls back to the page origin with no token", () => {
    const config = configFromLocation({ search: "", origin: "http://console" } as Location);
    expect(config).toEqual({ endpoint: "http://console" });
  });
});

describe("App", () => {
  it("boots from snapshots and renders the designation", async () => {
    const client = stubClient();
    const root = makeRoot();
    const app = new App({ root, client, fetchImpl: quietFetch(), tickMs: 0 });
    await app.start();
    app.stop();
    expect(root.querySelector("[data-active-source]")?.getAttribute("data-active-source"))
      .toBe("traffic-sensors");
    expect(root.querySelector('[data-chip="traffic-sensors"]')?.textContent)
      .toContain("active");
  });

  it("refuses a negative weight locally: inline error, no request", async () => {
    const client = stubClient();
    const root = makeRoot();
    const app = new App({ root, client, fetchImpl: quietFetch(), tickMs: 0 });
    await app.start();
    const input = root.querySelector<HTMLInputElement>('[data-weight="delay"]');
    input!.value = "-1";
    (root.querySelector("[data-apply-weights]") as HTMLButtonElement).click();
    await vi.waitFor(() => {
      expect(root.querySelector("[data-weight-error]")).not.toBeNull();
    });
    expect(client.setWeights).not.toHaveBeenCalled();
    app.stop();
  });

  it("sends a valid weight change and clears the inline error", async () => {
    const client = stubClient();
    const root = makeRoot();
    const app = new App({ root, client, fetchImpl: quietFetch(), tickMs: 0 });
    await app.start();
    const input = root.querySelector<HTMLInputElement>('[data-weight="delay"]');
    input!.value = "3";
    (root.querySelector("[data-apply-weights]") as HTMLButtonElement).click();
    await vi.waitFor(() => {
      expect(client.setWeights).toHaveBeenCalledWith({ delay: 3 });
    });
    expect(root.querySelector("[data-weight-error]")).toBeNull();
    app.stop();
  });

  it("ignores a second click while a command is in flight", async () => {
    const client = stubClient();
    const root = makeRoot();
    const app = new App({ root, client, fetchImpl: quietFetch(), tickMs: 0 });
    await app.start();
    app.actions.preActivate("traffic-sensors");
    app.actions.preActivate("traffic-sensors");
    await vi.waitFor(() => {
      expect(app.store.state.panels["traffic"]?.sources[0]?.readyAt).toBe(99);
    });
    expect(client.preActivate).toHaveBeenCalledTimes(1);
    app.stop();
  });

  it("surfaces a rejected command without crashing the app", async () => {
    const client = stubClient({
      forceSwitch: vi.fn(async () => {
        throw new Error("source not available: traffic-sensors is failed");
      }),
    });
    const root = makeRoot();
    const app = new App({ root, client, fetchImpl: quietFetch(), tickMs: 0 });
    await app.start();
    app.actions.forceSwitch("traffic", "traffic-sensors");
    await vi.waitFor(() => {
      expect(root.querySelector("[data-command-error]")?.textContent)
        .toContain("not available");
    });
    app.stop();
  });
});
