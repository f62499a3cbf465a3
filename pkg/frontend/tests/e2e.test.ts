/** End-to-end: the console against a live service playing out a flood.
 *
 * A real service process runs on a scratch store while a feeder posts
 * observations. The standard source is then silenced so the service
 * decides a failover for real; the console must mirror every step
 * without computing anything itself. Activation delays are shortened
 * in the registry variant so pending sources resolve within seconds.
 */

import { spawn, type ChildProcess } from "node:child_process";
import fs from "node:fs";
import net from "node:net";
import os from "node:os";
import path from "node:path";
import { fileURLToPath } from "node:url";

import { Window } from "happy-dom";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ServiceClient } from "../src/api.js";
import { App } from "../src/main.js";
import type { MatrixPayload } from "../src/types.js";

const TOKEN = "console-e2e";
const REPO_ROOT = fileURLToPath(new URL("../..", import.meta.url));

let child: ChildProcess | null = null;
let childErr = "";
let endpoint = "";
let tmpDir = "";
let feeder: ReturnType<typeof setInterval> | null = null;
const feeding = new Set<string>(["traffic-sensors", "floating-car-data"]);
let app: App;
let root: HTMLElement;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const server = net.createServer();
    server.on("error", reject);
    server.listen(0, "127.0.0.1", () => {
      const port = (server.address() as net.AddressInfo).port;
      server.close(() => resolve(port));
    });
  });
}

async function waitFor(
  what: string,
  check: () => boolean | Promise<boolean>,
  timeoutMs = 20_000,
  intervalMs = 25,
): Promise<number> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    if (await check()) return Date.now();
    if (Date.now() > deadline) {
      throw new Error(`timed out waiting for ${what}\nservice stderr:\n${childErr}`);
    }
    await new Promise((resolve) => setTimeout(resolve, intervalMs));
  }
}

function fastRegistry(): string {
  const doc = JSON.parse(
    fs.readFileSync(
      path.join(REPO_ROOT, "src/sourcewatch/data/registry.json"),
      "utf-8",
    ),
  );
  for (const source of doc.sources) {
    if (source["source-id"] === "floating-car-data") {
      source["attribute-values"]["activation-delay"] = "1 sec.";
    }
    if (source["source-id"] === "remote-sensing") {
      source["attribute-values"]["activation-delay"] = "3 sec.";
    }
  }
  const target = path.join(tmpDir, "registry.json");
  fs.writeFileSync(target, JSON.stringify(doc, null, 1));
  return target;
}

async function post(route: string, body: unknown): Promise<Response> {
  return fetch(endpoint + route, {
    method: "POST",
    headers: {
      "Content-Type": "application/json",
      Authorization: `Bearer ${TOKEN}`,
    },
    body: JSON.stringify(body),
  });
}

beforeAll(async () => {
  tmpDir = fs.mkdtempSync(path.join(os.tmpdir(), "console-e2e-"));
  const registryPath = fastRegistry();
  const port = await freePort();
  endpoint = `http://127.0.0.1:${port}`;
  child = spawn(
    "python3",
    [
      "-m", "sourcewatch.cli", "serve",
      "--registry", registryPath,
      "--store", path.join(tmpDir, "store"),
      "--port", String(port),
      "--token", TOKEN,
      "--sweep-interval", "0.25",
    ],
    { cwd: REPO_ROOT, stdio: ["ignore", "ignore", "pipe"] },
  );
  child.stderr?.on("data", (chunk: Buffer) => {
    childErr += chunk.toString();
  });
  await waitFor("service health", async () => {
    try {
      const response = await fetch(`${endpoint}/health`);
      return response.ok;
    } catch {
      return false;
    }
  });

  const values: Record<string, number> = {
    "traffic-sensors": 40,
    "floating-car-data": 38,
    "remote-sensing": 52,
  };
  feeder = setInterval(() => {
    const at = Date.now() / 1000;
    const docs = [...feeding].map((sourceId) => ({
      "source-id": sourceId,
      value: values[sourceId],
      at,
    }));
    if (docs.length > 0) void post("/observations", docs).catch(() => undefined);
  }, 300);

  const window = new Window();
  root = window.document.createElement("div") as unknown as HTMLElement;
  window.document.body.appendChild(root as never);
  const client = new ServiceClient({ endpoint, token: TOKEN });
  app = new App({ root, client, tickMs: 100 });
  await app.start();
});

afterAll(() => {
  if (feeder !== null) clearInterval(feeder);
  app?.stop();
  child?.kill("SIGKILL");
  if (tmpDir) fs.rmSync(tmpDir, { recursive: true, force: true });
});

describe("operator console against a live service", () => {
  it("starts on the standard source with no change indicator", async () => {
    await waitFor("initial designation", () =>
      root.querySelector("[data-active-source]")?.getAttribute("data-active-source") ===
      "traffic-sensors");
    expect(root.querySelector("[data-indicator]")).toBeNull();
    expect(root.querySelector('[data-chip="traffic-sensors"]')?.textContent)
      .toContain("active");
  });

  it("shows the source-change indicator within 1 s of the decision event", async () => {
    feeding.delete("traffic-sensors"); // the flood takes out the sensor network
    const shownAt = await waitFor("change indicator", () =>
      root.querySelector("[data-indicator]") !== null);
    const decision = app.store.state.panels["traffic"]?.decision;
    expect(decision?.action).toBe("activate-fallback");
    expect(decision?.chosen).toBe("floating-car-data");
    expect(shownAt - decision!["decided-at"] * 1000).toBeLessThan(1000);
    expect(root.querySelector("[data-active-source]")?.getAttribute("data-active-source"))
      .toBe("floating-car-data");
    // the fallback finishes its short activation and the chip follows
    await waitFor("fallback active", () =>
      (root.querySelector('[data-chip="floating-car-data"]')?.textContent ?? "")
        .includes("active"));
  });

  it("pre-activates a dormant source and the countdown resolves on the transition", async () => {
    const button = root.querySelector<HTMLButtonElement>(
      '[data-pre-activate="remote-sensing"]',
    );
    expect(button?.disabled).toBe(false);
    button!.click();
    await waitFor("countdown chip", () =>
      root.querySelector('[data-countdown-for="remote-sensing"]') !== null);
    const label = root.querySelector('[data-countdown-for="remote-sensing"]')?.textContent;
    expect(label).toMatch(/ready in 00:0[1-3]/);
    // activation completes when data actually flows after ready-at
    feeding.add("remote-sensing");
    await waitFor("activation transition", () =>
      app.store.state.ticker.some((entry) =>
        entry.text.includes("remote-sensing") &&
        entry.text.includes("activation-complete")));
    await waitFor("countdown resolved", () =>
      root.querySelector('[data-countdown-for="remote-sensing"]') === null);
    expect(root.querySelector('[data-chip="remote-sensing"]')?.textContent)
      .toContain("active");
  });

  it("updates the displayed vulnerability sums to the reweigh values", async () => {
    const input = root.querySelector<HTMLInputElement>(
      '[data-weight="autonomous-operation-time"]',
    );
    expect(input?.value).toBe("1");
    input!.value = "3";
    (root.querySelector("[data-apply-weights]") as HTMLButtonElement).click();
    await waitFor("reweighed matrix in view", () =>
      app.store.state.matrices["traffic"]?.weights["autonomous-operation-time"] === 3);

    const truth = (await (await fetch(
      `${endpoint}/matrix?data_type=traffic`,
    )).json()) as MatrixPayload;
    expect(truth.matrix.weights["autonomous-operation-time"]).toBe(3);
    for (const pair of truth.matrix.pairs) {
      const key = `${pair["source-a"]}|${pair["source-b"]}`;
      const cell = root.querySelector(`[data-vuln-sum="${key}"]`);
      expect(cell, `missing vulnerability cell for ${key}`).not.toBeNull();
      expect(cell?.textContent).toBe(String(pair["vulnerability-sum"]));
    }
  });

  it("records each stream event in the ticker exactly once", () => {
    const ids = app.store.state.ticker.map((entry) => entry.id);
    expect(new Set(ids).size).toBe(ids.length);
  });
});
