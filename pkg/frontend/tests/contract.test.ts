/**
 * Contract tests against the real review service.
 *
 * A corpus is ingested and served by the actual Python backend in a child
 * process; the app is mounted into a happy-dom window and driven the way a
 * reviewer would drive it, through keyboard events and button clicks. No
 * endpoint is mocked, so these tests pin the wire format both sides agree on.
 */

import { afterAll, beforeAll, expect, it } from "vitest";
import { ChildProcess, execFileSync, spawn } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { Window } from "happy-dom";

import { ApiClient } from "../src/api.js";
import { App } from "../src/app.js";

let child: ChildProcess;
let api: ApiClient;
let workDir: string;

function risRecord(i: number): string {
  return [
    "TY  - JOUR",
    `AU  - Author${i}, A.`,
    `TI  - Community structure paper ${i}`,
    `PY  - ${2002 + (i % 6)}`,
    "JO  - Journal of Networks",
    `AB  - Study ${i} of overlapping communities in large graphs.`,
    "KW  - graphs",
    "ER  - ",
  ].join("\n");
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "review-ui-"));
  const ris = join(workDir, "refs.ris");
  const records = Array.from({ length: 30 }, (_, i) => risRecord(i));
  writeFileSync(ris, records.join("\n\n") + "\n");
  const corpus = join(workDir, "corpus.json");
  execFileSync("python3", [
    "-m", "bibmap.cli", "ingest", ris, "--source", "scopus", "--out", corpus,
  ]);

  child = spawn("python3", [
    "-u", "-m", "bibmap.cli", "session", "serve",
    "--corpus", corpus, "--store", join(workDir, "store"), "--port", "0",
  ]);
  const base = await new Promise<string>((resolve, reject) => {
    let out = "";
    const deadline = setTimeout(
      () => reject(new Error(`service did not start: ${out}`)), 20000);
    child.stdout!.on("data", (chunk) => {
      out += String(chunk);
      const m = out.match(/http:\/\/([\d.]+):(\d+)\//);
      if (m) {
        clearTimeout(deadline);
        resolve(`http://${m[1]}:${m[2]}`);
      }
    });
    child.stderr!.on("data", (chunk) => {
      out += String(chunk);
    });
    child.on("exit", (code) => {
      clearTimeout(deadline);
      reject(new Error(`service exited early (${code}): ${out}`));
    });
  });
  api = new ApiClient(base);
}, 30000);

afterAll(() => {
  child?.kill();
  if (workDir) rmSync(workDir, { recursive: true, force: true });
});

// -- DOM harness ------------------------------------------------------------

interface Harness {
  win: InstanceType<typeof Window>;
  root: HTMLElement;
  app: App;
}

function mount(): Harness {
  const win = new Window();
  const doc = win.document as unknown as Document;
  const root = doc.createElement("div") as HTMLElement;
  doc.body.appendChild(root);
  const app = new App(root, api);
  return { win, root, app };
}

function $(h: Harness, selector: string): HTMLElement | null {
  return h.root.querySelector(selector);
}

async function until(check: () => boolean, what: string, ms = 8000): Promise<void> {
  const start = Date.now();
  while (!check()) {
    if (Date.now() - start > ms) throw new Error(`timed out waiting for ${what}`);
    await new Promise((r) => setTimeout(r, 15));
  }
}

function press(h: Harness, key: string, target?: HTMLElement): void {
  const ev = new h.win.KeyboardEvent("keydown", { key, bubbles: true });
  const node = (target ?? h.win.document) as unknown as EventTarget;
  node.dispatchEvent(ev as unknown as Event);
}

function currentRefId(h: Harness): string | null {
  const card = $(h, "#card");
  return card ? card.dataset["refId"] ?? null : null;
}

async function waitPastCard(h: Harness, before: string | null): Promise<void> {
  await until(() => {
    if ($(h, "#completion-banner")) return true;
    const id = currentRefId(h);
    return id !== null && id !== before;
  }, "next card or completion banner");
}

async function relatedVerdict(h: Harness): Promise<void> {
  const before = currentRefId(h);
  press(h, "r");
  await waitPastCard(h, before);
}

async function fpVerdict(h: Harness, keywords: string): Promise<void> {
  const before = currentRefId(h);
  press(h, "f");
  await until(() => $(h, "#fp-input") !== null, "keyword entry");
  const input = $(h, "#fp-input") as HTMLInputElement;
  input.value = keywords;
  press(h, "Enter", input);
  await waitPastCard(h, before);
}

// -- the scripted screening run ----------------------------------------------

it("runs the scripted 13-verdict sequence to the completion banner", async () => {
  const view = await api.createSession("keywording", 4001);
  const h = mount();
  await h.app.boot(view.session_id);
  await until(() => $(h, "#card") !== null, "first card");

  await relatedVerdict(h);
  await relatedVerdict(h);
  await fpVerdict(h, "marine, ecosystem");
  for (let i = 0; i < 10; i++) await relatedVerdict(h);

  await until(() => $(h, "#completion-banner") !== null, "completion banner");
  const chips = [...h.root.querySelectorAll(".pool-chip")].map((n) => n.textContent);
  expect(chips).toEqual(["marine", "ecosystem"]);
  expect($(h, ".summary")!.textContent).toContain(
    "13 judged: 12 related, 1 false positive(s)");

  // the banner appeared because the server said complete, not a local count
  const after = await api.session(view.session_id);
  expect(after.state).toBe("complete");
  expect(after.judged).toBe(13);
  expect(after.clean_streak).toBe(10);
  expect(after.pool).toEqual(["marine", "ecosystem"]);
  h.app.dispose();
}, 30000);

it("preserves all verdicts across a page refresh", async () => {
  const view = await api.createSession("keywording", 4002);
  const h1 = mount();
  await h1.app.boot(view.session_id);
  await until(() => $(h1, "#card") !== null, "first card");
  await relatedVerdict(h1);
  await fpVerdict(h1, "protein folding");
  await relatedVerdict(h1);
  h1.app.dispose();

  // a refresh is a fresh window booting with the same session id
  const h2 = mount();
  await h2.app.boot(view.session_id);
  await until(() => $(h2, "#card") !== null, "card after refresh");

  const items = [...h2.root.querySelectorAll(".history-item")].map((n) => n.textContent);
  expect(items).toHaveLength(3);
  expect(items.filter((t) => t!.includes("false-positive [protein folding]"))).toHaveLength(1);
  const chips = [...h2.root.querySelectorAll(".pool-chip")].map((n) => n.textContent);
  expect(chips).toEqual(["protein folding"]);

  const server = await api.session(view.session_id);
  expect(server.judged).toBe(3);
  expect($(h2, ".progress-text")!.textContent).toBe(
    `clean streak ${server.clean_streak} of ${server.streak_target}`);

  // the refreshed view is live, not a replay
  await relatedVerdict(h2);
  expect((await api.session(view.session_id)).judged).toBe(4);
  h2.app.dispose();
}, 30000);

it("blocks a false positive that has no keywords", async () => {
  const view = await api.createSession("keywording", 4003);
  const h = mount();
  await h.app.boot(view.session_id);
  await until(() => $(h, "#card") !== null, "card");

  press(h, "f");
  await until(() => $(h, "#fp-input") !== null, "keyword entry");
  const input = $(h, "#fp-input") as HTMLInputElement;
  input.value = "   ";
  press(h, "Enter", input);
  await until(() => ($(h, "#fp-error")?.textContent ?? "") !== "", "inline message");
  expect($(h, "#fp-input")).not.toBeNull();
  expect((await api.session(view.session_id)).judged).toBe(0);

  input.value = "cell biology";
  press(h, "Enter", input);
  await until(() => h.root.querySelectorAll(".history-item").length === 1, "recorded verdict");
  expect((await api.session(view.session_id)).pool).toEqual(["cell biology"]);
  h.app.dispose();
}, 30000);

it("names the unknown session id in the error view", async () => {
  const h = mount();
  await h.app.boot("no-such-session");
  await until(() => $(h, "#error-view") !== null, "error view");
  expect($(h, "#error-view")!.textContent).toContain("no-such-session");
  h.app.dispose();
});

it("keeps the verdict across a transport failure and reposts on retry", async () => {
  const view = await api.createSession("keywording", 4004);
  const h = mount();
  await h.app.boot(view.session_id);
  await until(() => $(h, "#card") !== null, "card");

  const realFetch = globalThis.fetch;
  let failures = 0;
  globalThis.fetch = (async (input: RequestInfo | URL, init?: RequestInit) => {
    if (String(input).includes("/verdicts")) {
      failures += 1;
      globalThis.fetch = realFetch;
      throw new TypeError("socket hung up (simulated)");
    }
    return realFetch(input, init);
  }) as typeof fetch;

  try {
    press(h, "r");
    await until(() => $(h, "#retry-banner") !== null, "retry banner");
    expect(failures).toBe(1);
    expect((await api.session(view.session_id)).judged).toBe(0);

    ($(h, "#btn-retry") as HTMLButtonElement).click();
    await until(() => h.root.querySelectorAll(".history-item").length === 1,
      "verdict recorded after retry");
    expect((await api.session(view.session_id)).judged).toBe(1);
  } finally {
    globalThis.fetch = realFetch;
  }
  h.app.dispose();
}, 30000);

it("turns read only when another window recorded a conflicting verdict", async () => {
  const view = await api.createSession("keywording", 4005);
  const h = mount();
  await h.app.boot(view.session_id);
  await until(() => $(h, "#card") !== null, "card");
  const refId = currentRefId(h)!;

  // the other window strikes first with a different judgment
  await api.submitVerdict(view.session_id, refId, "false-positive", ["stolen"]);

  press(h, "r");
  await until(() => $(h, "#readonly-banner") !== null, "read-only banner");
  const items = [...h.root.querySelectorAll(".history-item")].map((n) => n.textContent);
  expect(items).toEqual([`${refId}: false-positive [stolen]`]);
  h.app.dispose();
}, 30000);

it("previews query hit counts on the start view", async () => {
  const h = mount();
  await h.app.boot(null);
  await until(() => $(h, "#preview-query") !== null, "start view");

  const input = $(h, "#preview-query") as HTMLInputElement;
  input.value = "communit*";
  ($(h, "#preview-run") as HTMLButtonElement).click();
  await until(() => ($(h, "#preview-result")?.textContent ?? "") !== "", "preview count");
  expect($(h, "#preview-result")!.textContent).toBe("30 matching reference(s)");

  // bare adjacency is a syntax error in the query grammar
  input.value = "overlapping communit*";
  ($(h, "#preview-run") as HTMLButtonElement).click();
  await until(() => ($(h, "#preview-result")!.textContent ?? "").includes("syntax"),
    "syntax message");
  expect($(h, "#preview-result")!.textContent).toMatch(/syntax error at position \d+/);
  h.app.dispose();
}, 30000);
