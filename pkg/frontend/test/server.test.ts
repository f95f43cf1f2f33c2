// End-to-end checks over a real child process. Requires a prior
// `npm run build`; the suite fails fast with a clear message otherwise.

import { ChildProcess, spawn } from "node:child_process";
import { existsSync } from "node:fs";
import { createInterface, Interface } from "node:readline";
import { fileURLToPath } from "node:url";
import { afterEach, beforeAll, describe, expect, it } from "vitest";

const SERVER = fileURLToPath(new URL("../dist/server.js", import.meta.url));
const CHECKPOINT = fileURLToPath(new URL("../fixtures/tiny_checkpoint.json", import.meta.url));

interface Session {
  proc: ChildProcess;
  lines: Interface;
  pending: string[];
  waiters: ((line: string) => void)[];
}

let session: Session | null = null;

function start(...extra: string[]): Session {
  const proc = spawn("node", [SERVER, "--model", CHECKPOINT, ...extra], {
    stdio: ["pipe", "pipe", "inherit"],
  });
  const lines = createInterface({ input: proc.stdout! });
  const s: Session = { proc, lines, pending: [], waiters: [] };
  lines.on("line", (line) => {
    const waiter = s.waiters.shift();
    if (waiter) waiter(line);
    else s.pending.push(line);
  });
  session = s;
  return s;
}

function nextLine(s: Session, timeoutMs = 5000): Promise<string> {
  const queued = s.pending.shift();
  if (queued !== undefined) return Promise.resolve(queued);
  return new Promise((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error("no reply within timeout")), timeoutMs);
    s.waiters.push((line) => {
      clearTimeout(timer);
      resolve(line);
    });
  });
}

async function roundTrip(s: Session, raw: string): Promise<any> {
  s.proc.stdin!.write(raw + "\n");
  return JSON.parse(await nextLine(s));
}

function request(kind: string, id: number, payload: unknown): string {
  return JSON.stringify({ kind, id, payload });
}

async function handshake(s: Session): Promise<any> {
  return roundTrip(s, request("HELLO", 1, { protocol_version: 1 }));
}

beforeAll(() => {
  if (!existsSync(SERVER)) {
    throw new Error("dist/server.js missing: run `npm run build` before the tests");
  }
});

afterEach(() => {
  if (session) {
    session.proc.kill();
    session = null;
  }
});

describe("server process", () => {
  it("performs the handshake with model info", async () => {
    const s = start();
    const reply = await handshake(s);
    expect(reply.kind).toBe("HELLO_ACK");
    expect(reply.id).toBe(1);
    expect(reply.payload.protocol_version).toBe(1);
    expect(reply.payload.modality).toBe("sequence");
    expect(reply.payload.classes.length).toBe(5);
    expect(reply.payload.supports_generation).toBe(true);
  });

  it("rejects requests before the handshake", async () => {
    const s = start();
    const reply = await roundTrip(s, request("PREDICT", 1, { inputs: ["ACGT"] }));
    expect(reply.kind).toBe("ERROR");
    expect(reply.id).toBe(1);
    expect(reply.payload.message).toContain("handshake");
  });

  it("predicts probability rows", async () => {
    const s = start();
    await handshake(s);
    const reply = await roundTrip(s, request("PREDICT", 2, { inputs: ["ACGTACGT", "GGGGCCCC"] }));
    expect(reply.kind).toBe("PREDICT_ACK");
    expect(reply.id).toBe(2);
    const probs: number[][] = reply.payload.probs;
    expect(probs.length).toBe(2);
    for (const row of probs) {
      expect(Math.abs(row.reduce((a, b) => a + b, 0) - 1)).toBeLessThan(1e-9);
    }
  });

  it("answers ERROR id 0 for an unparseable line", async () => {
    const s = start();
    const reply = await roundTrip(s, "}{ garbage");
    expect(reply.kind).toBe("ERROR");
    expect(reply.id).toBe(0);
  });

  it("echoes the id on bad payloads and unknown kinds", async () => {
    const s = start();
    await handshake(s);
    const bad = await roundTrip(s, request("PREDICT", 5, { inputs: [] }));
    expect([bad.kind, bad.id]).toEqual(["ERROR", 5]);
    const unknown = await roundTrip(s, request("NONSENSE", 6, {}));
    expect([unknown.kind, unknown.id]).toEqual(["ERROR", 6]);
  });

  it("rejects an unsupported protocol version", async () => {
    const s = start();
    const reply = await roundTrip(s, request("HELLO", 1, { protocol_version: 2 }));
    expect(reply.kind).toBe("ERROR");
    expect(reply.payload.message).toContain("version");
  });

  it("generates the asked number of deterministic samples", async () => {
    const s = start();
    await handshake(s);
    const a = await roundTrip(s, request("GENERATE", 2, { prompt: "p", n: 3 }));
    const b = await roundTrip(s, request("GENERATE", 3, { prompt: "p", n: 3 }));
    expect(a.kind).toBe("GENERATE_ACK");
    expect(a.payload.samples.length).toBe(3);
    expect(a.payload.samples).toEqual(b.payload.samples);
    for (const sample of a.payload.samples) {
      expect(sample).toMatch(/^[ACGT]{120}$/);
    }
  });

  it("exits cleanly when stdin closes", async () => {
    const s = start();
    await handshake(s);
    const exited = new Promise<number | null>((resolve) => s.proc.on("exit", resolve));
    s.proc.stdin!.end();
    expect(await exited).toBe(0);
  });
});
