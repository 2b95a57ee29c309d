/**
 * Thin-client property: every console mutation is exactly the expected
 * sequence of broker API calls, nothing hidden and no local computation.
 * Uses a stubbed fetch recording the network trace.
 */

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { BrokerClient } from "../src/api.js";
import { markKnown, submitEnrollment } from "../src/enroll.js";
import { UploadDraft } from "../src/state.js";

interface TraceEntry {
  method: string;
  path: string;
}

let trace: TraceEntry[];

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

beforeEach(() => {
  trace = [];
  vi.stubGlobal(
    "fetch",
    vi.fn(async (input: RequestInfo | URL, init?: RequestInit) => {
      const url = new URL(String(input));
      const method = init?.method ?? "GET";
      trace.push({ method, path: url.pathname });
      if (url.pathname.startsWith("/storage/") && method === "POST") {
        const [, , folder, name] = url.pathname.split("/");
        return jsonResponse({ url: `storage://${folder}/${name}` }, 201);
      }
      if (url.pathname.startsWith("/storage/") && method === "GET") {
        const segments = url.pathname.split("/").filter(Boolean);
        if (segments.length === 2) {
          // folder listing: pretend "dana" does not exist yet
          return segments[1] === "dana"
            ? jsonResponse({ error: "no folder" }, 404)
            : jsonResponse({ objects: ["x.pgm"] });
        }
        return new Response(new Uint8Array([80, 53]), { status: 200 });
      }
      if (url.pathname.startsWith("/db/") && method === "POST") {
        return jsonResponse({ push_id: "-Test00000000000000a", committed_at: "t" });
      }
      return jsonResponse({ error: "unexpected call" }, 500);
    }),
  );
});

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("console network trace", () => {
  it("enrollment is n storage puts plus one record push, in order", async () => {
    const client = new BrokerClient("http://broker.test", "token");
    const draft = new UploadDraft();
    draft.name = "kim";
    for (const name of ["a.pgm", "b.pgm", "c.pgm"]) {
      draft.addImage({ name, data: new Uint8Array([1, 2]) });
    }
    const result = await submitEnrollment(client, draft);
    expect(result.failed).toBe(0);
    expect(trace).toEqual([
      { method: "POST", path: "/storage/kim/a.pgm" },
      { method: "POST", path: "/storage/kim/b.pgm" },
      { method: "POST", path: "/storage/kim/c.pgm" },
      { method: "POST", path: "/db/Enrollments" },
    ]);
  });

  it("mark-known is fetch, existence check, one put, one push", async () => {
    const client = new BrokerClient("http://broker.test", "token");
    const result = await markKnown(
      client,
      {
        push_id: "-Abc",
        imageUrl: "storage://intrusions/frame.pgm",
        timestamp: "2026-03-01T08:10:00.000000Z",
      },
      "dana",
    );
    expect(result.failed).toBe(0);
    expect(trace).toEqual([
      { method: "GET", path: "/storage/intrusions/frame.pgm" },
      { method: "GET", path: "/storage/dana" },
      { method: "POST", path: "/storage/dana/intrusion--Abc.pgm" },
      { method: "POST", path: "/db/Enrollments" },
    ]);
  });
});
