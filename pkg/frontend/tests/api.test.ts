import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiError, BrokerClient } from "../src/api.js";
import { canonicalJson } from "../src/canonical.js";
import { BrokerProcess, sleep, startBroker } from "./helpers.js";

let broker: BrokerProcess;

beforeAll(async () => {
  broker = await startBroker();
});

afterAll(async () => {
  await broker.stop();
});

describe("auth", () => {
  it("registers, logs in, and gates endpoints on the token", async () => {
    const client = new BrokerClient(broker.url);
    await expect(client.dbGet("/Users")).rejects.toMatchObject({ status: 401 });

    const uid = await client.register("console@example.com", "password-123", "Console");
    expect(uid).toBeTruthy();
    const token = await client.login("console@example.com", "password-123");
    expect(token).toHaveLength(64);
    expect(await client.dbGet("/Nothing/here")).toBeNull();
  });

  it("does not reveal which credential was wrong", async () => {
    const client = new BrokerClient(broker.url);
    const wrongPassword = client.login("console@example.com", "password-nope").catch((e) => e);
    const unknownEmail = client.login("ghost@example.com", "password-123").catch((e) => e);
    const [a, b] = await Promise.all([wrongPassword, unknownEmail]);
    expect(a).toBeInstanceOf(ApiError);
    expect(b).toBeInstanceOf(ApiError);
    expect((a as ApiError).status).toBe(401);
    expect((a as ApiError).message).toBe((b as ApiError).message);
  });
});

describe("database and storage", () => {
  async function loggedIn(): Promise<BrokerClient> {
    const client = new BrokerClient(broker.url);
    await client.login("console@example.com", "password-123");
    return client;
  }

  it("round trips values canonically", async () => {
    const client = await loggedIn();
    const value = { nested: { b: 2, a: [1, null, "x"] }, n: 1.5 };
    await client.dbSet("/Config/console", value);
    expect(canonicalJson(await client.dbGet("/Config/console"))).toBe(canonicalJson(value));
  });

  it("pushes are ordered and queryable by range", async () => {
    const client = await loggedIn();
    const keys: string[] = [];
    for (const ts of ["2026-01-01T00:00:00.000000Z", "2026-01-02T00:00:00.000000Z"]) {
      keys.push(await client.dbPush("/ConsoleLog", { timestamp: ts }));
    }
    expect([...keys].sort()).toEqual(keys);
    const rows = await client.dbQuery(
      "/ConsoleLog",
      "timestamp",
      "2026-01-01T12:00:00.000000Z",
      "2026-01-03T00:00:00.000000Z",
    );
    expect(rows).toHaveLength(1);
    expect(rows[0]!.value["timestamp"]).toBe("2026-01-02T00:00:00.000000Z");
  });

  it("stores and fetches binary objects by url", async () => {
    const client = await loggedIn();
    const payload = new Uint8Array([80, 53, 10, 49, 32, 49, 10, 50, 53, 53, 10, 42]);
    const url = await client.storagePut("consolepics", "probe.pgm", payload, "image/x-portable-graymap");
    expect(url).toBe("storage://consolepics/probe.pgm");
    expect(await client.storageGetUrl(url)).toEqual(payload);
    expect(await client.storageList("consolepics")).toEqual(["probe.pgm"]);
  });
});

describe("topics", () => {
  it("receives published messages over SSE and reports status", async () => {
    const client = new BrokerClient(broker.url);
    await client.login("console@example.com", "password-123");

    const messages: Record<string, unknown>[] = [];
    const statuses: string[] = [];
    const subscription = client.subscribe(
      "console-test",
      {
        onMessage: (m) => messages.push(m),
        onStatus: (s) => statuses.push(s),
      },
      { autoReconnect: false },
    );
    await sleep(400);
    await client.publish("console-test", { title: "Hi", body: "there" }, { k: "v" });
    const deadline = Date.now() + 5000;
    while (messages.length < 1 && Date.now() < deadline) await sleep(50);
    subscription.close();

    expect(messages).toHaveLength(1);
    expect(messages[0]!["notification"]).toEqual({ title: "Hi", body: "there" });
    expect(messages[0]!["data"]).toEqual({ k: "v" });
    expect(statuses[0]).toBe("connecting");
    expect(statuses).toContain("open");
    expect(statuses[statuses.length - 1]).toBe("closed");
  });

  it("rejects payloads over 4000 bytes", async () => {
    const client = new BrokerClient(broker.url);
    await client.login("console@example.com", "password-123");
    const overhead = canonicalJson({ data: { k: "" } }).length;
    await expect(
      client.publish("console-test", null, { k: "x".repeat(4001 - overhead) }),
    ).rejects.toMatchObject({ status: 413 });
  });
});
