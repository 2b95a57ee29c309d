/**
 * End-to-end feedback loop across console, broker, and device pipeline:
 * an intruder alert is marked as known through the console, the device
 * syncs and retrains, and replaying the identical scene stays quiet. Also
 * cross-checks the console history view against the CLI byte-for-byte.
 */

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { BrokerClient } from "../src/api.js";
import { markKnown, submitEnrollment } from "../src/enroll.js";
import { historyText } from "../src/history.js";
import { UploadDraft } from "../src/state.js";
import {
  BrokerProcess,
  FixtureManifest,
  buildFixture,
  detectFlags,
  runCli,
  sleep,
  startBroker,
  tempDir,
} from "./helpers.js";

let broker: BrokerProcess;
let fixtureDir: string;
let manifest: FixtureManifest;
let client: BrokerClient;
let token: string;
let modelPath: string;
let facesDir: string;

function runArgs(): string[] {
  return [
    "run",
    "--motion", join(fixtureDir, manifest.motion),
    "--frames", join(fixtureDir, manifest.frames),
    "--cascade", join(fixtureDir, manifest.cascade),
    "--model", modelPath,
    "--broker", broker.url,
    "--token", token,
    "--burst-count", String(manifest.burst_count),
    "--interval", "0",
    ...detectFlags(manifest),
  ];
}

function syncArgs(): string[] {
  return [
    "sync",
    "--broker", broker.url,
    "--token", token,
    "--cascade", join(fixtureDir, manifest.cascade),
    "--model", modelPath,
    "--faces-dir", facesDir,
    ...detectFlags(manifest),
  ];
}

function collectAlerts(): { messages: Record<string, unknown>[]; close: () => void } {
  const messages: Record<string, unknown>[] = [];
  const subscription = client.subscribe(
    "rpi_security",
    { onMessage: (m) => messages.push(m) },
    { autoReconnect: false },
  );
  return { messages, close: () => subscription.close() };
}

beforeAll(async () => {
  fixtureDir = tempDir("pibase-fixture-");
  manifest = await buildFixture(fixtureDir);
  broker = await startBroker();
  modelPath = join(tempDir("pibase-model-"), "recognizer.json");
  facesDir = tempDir("pibase-faces-");

  client = new BrokerClient(broker.url);
  await client.register("owner@example.com", "password-123", "Owner");
  token = await client.login("owner@example.com", "password-123");
}, 180_000);

afterAll(async () => {
  await broker?.stop();
});

describe("feedback loop", () => {
  it("alerts once, then never again after mark-known plus sync", async () => {
    // enroll the known person through the console's own upload flow
    const draft = new UploadDraft();
    draft.name = manifest.known_person;
    for (const rel of manifest.enroll_images) {
      draft.addImage({
        name: rel.split("/").pop()!,
        data: new Uint8Array(readFileSync(join(fixtureDir, rel))),
      });
    }
    const enrollment = await submitEnrollment(client, draft);
    expect(enrollment.failed).toBe(0);
    expect(enrollment.pushId).toBeTruthy();

    const firstSync = await runCli(syncArgs());
    expect(firstSync.code).toBe(0);

    // first replay: the unknown face must raise exactly one alert
    const firstAlerts = collectAlerts();
    await sleep(400);
    const firstRun = await runCli(runArgs());
    expect(firstRun.code).toBe(0);
    const firstOutcomes = firstRun.stdout
      .trim()
      .split("\n")
      .map((l) => JSON.parse(l) as { outcome: string });
    expect(firstOutcomes.map((o) => o.outcome)).toEqual([
      "no_intrusion",
      "no_intrusion",
      "intrusion",
    ]);
    await sleep(500);
    firstAlerts.close();
    expect(firstAlerts.messages).toHaveLength(1);

    const records = await client.dbQuery("/Users", "timestamp");
    expect(records).toHaveLength(1);
    const intrusion = {
      push_id: records[0]!.key,
      imageUrl: String(records[0]!.value["imageUrl"]),
      timestamp: String(records[0]!.value["timestamp"]),
    };

    // console action: the detected intruder becomes a known person
    const marked = await markKnown(client, intrusion, "dana");
    expect(marked.failed).toBe(0);
    expect(await client.storageList("dana")).toHaveLength(1);

    const secondSync = await runCli(syncArgs());
    expect(secondSync.code).toBe(0);
    const syncReport = JSON.parse(secondSync.stdout.trim()) as { retrained: boolean };
    expect(syncReport.retrained).toBe(true);

    // identical replay, fresh device process: no new alerts anywhere
    const secondAlerts = collectAlerts();
    await sleep(400);
    const secondRun = await runCli(runArgs());
    expect(secondRun.code).toBe(0);
    const secondOutcomes = secondRun.stdout
      .trim()
      .split("\n")
      .map((l) => JSON.parse(l) as { outcome: string });
    expect(secondOutcomes.map((o) => o.outcome)).toEqual([
      "no_intrusion",
      "no_intrusion",
      "no_intrusion",
    ]);
    await sleep(500);
    secondAlerts.close();
    expect(secondAlerts.messages).toHaveLength(0);

    expect(await client.dbQuery("/Users", "timestamp")).toHaveLength(1);
  }, 180_000);

  it("history view matches the CLI byte-for-byte on the same range", async () => {
    const from = "2020-01-01T00:00:00Z";
    const to = "2030-01-01T00:00:00Z";
    const cli = await runCli([
      "history",
      "--from", from,
      "--to", to,
      "--broker", broker.url,
      "--token", token,
    ]);
    expect(cli.code).toBe(0);
    const consoleText = await historyText(client, from, to);
    expect(consoleText).toBe(cli.stdout);
    expect(consoleText).not.toBe(""); // the first replay's record is in range
  }, 60_000);
});
