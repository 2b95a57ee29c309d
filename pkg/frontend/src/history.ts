/**
 * Date-ranged intrusion history. Lines are rendered in the broker's
 * canonical JSON form, byte-identical to the CLI's history output for the
 * same range, so the two surfaces can be cross-checked mechanically.
 */

import { BrokerClient, QueryRow } from "./api.js";
import { canonicalJson, isoUtc, parseIso } from "./canonical.js";

export function formatHistoryLines(rows: QueryRow[]): string[] {
  return rows.map((row) => canonicalJson({ ...row.value, push_id: row.key }));
}

export async function fetchHistory(
  client: BrokerClient,
  from: string,
  to: string,
  dbPath = "/Users",
): Promise<QueryRow[]> {
  const start = isoUtc(parseIso(from));
  const end = isoUtc(parseIso(to));
  return client.dbQuery(dbPath, "timestamp", start, end);
}

export async function historyText(
  client: BrokerClient,
  from: string,
  to: string,
  dbPath = "/Users",
): Promise<string> {
  const rows = await fetchHistory(client, from, to, dbPath);
  const lines = formatHistoryLines(rows);
  return lines.length ? lines.join("\n") + "\n" : "";
}
