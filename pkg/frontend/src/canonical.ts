/**
 * Canonical JSON: compact separators, object keys sorted, raw unicode.
 * Must produce byte-identical output to the broker's own canonical form so
 * views (history in particular) can be diffed against CLI output.
 */

export function canonicalJson(value: unknown): string {
  if (value === null || value === undefined) return "null";
  switch (typeof value) {
    case "boolean":
    case "number":
      return JSON.stringify(value);
    case "string":
      return JSON.stringify(value);
    case "object":
      break;
    default:
      throw new Error(`cannot serialize ${typeof value}`);
  }
  if (Array.isArray(value)) {
    return "[" + value.map(canonicalJson).join(",") + "]";
  }
  const obj = value as Record<string, unknown>;
  const keys = Object.keys(obj).sort();
  const parts = keys.map((k) => JSON.stringify(k) + ":" + canonicalJson(obj[k]));
  return "{" + parts.join(",") + "}";
}

/** Fixed-width UTC ISO 8601 with microseconds, matching the broker's form. */
export function isoUtc(date: Date): string {
  const pad = (n: number, width: number) => String(n).padStart(width, "0");
  return (
    `${pad(date.getUTCFullYear(), 4)}-${pad(date.getUTCMonth() + 1, 2)}-` +
    `${pad(date.getUTCDate(), 2)}T${pad(date.getUTCHours(), 2)}:` +
    `${pad(date.getUTCMinutes(), 2)}:${pad(date.getUTCSeconds(), 2)}.` +
    `${pad(date.getUTCMilliseconds(), 3)}000Z`
  );
}

/** Parse ISO 8601 accepting a bare date, seconds precision, or Z suffix. */
export function parseIso(text: string): Date {
  const trimmed = text.trim();
  const hasZone = /([zZ]|[+-]\d{2}:?\d{2})$/.test(trimmed);
  const date = new Date(hasZone ? trimmed : trimmed + "Z");
  if (Number.isNaN(date.getTime())) {
    throw new Error(`unparsable date: ${text}`);
  }
  return date;
}
