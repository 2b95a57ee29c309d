import { describe, expect, it } from "vitest";

import { canonicalJson, isoUtc, parseIso } from "../src/canonical.js";

describe("canonicalJson", () => {
  it("sorts object keys and uses compact separators", () => {
    expect(canonicalJson({ b: 1, a: 2 })).toBe('{"a":2,"b":1}');
  });

  it("handles nesting, arrays, null and booleans", () => {
    const value = { z: [1, { y: null, x: true }], a: "s" };
    expect(canonicalJson(value)).toBe('{"a":"s","z":[1,{"x":true,"y":null}]}');
  });

  it("keeps unicode raw like the broker does", () => {
    expect(canonicalJson({ name: "köln" })).toBe('{"name":"köln"}');
  });

  it("prints decimal confidences the way the broker stores them", () => {
    expect(canonicalJson({ confidence: 34.126375 })).toBe('{"confidence":34.126375}');
    expect(canonicalJson({ confidence: 0.5 })).toBe('{"confidence":0.5}');
  });

  it("matches a frozen broker-side record line", () => {
    // python: json.dumps(..., sort_keys=True, separators=(",", ":"))
    const record = {
      imageUrl: "storage://intrusions/x.pgm",
      timestamp: "2026-03-01T08:10:00.000000Z",
      confidence: 34.126375,
      push_id: "-OxAbCdEfGhIjKlMnOpQ",
    };
    expect(canonicalJson(record)).toBe(
      '{"confidence":34.126375,"imageUrl":"storage://intrusions/x.pgm",' +
        '"push_id":"-OxAbCdEfGhIjKlMnOpQ","timestamp":"2026-03-01T08:10:00.000000Z"}',
    );
  });
});

describe("isoUtc / parseIso", () => {
  it("renders fixed-width microsecond timestamps", () => {
    const date = new Date(Date.UTC(2026, 2, 1, 8, 10, 0, 123));
    expect(isoUtc(date)).toBe("2026-03-01T08:10:00.123000Z");
  });

  it("round trips second-precision bounds exactly", () => {
    expect(isoUtc(parseIso("2026-03-01T08:10:00Z"))).toBe("2026-03-01T08:10:00.000000Z");
    expect(isoUtc(parseIso("2026-03-01T08:10:00"))).toBe("2026-03-01T08:10:00.000000Z");
  });

  it("rejects garbage", () => {
    expect(() => parseIso("whenever")).toThrow();
  });
});
