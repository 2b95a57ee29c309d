/** Incremental parser for a server-sent events byte stream. */

export class SseParser {
  private buffer = "";

  /** Feed a decoded chunk; returns any complete `data:` payloads. */
  push(chunk: string): string[] {
    this.buffer += chunk;
    const out: string[] = [];
    let newline = this.buffer.indexOf("\n");
    while (newline >= 0) {
      const line = this.buffer.slice(0, newline).replace(/\r$/, "");
      this.buffer = this.buffer.slice(newline + 1);
      if (line.startsWith("data:")) {
        out.push(line.slice("data:".length).trim());
      }
      // comment lines (keep-alives) and blank separators are dropped
      newline = this.buffer.indexOf("\n");
    }
    return out;
  }
}
