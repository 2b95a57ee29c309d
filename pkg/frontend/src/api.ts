/**
 * Thin client for the broker HTTP API. The console performs no vision work:
 * every mutation here maps 1:1 to one broker call.
 */

import { SseParser } from "./sse.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

export interface QueryRow {
  key: string;
  value: Record<string, unknown>;
}

export type StreamStatus = "connecting" | "open" | "dropped" | "closed";

export interface StreamHandlers {
  onMessage: (msg: Record<string, unknown>) => void;
  onStatus?: (status: StreamStatus) => void;
}

export interface Subscription {
  close(): void;
}

async function raiseForStatus(response: Response): Promise<void> {
  if (response.ok) return;
  let message = response.statusText;
  try {
    const body = (await response.json()) as { error?: string };
    if (body.error) message = body.error;
  } catch {
    /* non-JSON error body */
  }
  throw new ApiError(response.status, message);
}

export class BrokerClient {
  constructor(
    public baseUrl: string,
    public token: string | null = null,
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private headers(extra: Record<string, string> = {}): Record<string, string> {
    const h: Record<string, string> = { ...extra };
    if (this.token) h["Authorization"] = `Bearer ${this.token}`;
    return h;
  }

  private async requestJson<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const init: RequestInit = { method, headers: this.headers() };
    if (body !== undefined) {
      (init.headers as Record<string, string>)["Content-Type"] = "application/json";
      init.body = JSON.stringify(body);
    }
    const response = await fetch(this.baseUrl + path, init);
    await raiseForStatus(response);
    return (await response.json()) as T;
  }

  async register(email: string, password: string, name: string): Promise<string> {
    const body = await this.requestJson<{ uid: string }>("POST", "/auth/register", {
      email,
      password,
      name,
    });
    return body.uid;
  }

  async login(email: string, password: string): Promise<string> {
    const body = await this.requestJson<{ token: string }>("POST", "/auth/login", {
      email,
      password,
    });
    this.token = body.token;
    return body.token;
  }

  async dbSet(path: string, value: unknown): Promise<string> {
    const body = await this.requestJson<{ committed_at: string }>("PUT", "/db" + path, value);
    return body.committed_at;
  }

  async dbPush(path: string, value: unknown): Promise<string> {
    const body = await this.requestJson<{ push_id: string }>("POST", "/db" + path, value);
    return body.push_id;
  }

  async dbGet(path: string): Promise<unknown> {
    const body = await this.requestJson<{ value: unknown }>("GET", "/db" + path);
    return body.value;
  }

  async dbQuery(
    path: string,
    orderBy: string,
    start?: string,
    end?: string,
  ): Promise<QueryRow[]> {
    const params = new URLSearchParams({ orderBy });
    if (start !== undefined) params.set("start", start);
    if (end !== undefined) params.set("end", end);
    const body = await this.requestJson<{ results: QueryRow[] }>(
      "GET",
      "/db" + path + "?" + params.toString(),
    );
    return body.results;
  }

  async storagePut(
    folder: string,
    name: string,
    data: Uint8Array | Blob,
    contentType: string,
  ): Promise<string> {
    const response = await fetch(
      `${this.baseUrl}/storage/${encodeURIComponent(folder)}/${encodeURIComponent(name)}`,
      {
        method: "POST",
        headers: this.headers({ "Content-Type": contentType }),
        body: data instanceof Blob ? data : new Blob([data as BlobPart]),
      },
    );
    await raiseForStatus(response);
    return ((await response.json()) as { url: string }).url;
  }

  async storageGet(folder: string, name: string): Promise<Uint8Array> {
    const response = await fetch(
      `${this.baseUrl}/storage/${encodeURIComponent(folder)}/${encodeURIComponent(name)}`,
      { headers: this.headers() },
    );
    await raiseForStatus(response);
    return new Uint8Array(await response.arrayBuffer());
  }

  async storageGetUrl(url: string): Promise<Uint8Array> {
    const prefix = "storage://";
    if (!url.startsWith(prefix)) throw new ApiError(404, `not a storage url: ${url}`);
    const [folder, ...rest] = url.slice(prefix.length).split("/");
    if (!folder || rest.length === 0) throw new ApiError(404, `malformed storage url: ${url}`);
    return this.storageGet(folder, rest.join("/"));
  }

  async storageList(folder: string): Promise<string[]> {
    const body = await this.requestJson<{ objects: string[] }>(
      "GET",
      `/storage/${encodeURIComponent(folder)}`,
    );
    return body.objects;
  }

  async storageFolderExists(folder: string): Promise<boolean> {
    try {
      await this.storageList(folder);
      return true;
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) return false;
      throw err;
    }
  }

  async publish(
    topic: string,
    notification: Record<string, string> | null,
    data: Record<string, string> | null,
  ): Promise<number> {
    const body: Record<string, unknown> = {};
    if (notification) body["notification"] = notification;
    if (data) body["data"] = data;
    const reply = await this.requestJson<{ delivered: number }>(
      "POST",
      `/topics/${encodeURIComponent(topic)}`,
      body,
    );
    return reply.delivered;
  }

  /**
   * Live topic stream over server-sent events. Reconnects automatically
   * when the stream drops, surfacing the state through onStatus.
   */
  subscribe(
    topic: string,
    handlers: StreamHandlers,
    opts: { autoReconnect?: boolean; retryMs?: number } = {},
  ): Subscription {
    const retryMs = opts.retryMs ?? 1000;
    const autoReconnect = opts.autoReconnect ?? true;
    let closed = false;
    let controller: AbortController | null = null;
    let retryTimer: ReturnType<typeof setTimeout> | null = null;

    const connect = async () => {
      if (closed) return;
      controller = new AbortController();
      handlers.onStatus?.("connecting");
      try {
        const params = this.token ? `?auth=${encodeURIComponent(this.token)}` : "";
        const response = await fetch(
          `${this.baseUrl}/topics/${encodeURIComponent(topic)}/subscribe${params}`,
          { signal: controller.signal },
        );
        await raiseForStatus(response);
        handlers.onStatus?.("open");
        const reader = response.body!.getReader();
        const decoder = new TextDecoder();
        const parser = new SseParser();
        for (;;) {
          const { done, value } = await reader.read();
          if (done) break;
          for (const payload of parser.push(decoder.decode(value, { stream: true }))) {
            handlers.onMessage(JSON.parse(payload) as Record<string, unknown>);
          }
        }
      } catch (err) {
        if (closed) return;
        if (err instanceof ApiError) {
          handlers.onStatus?.("closed");
          throw err; // auth/permission errors are not retried
        }
      }
      if (closed) return;
      handlers.onStatus?.("dropped");
      if (autoReconnect) {
        retryTimer = setTimeout(() => void connect(), retryMs);
      }
    };

    void connect();
    return {
      close() {
        closed = true;
        if (retryTimer) clearTimeout(retryTimer);
        controller?.abort();
        handlers.onStatus?.("closed");
      },
    };
  }
}
