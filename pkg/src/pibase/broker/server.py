"""HTTP front end for the broker core.

Routes (JSON bodies, bearer auth except register/login):
    POST /auth/register              {email, password, name} -> {uid}
    POST /auth/login                 {email, password} -> {token, expires_at}
    PUT  /db/{path}                  set value -> {committed_at}
    POST /db/{path}                  push value -> {push_id, committed_at}
    GET  /db/{path}                  -> {value}; with ?orderBy=&start=&end=
                                        -> {results: [{key, value}, ...]}
    POST /storage/{folder}/{name}    raw body -> {url}
    GET  /storage/{folder}/{name}    -> object bytes
    GET  /storage/{folder}           -> {objects: [...]}
    POST /topics/{topic}             publish -> {delivered}
    GET  /topics/{topic}/subscribe   -> server-sent events stream

The subscribe endpoint also accepts the token as an ``auth`` query
parameter because browser EventSource clients cannot set headers.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, unquote, urlsplit

from pibase.broker import storage as storage_mod
from pibase.broker.auth import AuthError, DuplicateEmailError, ValidationError
from pibase.broker.core import BrokerCore, ReservedPathError
from pibase.broker.db import PathError
from pibase.broker.topics import MessageError, PayloadTooLargeError

log = logging.getLogger(__name__)

MAX_BODY_BYTES = 32 * 1024 * 1024


class _HTTPError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


def _map_error(exc: Exception) -> _HTTPError:
    if isinstance(exc, _HTTPError):
        return exc
    if isinstance(exc, AuthError):
        return _HTTPError(401, str(exc))
    if isinstance(exc, DuplicateEmailError):
        return _HTTPError(409, str(exc))
    if isinstance(exc, ValidationError):
        return _HTTPError(400, str(exc))
    if isinstance(exc, ReservedPathError):
        return _HTTPError(403, str(exc))
    if isinstance(exc, PathError):
        return _HTTPError(400, str(exc))
    if isinstance(exc, (storage_mod.NotFoundError,)):
        return _HTTPError(404, str(exc))
    if isinstance(exc, storage_mod.ConflictError):
        return _HTTPError(409, str(exc))
    if isinstance(exc, (storage_mod.TooLargeError, PayloadTooLargeError)):
        return _HTTPError(413, str(exc))
    if isinstance(exc, (storage_mod.BadNameError, MessageError, ValueError)):
        return _HTTPError(400, str(exc))
    log.exception("unhandled broker error")
    return _HTTPError(500, "internal error")


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    core: BrokerCore = None  # type: ignore[assignment]
    shutting_down: threading.Event = None  # type: ignore[assignment]

    # -- plumbing -----------------------------------------------------------

    def log_message(self, fmt, *args):
        log.debug("http %s", fmt % args)

    def _send_json(self, status: int, obj: dict) -> None:
        body = json.dumps(obj).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _send_error(self, err: _HTTPError) -> None:
        try:
            self._send_json(err.status, {"error": err.message})
        except (BrokenPipeError, ConnectionResetError):
            pass

    def _drain_body(self) -> None:
        """Read the request body eagerly so keep-alive framing stays intact
        even when the handler fails before consuming it."""
        length = int(self.headers.get("Content-Length") or 0)
        if length > MAX_BODY_BYTES:
            self._body = None
            # consume and discard to keep the connection parseable
            remaining = length
            while remaining > 0:
                chunk = self.rfile.read(min(remaining, 1 << 20))
                if not chunk:
                    break
                remaining -= len(chunk)
            raise _HTTPError(413, "request body too large")
        self._body = self.rfile.read(length) if length else b""

    def _read_body(self) -> bytes:
        return self._body

    def _read_json(self):
        raw = self._read_body()
        if not raw:
            raise _HTTPError(400, "request body must be JSON")
        try:
            return json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise _HTTPError(400, f"invalid JSON body: {exc}") from None

    def _token(self, query: dict) -> str | None:
        header = self.headers.get("Authorization", "")
        if header.startswith("Bearer "):
            return header[len("Bearer ") :].strip()
        values = query.get("auth")
        return values[0] if values else None

    def _require_auth(self, query: dict) -> str:
        return self.core.authenticate(self._token(query))

    def _route(self, method: str) -> None:
        parts = urlsplit(self.path)
        segments = [unquote(s) for s in parts.path.split("/") if s]
        query = parse_qs(parts.query)
        try:
            self._drain_body()
            self._dispatch(method, segments, query)
        except Exception as exc:  # noqa: BLE001 - mapped to HTTP statuses
            self._send_error(_map_error(exc))

    def do_GET(self):  # noqa: N802
        self._route("GET")

    def do_POST(self):  # noqa: N802
        self._route("POST")

    def do_PUT(self):  # noqa: N802
        self._route("PUT")

    # -- routes --------------------------------------------------------------

    def _dispatch(self, method: str, segments: list[str], query: dict) -> None:
        if not segments:
            raise _HTTPError(404, "not found")
        head = segments[0]
        if head == "auth" and method == "POST" and len(segments) == 2:
            return self._handle_auth(segments[1])
        if head == "db" and len(segments) >= 2:
            return self._handle_db(method, "/" + "/".join(segments[1:]), query)
        if head == "storage" and len(segments) in (2, 3):
            return self._handle_storage(method, segments[1:], query)
        if head == "topics" and len(segments) in (2, 3):
            return self._handle_topics(method, segments[1:], query)
        raise _HTTPError(404, "not found")

    def _handle_auth(self, action: str) -> None:
        body = self._read_json()
        if not isinstance(body, dict):
            raise _HTTPError(400, "body must be a JSON object")
        if action == "register":
            uid = self.core.register(
                body.get("email", ""), body.get("password", ""), body.get("name", "")
            )
            return self._send_json(201, {"uid": uid})
        if action == "login":
            token, expires = self.core.login(body.get("email", ""), body.get("password", ""))
            return self._send_json(200, {"token": token, "expires_at": expires})
        raise _HTTPError(404, "not found")

    def _handle_db(self, method: str, path: str, query: dict) -> None:
        self._require_auth(query)
        if method == "PUT":
            value = self._read_json()
            committed = self.core.db_set(path, value)
            return self._send_json(200, {"committed_at": committed})
        if method == "POST":
            value = self._read_json()
            key, committed = self.core.db_push(path, value)
            return self._send_json(200, {"push_id": key, "committed_at": committed})
        if method == "GET":
            order_by = query.get("orderBy", [None])[0]
            if order_by is not None:
                start = query.get("start", [None])[0]
                end = query.get("end", [None])[0]
                rows = self.core.db_query(path, order_by, start, end)
                return self._send_json(
                    200, {"results": [{"key": k, "value": v} for k, v in rows]}
                )
            return self._send_json(200, {"value": self.core.db_get(path)})
        raise _HTTPError(405, "method not allowed")

    def _handle_storage(self, method: str, segments: list[str], query: dict) -> None:
        self._require_auth(query)
        if method == "POST" and len(segments) == 2:
            data = self._read_body()
            content_type = self.headers.get("Content-Type", "application/octet-stream")
            url = self.core.storage_put(segments[0], segments[1], data, content_type)
            return self._send_json(201, {"url": url})
        if method == "GET" and len(segments) == 2:
            data, content_type = self.core.storage_get(segments[0], segments[1])
            self.send_response(200)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(data)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(data)
            return None
        if method == "GET" and len(segments) == 1:
            return self._send_json(200, {"objects": self.core.storage_list(segments[0])})
        raise _HTTPError(405, "method not allowed")

    def _handle_topics(self, method: str, segments: list[str], query: dict) -> None:
        self._require_auth(query)
        topic = segments[0]
        if method == "POST" and len(segments) == 1:
            body = self._read_json()
            if not isinstance(body, dict):
                raise _HTTPError(400, "body must be a JSON object")
            delivered = self.core.publish(topic, body.get("notification"), body.get("data"))
            return self._send_json(200, {"delivered": delivered})
        if method == "GET" and len(segments) == 2 and segments[1] == "subscribe":
            return self._stream_topic(topic)
        raise _HTTPError(405, "method not allowed")

    def _stream_topic(self, topic: str) -> None:
        sub = self.core.subscribe(topic)
        try:
            self.send_response(200)
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            idle = 0
            while not self.shutting_down.is_set():
                msg = sub.get(timeout=0.25)
                if msg is not None:
                    payload = json.dumps(msg.to_wire())
                    self.wfile.write(f"data: {payload}\n\n".encode("utf-8"))
                    self.wfile.flush()
                    idle = 0
                else:
                    idle += 1
                    if idle >= 20:  # ~5s heartbeat keeps proxies and clients alive
                        self.wfile.write(b": keep-alive\n\n")
                        self.wfile.flush()
                        idle = 0
        except (BrokenPipeError, ConnectionResetError):
            pass
        finally:
            self.core.unsubscribe(sub)
            self.close_connection = True


class BrokerHTTPServer:
    """Threaded HTTP server wrapper with clean startup/shutdown."""

    def __init__(self, core: BrokerCore, host: str = "127.0.0.1", port: int = 0):
        self.core = core
        shutting_down = threading.Event()
        handler = type(
            "BoundHandler", (_Handler,), {"core": core, "shutting_down": shutting_down}
        )
        self._shutting_down = shutting_down
        self._httpd = ThreadingHTTPServer((host, port), handler)
        self._httpd.daemon_threads = True
        self.host = host
        self.port = self._httpd.server_address[1]
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self) -> None:
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def stop(self) -> None:
        self._shutting_down.set()
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
        self.core.close()
