"""HTTP client for the broker, used by the pipeline and the CLI."""

from __future__ import annotations

import json
import threading

import requests


class BrokerError(Exception):
    pass


class BrokerUnreachable(BrokerError):
    """Connection-level failure; the caller may queue and retry."""


class APIError(BrokerError):
    def __init__(self, status: int, message: str):
        super().__init__(f"{status}: {message}")
        self.status = status
        self.message = message


class SseStream:
    """Iterator over JSON messages from a server-sent events response.

    Reads byte-by-byte: events are tiny and a chunked reader would sit on
    them until its buffer filled.
    """

    def __init__(self, response: requests.Response):
        self._response = response
        self._closed = False

    def __iter__(self):
        buffer = bytearray()
        try:
            for chunk in self._response.iter_content(chunk_size=1):
                if self._closed:
                    break
                if not chunk:
                    continue
                buffer.extend(chunk)
                if not buffer.endswith(b"\n"):
                    continue
                line = bytes(buffer[:-1]).strip(b"\r")
                buffer.clear()
                if line.startswith(b"data:"):
                    yield json.loads(line[len(b"data:") :].strip().decode("utf-8"))
        except requests.RequestException:
            if not self._closed:
                raise BrokerUnreachable("event stream dropped") from None
        finally:
            self.close()

    def close(self) -> None:
        self._closed = True
        try:
            self._response.close()
        except Exception:  # noqa: BLE001 - best-effort close
            pass


class BrokerClient:
    def __init__(self, base_url: str, token: str | None = None, timeout: float = 15.0):
        self.base_url = base_url.rstrip("/")
        self.token = token
        self.timeout = timeout
        self._local = threading.local()

    def _session(self) -> requests.Session:
        if not hasattr(self._local, "session"):
            self._local.session = requests.Session()
        return self._local.session

    def _headers(self) -> dict:
        return {"Authorization": f"Bearer {self.token}"} if self.token else {}

    def _request(self, method: str, path: str, **kwargs) -> requests.Response:
        kwargs.setdefault("timeout", self.timeout)
        headers = kwargs.pop("headers", {})
        headers.update(self._headers())
        try:
            response = self._session().request(
                method, self.base_url + path, headers=headers, **kwargs
            )
        except requests.RequestException as exc:
            raise BrokerUnreachable(f"broker unreachable: {exc}") from None
        if response.status_code >= 400:
            try:
                message = response.json().get("error", response.text)
            except ValueError:
                message = response.text
            raise APIError(response.status_code, message)
        return response

    def ping(self) -> bool:
        """True when the broker answers HTTP at all."""
        try:
            self._request("GET", "/db/__ping__")
        except APIError:
            return True
        except BrokerUnreachable:
            return False
        return True

    # -- auth ---------------------------------------------------------------

    def register(self, email: str, password: str, name: str) -> str:
        return self._request(
            "POST", "/auth/register", json={"email": email, "password": password, "name": name}
        ).json()["uid"]

    def login(self, email: str, password: str) -> str:
        body = self._request(
            "POST", "/auth/login", json={"email": email, "password": password}
        ).json()
        self.token = body["token"]
        return self.token

    # -- database -------------------------------------------------------------

    def db_set(self, path: str, value) -> str:
        return self._request("PUT", "/db" + path, json=value).json()["committed_at"]

    def db_push(self, path: str, value) -> tuple[str, str]:
        body = self._request("POST", "/db" + path, json=value).json()
        return body["push_id"], body["committed_at"]

    def db_get(self, path: str):
        return self._request("GET", "/db" + path).json()["value"]

    def db_query(
        self,
        path: str,
        order_by: str,
        start: str | None = None,
        end: str | None = None,
    ) -> list[tuple[str, object]]:
        params = {"orderBy": order_by}
        if start is not None:
            params["start"] = start
        if end is not None:
            params["end"] = end
        body = self._request("GET", "/db" + path, params=params).json()
        return [(row["key"], row["value"]) for row in body["results"]]

    # -- storage -------------------------------------------------------------

    def storage_put(self, folder: str, name: str, data: bytes, content_type: str) -> str:
        return self._request(
            "POST",
            f"/storage/{folder}/{name}",
            data=data,
            headers={"Content-Type": content_type},
        ).json()["url"]

    def storage_get(self, folder: str, name: str) -> bytes:
        return self._request("GET", f"/storage/{folder}/{name}").content

    def storage_get_url(self, url: str) -> bytes:
        prefix = "storage://"
        if not url.startswith(prefix):
            raise APIError(404, f"not a storage url: {url!r}")
        folder, _, name = url[len(prefix) :].partition("/")
        return self.storage_get(folder, name)

    def storage_list(self, folder: str) -> list[str]:
        return self._request("GET", f"/storage/{folder}").json()["objects"]

    # -- messaging -------------------------------------------------------------

    def publish(self, topic: str, notification: dict | None = None, data: dict | None = None) -> int:
        body = {}
        if notification is not None:
            body["notification"] = notification
        if data is not None:
            body["data"] = data
        return self._request("POST", f"/topics/{topic}", json=body).json()["delivered"]

    def subscribe(self, topic: str) -> SseStream:
        try:
            response = self._session().request(
                "GET",
                f"{self.base_url}/topics/{topic}/subscribe",
                headers=self._headers(),
                stream=True,
                timeout=(self.timeout, None),
            )
        except requests.RequestException as exc:
            raise BrokerUnreachable(f"broker unreachable: {exc}") from None
        if response.status_code >= 400:
            try:
                message = response.json().get("error", response.text)
            except ValueError:
                message = response.text
            raise APIError(response.status_code, message)
        return SseStream(response)
