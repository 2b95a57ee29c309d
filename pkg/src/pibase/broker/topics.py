"""Topic-based messaging with bounded per-subscriber buffers.

A message carries a notification block (reserved, user-visible keys
``title`` and ``body`` only), a data block (custom string key-value pairs
that may not reuse the reserved names), or both. The serialized payload is
capped at 4000 bytes, boundary inclusive. Delivery is at-least-once to all
current subscribers in per-topic FIFO order; a subscriber joining later
never sees earlier messages.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass

from pibase.util import canonical_dumps

MAX_PAYLOAD_BYTES = 4000
RESERVED_KEYS = frozenset({"title", "body"})
SUBSCRIBER_BUFFER = 1024


class MessageError(ValueError):
    """Invalid message structure."""


class ReservedKeyError(MessageError):
    """A data key collides with a reserved notification key."""


class PayloadTooLargeError(MessageError):
    """Serialized payload exceeds the 4000-byte limit."""


@dataclass(frozen=True)
class Message:
    topic: str
    notification: dict | None = None
    data: dict | None = None

    @property
    def kind(self) -> str:
        if self.notification is not None and self.data is not None:
            return "combined"
        return "notification" if self.notification is not None else "data"

    def payload(self) -> dict:
        body: dict = {}
        if self.notification is not None:
            body["notification"] = self.notification
        if self.data is not None:
            body["data"] = self.data
        return body

    def payload_size(self) -> int:
        return len(canonical_dumps(self.payload()).encode("utf-8"))

    def to_wire(self) -> dict:
        wire = {"topic": self.topic, "kind": self.kind}
        wire.update(self.payload())
        return wire


def validate_message(msg: Message) -> None:
    if not isinstance(msg.topic, str) or not msg.topic:
        raise MessageError("topic must be a non-empty string")
    if msg.notification is None and msg.data is None:
        raise MessageError("message needs a notification block, a data block, or both")
    if msg.notification is not None:
        if not isinstance(msg.notification, dict):
            raise MessageError("notification must be an object")
        bad = set(msg.notification) - RESERVED_KEYS
        if bad:
            raise MessageError(
                f"notification allows only {sorted(RESERVED_KEYS)}, got extra {sorted(bad)}"
            )
        for key, value in msg.notification.items():
            if not isinstance(value, str):
                raise MessageError(f"notification {key} must be a string")
    if msg.data is not None:
        if not isinstance(msg.data, dict):
            raise MessageError("data must be an object")
        for key, value in msg.data.items():
            if not isinstance(key, str) or not isinstance(value, str):
                raise MessageError("data must map strings to strings")
            if key in RESERVED_KEYS:
                raise ReservedKeyError(f"data key {key!r} is reserved")
    size = msg.payload_size()
    if size > MAX_PAYLOAD_BYTES:
        raise PayloadTooLargeError(
            f"payload is {size} bytes, limit is {MAX_PAYLOAD_BYTES}"
        )


class Subscriber:
    """One consumer's buffered view of a topic (drop-oldest beyond 1024)."""

    def __init__(self, topic: str):
        self.topic = topic
        self._queue: deque[Message] = deque(maxlen=SUBSCRIBER_BUFFER)
        self._cond = threading.Condition()
        self._closed = False

    def push(self, msg: Message) -> None:
        with self._cond:
            if not self._closed:
                self._queue.append(msg)
                self._cond.notify()

    def get(self, timeout: float | None = None) -> Message | None:
        """Next message, or None on timeout / after close."""
        with self._cond:
            if not self._queue and not self._closed:
                self._cond.wait(timeout)
            if self._queue:
                return self._queue.popleft()
            return None

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    @property
    def closed(self) -> bool:
        return self._closed


class TopicHub:
    def __init__(self):
        self._subscribers: dict[str, list[Subscriber]] = {}
        self._lock = threading.Lock()

    def subscribe(self, topic: str) -> Subscriber:
        sub = Subscriber(topic)
        with self._lock:
            self._subscribers.setdefault(topic, []).append(sub)
        return sub

    def unsubscribe(self, sub: Subscriber) -> None:
        sub.close()
        with self._lock:
            subs = self._subscribers.get(sub.topic, [])
            if sub in subs:
                subs.remove(sub)

    def publish(self, msg: Message) -> int:
        """Validate and fan out; returns the number of subscribers reached."""
        validate_message(msg)
        with self._lock:
            targets = list(self._subscribers.get(msg.topic, ()))
        for sub in targets:
            sub.push(msg)
        return len(targets)

    def subscriber_count(self, topic: str) -> int:
        with self._lock:
            return len(self._subscribers.get(topic, ()))
