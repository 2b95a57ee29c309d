"""In-memory JSON tree addressed by slash paths, with time-ordered push keys."""

from __future__ import annotations

import copy
import random
import threading
import time

# ASCII-ordered so generated keys sort lexicographically in creation order.
PUSH_ALPHABET = "-0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ_abcdefghijklmnopqrstuvwxyz"

_FORBIDDEN_CHARS = set('.#$[]\x00')


class PathError(ValueError):
    """Malformed database path."""


def split_path(path: str) -> list[str]:
    """Validate and split a slash-separated path into segments."""
    if not isinstance(path, str):
        raise PathError("path must be a string")
    trimmed = path.strip("/")
    if not trimmed:
        raise PathError("path must contain at least one segment")
    segments = trimmed.split("/")
    for seg in segments:
        if not seg:
            raise PathError(f"empty segment in path {path!r}")
        if any(c in _FORBIDDEN_CHARS or ord(c) < 0x20 for c in seg):
            raise PathError(f"segment {seg!r} contains forbidden characters")
    return segments


def join_path(segments: list[str]) -> str:
    return "/" + "/".join(segments)


class PushKeyGenerator:
    """20-char keys: 8 chars of millisecond time plus 12 random chars.

    Keys generated within the same millisecond increment the random suffix
    so that creation order always matches lexicographic order.
    """

    def __init__(self, rng: random.Random | None = None, clock=time.time):
        self._rng = rng or random.Random()
        self._clock = clock
        self._last_ms = -1
        self._last_rand: list[int] = []
        self._lock = threading.Lock()

    def next_key(self) -> str:
        with self._lock:
            now_ms = int(self._clock() * 1000)
            if now_ms <= self._last_ms:
                # same (or rewound) millisecond: bump suffix to keep ordering
                now_ms = self._last_ms
                i = len(self._last_rand) - 1
                while i >= 0 and self._last_rand[i] == 63:
                    self._last_rand[i] = 0
                    i -= 1
                if i >= 0:
                    self._last_rand[i] += 1
                else:
                    now_ms += 1
                    self._last_rand = [self._rng.randrange(64) for _ in range(12)]
            else:
                self._last_rand = [self._rng.randrange(64) for _ in range(12)]
            self._last_ms = now_ms

            chars = []
            ms = now_ms
            for _ in range(8):
                chars.append(PUSH_ALPHABET[ms % 64])
                ms //= 64
            chars.reverse()
            chars.extend(PUSH_ALPHABET[v] for v in self._last_rand)
            return "".join(chars)


class JsonTree:
    """Plain JSON tree; callers serialize writes through their own lock."""

    def __init__(self, root: dict | None = None):
        self._root: dict = root if root is not None else {}

    def snapshot(self) -> dict:
        return copy.deepcopy(self._root)

    def set(self, path: str, value) -> None:
        segments = split_path(path)
        node = self._root
        for seg in segments[:-1]:
            child = node.get(seg)
            if not isinstance(child, dict):
                child = {}
                node[seg] = child
            node = child
        node[segments[-1]] = copy.deepcopy(value)

    def get(self, path: str):
        node = self._root
        for seg in split_path(path):
            if not isinstance(node, dict) or seg not in node:
                return None
            node = node[seg]
        return copy.deepcopy(node)

    def query(
        self,
        path: str,
        order_by: str | None = None,
        start: str | None = None,
        end: str | None = None,
    ) -> list[tuple[str, object]]:
        """Children of ``path``, optionally filtered by a string field.

        With ``order_by``: children lacking the field (or holding a
        non-string value) are excluded, bounds are inclusive, and results
        sort ascending by (field value, key). Without it: all children
        sorted by key.
        """
        node = self._root
        for seg in split_path(path):
            if not isinstance(node, dict) or seg not in node:
                return []
            node = node[seg]
        if not isinstance(node, dict):
            return []

        if order_by is None:
            return [(k, copy.deepcopy(node[k])) for k in sorted(node)]

        rows = []
        for key, value in node.items():
            if not isinstance(value, dict):
                continue
            field = value.get(order_by)
            if not isinstance(field, str):
                continue
            if start is not None and field < start:
                continue
            if end is not None and field > end:
                continue
            rows.append((field, key, value))
        rows.sort(key=lambda r: (r[0], r[1]))
        return [(key, copy.deepcopy(value)) for _, key, value in rows]
