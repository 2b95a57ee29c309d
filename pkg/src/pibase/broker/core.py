"""Broker engine tying auth, database, storage, topics, and triggers together.

All database writes are serialized through a single commit lock. A write is
appended to the write-ahead log before its triggers run, and trigger
evaluation happens inside the commit section, so subscribers observe topic
messages in commit order and a reader can never see a trigger side effect
before the record itself. State persists as one JSON snapshot plus the
append-only log, compacted on startup. Accounts live under the reserved
/Accounts subtree, which the client-facing API refuses to touch: password
digests never leave the server.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from pathlib import Path

from pibase.broker.auth import AuthStore
from pibase.broker.db import JsonTree, PushKeyGenerator, split_path
from pibase.broker.storage import StorageStore
from pibase.broker.topics import Message, Subscriber, TopicHub
from pibase.broker.triggers import DEFAULT_INTRUSION_RULE, TriggerRule, TriggerTemplateError
from pibase.util import iso_utc, utc_now

log = logging.getLogger(__name__)

RESERVED_SUBTREES = frozenset({"Accounts"})


class ReservedPathError(PermissionError):
    """Client write/read attempted on a server-internal subtree."""


class BrokerCore:
    def __init__(
        self,
        data_dir: str | Path,
        token_ttl: float = 86400.0,
        clock=time.time,
        install_default_rules: bool = True,
    ):
        self._data_dir = Path(data_dir)
        self._data_dir.mkdir(parents=True, exist_ok=True)
        self._clock = clock
        self._commit_lock = threading.RLock()

        self.auth = AuthStore(clock=clock, token_ttl=token_ttl)
        self.tree = JsonTree()
        self.storage = StorageStore(self._data_dir / "objects")
        self.hub = TopicHub()
        self.keys = PushKeyGenerator(clock=clock)
        self._rules: list[TriggerRule] = []

        self._snapshot_path = self._data_dir / "snapshot.json"
        self._wal_path = self._data_dir / "wal.jsonl"
        self._load_and_compact()
        self._wal = open(self._wal_path, "a", encoding="utf-8")

        if install_default_rules:
            self.install_trigger(DEFAULT_INTRUSION_RULE)

    # -- persistence ------------------------------------------------------

    def _load_and_compact(self) -> None:
        if self._snapshot_path.exists():
            doc = json.loads(self._snapshot_path.read_text(encoding="utf-8"))
            self.tree = JsonTree(doc.get("tree", {}))
            for folder, name, content_type in doc.get("storage", []):
                self.storage.restore(folder, name, content_type)
        if self._wal_path.exists():
            with open(self._wal_path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    self._replay(json.loads(line))
        self._rebuild_auth()
        self._write_snapshot()
        self._wal_path.write_text("", encoding="utf-8")

    def _replay(self, entry: dict) -> None:
        op = entry.get("op")
        if op == "db_set":
            self.tree.set(entry["path"], entry["value"])
        elif op == "db_push":
            self.tree.set(entry["path"] + "/" + entry["key"], entry["value"])
        elif op == "storage":
            self.storage.restore(entry["folder"], entry["name"], entry["content_type"])
        else:
            log.warning("skipping unknown wal op %r", op)

    def _rebuild_auth(self) -> None:
        accounts = self.tree.get("/Accounts")
        if isinstance(accounts, dict):
            for record in accounts.values():
                if isinstance(record, dict) and "uid" in record:
                    self.auth.restore(record)

    def _write_snapshot(self) -> None:
        doc = {"tree": self.tree.snapshot(), "storage": self.storage.index()}
        tmp = self._snapshot_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc), encoding="utf-8")
        tmp.replace(self._snapshot_path)

    def _append_wal(self, entry: dict) -> None:
        self._wal.write(json.dumps(entry) + "\n")
        self._wal.flush()

    def close(self) -> None:
        with self._commit_lock:
            self._write_snapshot()
            self._wal.close()
            self._wal_path.write_text("", encoding="utf-8")

    # -- auth --------------------------------------------------------------

    def register(self, email: str, password: str, name: str) -> str:
        with self._commit_lock:
            record = self.auth.register(email, password, name)
            self.tree.set(f"/Accounts/{record['uid']}", record)
            self._append_wal({"op": "db_set", "path": f"/Accounts/{record['uid']}", "value": record})
            return record["uid"]

    def login(self, email: str, password: str) -> tuple[str, float]:
        return self.auth.login(email, password)

    def authenticate(self, token: str | None) -> str:
        return self.auth.authenticate(token)

    # -- database ----------------------------------------------------------

    @staticmethod
    def _guard_client_path(path: str) -> None:
        segments = split_path(path)
        if segments[0] in RESERVED_SUBTREES:
            raise ReservedPathError(f"path /{segments[0]} is reserved")

    def db_set(self, path: str, value, internal: bool = False) -> str:
        if not internal:
            self._guard_client_path(path)
        else:
            split_path(path)
        with self._commit_lock:
            self.tree.set(path, value)
            self._append_wal({"op": "db_set", "path": path, "value": value})
            committed_at = iso_utc(utc_now())
            self._fire_triggers(path, value)
        return committed_at

    def db_push(self, path: str, value, internal: bool = False) -> tuple[str, str]:
        if not internal:
            self._guard_client_path(path)
        else:
            split_path(path)
        with self._commit_lock:
            key = self.keys.next_key()
            full_path = path.rstrip("/") + "/" + key
            self.tree.set(full_path, value)
            self._append_wal({"op": "db_push", "path": path.rstrip("/"), "key": key, "value": value})
            committed_at = iso_utc(utc_now())
            self._fire_triggers(full_path, value)
        return key, committed_at

    def db_get(self, path: str, internal: bool = False):
        if not internal:
            self._guard_client_path(path)
        with self._commit_lock:
            return self.tree.get(path)

    def db_query(
        self,
        path: str,
        order_by: str | None = None,
        start: str | None = None,
        end: str | None = None,
        internal: bool = False,
    ) -> list[tuple[str, object]]:
        if not internal:
            self._guard_client_path(path)
        with self._commit_lock:
            return self.tree.query(path, order_by, start, end)

    # -- triggers ------------------------------------------------------------

    def install_trigger(self, rule: TriggerRule) -> None:
        split_path(rule.pattern)  # raises PathError on malformed patterns
        self._rules.append(rule)

    def _fire_triggers(self, path: str, value) -> None:
        for rule in self._rules:
            if not rule.matches(path):
                continue
            try:
                message = rule.build_message(value)
                self.hub.publish(message)
            except (TriggerTemplateError, ValueError) as exc:
                log.error("trigger publish failed for %s: %s", path, exc)

    # -- storage -------------------------------------------------------------

    def storage_put(self, folder: str, name: str, data: bytes, content_type: str) -> str:
        url = self.storage.put(folder, name, data, content_type)
        with self._commit_lock:
            self._append_wal(
                {"op": "storage", "folder": folder, "name": name, "content_type": content_type}
            )
        return url

    def storage_get(self, folder: str, name: str) -> tuple[bytes, str]:
        return self.storage.get(folder, name)

    def storage_list(self, folder: str) -> list[str]:
        return self.storage.list_folder(folder)

    # -- messaging -------------------------------------------------------------

    def publish(self, topic: str, notification: dict | None, data: dict | None) -> int:
        return self.hub.publish(Message(topic=topic, notification=notification, data=data))

    def subscribe(self, topic: str) -> Subscriber:
        return self.hub.subscribe(topic)

    def unsubscribe(self, sub: Subscriber) -> None:
        self.hub.unsubscribe(sub)
