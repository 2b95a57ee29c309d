import threading

import pytest

from pibase.broker.auth import AuthError, DuplicateEmailError, ValidationError
from pibase.broker.core import BrokerCore, ReservedPathError
from pibase.broker.db import JsonTree, PathError, PushKeyGenerator, split_path
from pibase.broker.storage import ConflictError, NotFoundError, TooLargeError
from pibase.broker.topics import (
    MAX_PAYLOAD_BYTES,
    Message,
    MessageError,
    PayloadTooLargeError,
    ReservedKeyError,
    validate_message,
)
from pibase.broker.triggers import DEFAULT_INTRUSION_RULE, TriggerRule
from pibase.util import canonical_dumps


@pytest.fixture()
def core(tmp_path):
    c = BrokerCore(tmp_path / "data")
    yield c
    c.close()


class TestAuth:
    def test_register_and_login(self, core):
        uid = core.register("ada@example.com", "hunter2-secure", "Ada")
        assert uid.startswith("u")
        token, _ = core.login("ada@example.com", "hunter2-secure")
        assert core.authenticate(token) == uid

    def test_duplicate_email_conflict(self, core):
        core.register("dup@example.com", "password-123", "One")
        with pytest.raises(DuplicateEmailError):
            core.register("DUP@example.com", "password-456", "Two")

    def test_weak_password_rejected(self, core):
        with pytest.raises(ValidationError):
            core.register("u@example.com", "shor", "U")

    def test_invalid_email_rejected(self, core):
        with pytest.raises(ValidationError):
            core.register("not-an-email", "password-123", "U")

    def test_wrong_password_indistinguishable_from_unknown_email(self, core):
        core.register("real@example.com", "password-123", "R")
        with pytest.raises(AuthError) as wrong:
            core.login("real@example.com", "password-wrong")
        with pytest.raises(AuthError) as unknown:
            core.login("ghost@example.com", "password-123")
        assert str(wrong.value) == str(unknown.value)

    def test_expired_token(self, tmp_path):
        core = BrokerCore(tmp_path / "d", token_ttl=0.0)
        core.register("t@example.com", "password-123", "T")
        token, _ = core.login("t@example.com", "password-123")
        with pytest.raises(AuthError):
            core.authenticate(token)
        core.close()

    def test_digest_never_in_client_reads(self, core):
        core.register("safe@example.com", "password-123", "S")
        with pytest.raises(ReservedPathError):
            core.db_get("/Accounts")
        with pytest.raises(ReservedPathError):
            core.db_query("/Accounts", order_by="email")
        with pytest.raises(ReservedPathError):
            core.db_set("/Accounts/x", {"digest": "evil"})


class TestPushKeys:
    def test_lexicographic_order_matches_creation(self):
        gen = PushKeyGenerator()
        keys = [gen.next_key() for _ in range(500)]
        assert keys == sorted(keys)
        assert len(set(keys)) == 500
        assert all(len(k) == 20 for k in keys)

    def test_same_millisecond_keys_still_ordered(self):
        gen = PushKeyGenerator(clock=lambda: 1234567.890)
        keys = [gen.next_key() for _ in range(300)]
        assert keys == sorted(keys)
        assert len(set(keys)) == 300


class TestTree:
    def test_set_then_get_round_trips_canonical_json(self):
        tree = JsonTree()
        value = {"b": [1, 2, {"c": None}], "a": "x", "n": 1.25}
        tree.set("/Users/abc", value)
        assert canonical_dumps(tree.get("/Users/abc")) == canonical_dumps(value)

    def test_query_range_picks_middle_record(self):
        tree = JsonTree()
        for key, ts in (("a", "2026-01-01T00:00:00Z"), ("b", "2026-01-02T00:00:00Z"), ("c", "2026-01-03T00:00:00Z")):
            tree.set(f"/Users/{key}", {"timestamp": ts})
        rows = tree.query("/Users", "timestamp", "2026-01-01T12:00:00Z", "2026-01-02T12:00:00Z")
        assert [k for k, _ in rows] == ["b"]

    def test_query_start_after_end_is_empty(self):
        tree = JsonTree()
        tree.set("/Users/a", {"timestamp": "2026-01-01T00:00:00Z"})
        assert tree.query("/Users", "timestamp", "2026-02-01", "2026-01-01") == []

    def test_query_full_range_sorted(self):
        tree = JsonTree()
        tree.set("/Users/z", {"timestamp": "2026-01-02T00:00:00Z"})
        tree.set("/Users/a", {"timestamp": "2026-01-03T00:00:00Z"})
        tree.set("/Users/m", {"timestamp": "2026-01-01T00:00:00Z"})
        rows = tree.query("/Users", "timestamp")
        assert [k for k, _ in rows] == ["m", "z", "a"]

    def test_malformed_paths_rejected(self):
        for bad in ("", "/", "/a//b", "/a/.b", "/a/b$", "/a/[x]"):
            with pytest.raises(PathError):
                split_path(bad)


class TestStorage:
    def test_put_get_round_trip(self, core):
        url = core.storage_put("kim", "a.pgm", b"P5...", "image/x-portable-graymap")
        assert url == "storage://kim/a.pgm"
        data, content_type = core.storage_get("kim", "a.pgm")
        assert data == b"P5..."
        assert content_type == "image/x-portable-graymap"

    def test_unknown_object_not_found(self, core):
        with pytest.raises(NotFoundError):
            core.storage_get("ghost", "nope.pgm")

    def test_second_put_same_name_rejected(self, core):
        core.storage_put("kim", "a.pgm", b"1", "x")
        with pytest.raises(ConflictError):
            core.storage_put("kim", "a.pgm", b"2", "x")

    def test_oversize_rejected(self, core):
        with pytest.raises(TooLargeError):
            core.storage_put("kim", "big.bin", b"x" * (10 * 1024 * 1024 + 1), "x")

    def test_listing_preserves_insertion_order(self, core):
        for name in ("c.pgm", "a.pgm", "b.pgm"):
            core.storage_put("kim", name, b"x", "x")
        assert core.storage_list("kim") == ["c.pgm", "a.pgm", "b.pgm"]

    def test_listing_unknown_folder_not_found(self, core):
        with pytest.raises(NotFoundError):
            core.storage_list("ghost")


class TestMessages:
    def test_payload_boundary_four_thousand(self):
        # payload = {"data":{"k":"<fill>"}}; pad the value to land exactly on 4000
        overhead = len(canonical_dumps({"data": {"k": ""}}).encode())
        ok = Message(topic="t", data={"k": "x" * (MAX_PAYLOAD_BYTES - overhead)})
        assert ok.payload_size() == MAX_PAYLOAD_BYTES
        validate_message(ok)
        too_big = Message(topic="t", data={"k": "x" * (MAX_PAYLOAD_BYTES - overhead + 1)})
        with pytest.raises(PayloadTooLargeError):
            validate_message(too_big)

    def test_reserved_data_key_rejected(self):
        with pytest.raises(ReservedKeyError):
            validate_message(Message(topic="t", data={"title": "nope"}))

    def test_notification_extra_keys_rejected(self):
        with pytest.raises(MessageError):
            validate_message(Message(topic="t", notification={"title": "a", "icon": "b"}))

    def test_kind_derivation(self):
        assert Message("t", notification={"title": "x"}).kind == "notification"
        assert Message("t", data={"a": "b"}).kind == "data"
        assert Message("t", notification={"title": "x"}, data={"a": "b"}).kind == "combined"


class TestTopics:
    def test_two_subscribers_both_receive(self, core):
        s1 = core.subscribe("rpi_security")
        s2 = core.subscribe("rpi_security")
        count = core.publish("rpi_security", {"title": "t", "body": "b"}, None)
        assert count == 2
        m1 = s1.get(timeout=1)
        m2 = s2.get(timeout=1)
        assert m1.notification == m2.notification == {"title": "t", "body": "b"}

    def test_fifo_order_per_subscriber(self, core):
        sub = core.subscribe("t")
        for i in range(20):
            core.publish("t", None, {"seq": str(i)})
        got = [sub.get(timeout=1).data["seq"] for _ in range(20)]
        assert got == [str(i) for i in range(20)]

    def test_late_subscriber_misses_past_messages(self, core):
        core.publish("t", None, {"seq": "early"})
        sub = core.subscribe("t")
        assert core.hub.subscriber_count("t") == 1
        assert sub.get(timeout=0.05) is None

    def test_drop_oldest_beyond_buffer(self, core):
        sub = core.subscribe("t")
        for i in range(1100):
            core.publish("t", None, {"seq": str(i)})
        first = sub.get(timeout=1)
        assert first.data["seq"] == str(1100 - 1024)


class TestTriggers:
    def _record(self):
        return {
            "imageUrl": "storage://intrusions/x.pgm",
            "timestamp": "2026-03-01T08:10:00.000000Z",
            "confidence": 12.5,
        }

    def test_users_push_fires_default_rule(self, core):
        sub = core.subscribe("rpi_security")
        key, _ = core.db_push("/Users", self._record())
        msg = sub.get(timeout=1)
        assert msg.notification == {
            "title": "Intrusion Detected",
            "body": "Detected intrusion on 2026-03-01 at 08:10:00 GMT",
        }
        assert msg.data == {"imageUrl": "storage://intrusions/x.pgm"}
        assert len(key) == 20

    def test_write_elsewhere_does_not_fire(self, core):
        sub = core.subscribe("rpi_security")
        core.db_push("/Enrollments", {"folder": "kim", "timestamp": "2026-01-01T00:00:00Z"})
        assert sub.get(timeout=0.05) is None

    def test_missing_image_url_publishes_nothing(self, core):
        sub = core.subscribe("rpi_security")
        core.db_push("/Users", {"timestamp": "2026-03-01T08:10:00Z"})
        assert sub.get(timeout=0.05) is None

    def test_exactly_once_per_commit(self, core):
        sub = core.subscribe("rpi_security")
        n = 25
        for _ in range(n):
            core.db_push("/Users", self._record())
        got = 0
        while sub.get(timeout=0.1) is not None:
            got += 1
        assert got == n

    def test_two_matching_rules_fire_in_installation_order(self, core):
        core.install_trigger(
            TriggerRule("/Users/{pushId}", "audit", "Second Rule", "noted", {})
        )
        first = core.subscribe("rpi_security")
        second = core.subscribe("audit")
        core.db_push("/Users", self._record())
        assert first.get(timeout=1).notification["title"] == "Intrusion Detected"
        assert second.get(timeout=1).notification["title"] == "Second Rule"

    def test_set_at_matching_depth_fires(self, core):
        sub = core.subscribe("rpi_security")
        core.db_set("/Users/manual-key", self._record())
        assert sub.get(timeout=1) is not None

    def test_pattern_matching(self):
        rule = DEFAULT_INTRUSION_RULE
        assert rule.matches("/Users/abc123")
        assert not rule.matches("/Users")
        assert not rule.matches("/Users/a/b")
        assert not rule.matches("/Enrollments/abc")


class TestConcurrentCommits:
    def test_concurrent_pushes_keep_key_order_and_trigger_count(self, core):
        sub = core.subscribe("rpi_security")
        results = []
        lock = threading.Lock()

        def push(i):
            key, _ = core.db_push(
                "/Users",
                {"imageUrl": f"storage://intrusions/{i}.pgm", "timestamp": "2026-03-01T00:00:00Z"},
            )
            with lock:
                results.append(key)

        threads = [threading.Thread(target=push, args=(i,)) for i in range(40)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()

        assert len(set(results)) == 40
        messages = []
        while True:
            msg = sub.get(timeout=0.2)
            if msg is None:
                break
            messages.append(msg)
        assert len(messages) == 40
        # message order matches commit (= key) order
        rows = core.db_query("/Users", order_by="timestamp")
        by_key = sorted(results)
        key_to_url = {k: v["imageUrl"] for k, v in rows}
        assert [m.data["imageUrl"] for m in messages] == [key_to_url[k] for k in by_key]


class TestPrefixConsistency:
    def test_message_never_precedes_its_record(self, core):
        # when a trigger message arrives, the record it references must
        # already be readable
        sub = core.subscribe("rpi_security")
        done = threading.Event()
        failures = []

        def reader():
            for _ in range(20):
                msg = sub.get(timeout=2)
                if msg is None:
                    failures.append("missing message")
                    break
                url = msg.data["imageUrl"]
                rows = core.db_query("/Users", order_by="imageUrl", start=url, end=url)
                if not rows:
                    failures.append(f"record for {url} not readable yet")
            done.set()

        thread = threading.Thread(target=reader)
        thread.start()
        for i in range(20):
            core.db_push(
                "/Users",
                {"imageUrl": f"storage://intrusions/pc{i:02d}.pgm", "timestamp": "2026-01-01T00:00:00Z"},
            )
        assert done.wait(timeout=10)
        thread.join()
        assert failures == []


class TestPersistence:
    def test_state_survives_restart(self, tmp_path):
        data_dir = tmp_path / "d"
        core = BrokerCore(data_dir)
        core.register("p@example.com", "password-123", "P")
        core.db_set("/Config/mode", {"armed": True})
        key, _ = core.db_push("/Users", {"imageUrl": "u", "timestamp": "2026-01-01T00:00:00Z"})
        core.storage_put("kim", "a.pgm", b"bytes", "image/x-portable-graymap")
        core.close()

        reopened = BrokerCore(data_dir)
        assert reopened.db_get("/Config/mode") == {"armed": True}
        assert reopened.db_get(f"/Users/{key}")["imageUrl"] == "u"
        assert reopened.storage_get("kim", "a.pgm")[0] == b"bytes"
        token, _ = reopened.login("p@example.com", "password-123")
        assert reopened.authenticate(token)
        reopened.close()

    def test_wal_replay_after_unclean_shutdown(self, tmp_path):
        data_dir = tmp_path / "d"
        core = BrokerCore(data_dir)
        core.db_set("/Config/a", 1)
        # no close(): wal still holds the write
        reopened = BrokerCore(data_dir)
        assert reopened.db_get("/Config/a") == 1
        reopened.close()
