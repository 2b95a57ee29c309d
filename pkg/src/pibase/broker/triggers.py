"""Path-pattern write triggers that publish to a topic after commit."""

from __future__ import annotations

from dataclasses import dataclass, field

from pibase.broker.db import split_path
from pibase.broker.topics import Message
from pibase.util import parse_iso


class TriggerTemplateError(ValueError):
    """The committed record lacks a field the payload template needs."""


@dataclass(frozen=True)
class TriggerRule:
    """Publishes a templated message when a write lands on a matching path.

    Pattern segments of the form ``{name}`` match any single segment. The
    body template may reference ``{date}`` and ``{time}``, which are filled
    from the record's ``timestamp`` field rendered in UTC ("GMT" in the
    user-facing string). ``data_fields`` maps message data keys to record
    fields copied verbatim.
    """

    pattern: str
    topic: str
    title: str
    body_template: str
    data_fields: dict[str, str] = field(default_factory=dict)

    def matches(self, path: str) -> bool:
        try:
            path_segments = split_path(path)
        except ValueError:
            return False
        pattern_segments = self.pattern.strip("/").split("/")
        if len(pattern_segments) != len(path_segments):
            return False
        for pat, seg in zip(pattern_segments, path_segments):
            if pat.startswith("{") and pat.endswith("}") and len(pat) > 2:
                continue
            if pat != seg:
                return False
        return True

    def build_message(self, record) -> Message:
        if not isinstance(record, dict):
            raise TriggerTemplateError("trigger target record must be an object")
        body = self.body_template
        if "{date}" in body or "{time}" in body:
            ts = record.get("timestamp")
            if not isinstance(ts, str):
                raise TriggerTemplateError("record has no timestamp field for the body")
            try:
                instant = parse_iso(ts)
            except ValueError:
                raise TriggerTemplateError(f"unparsable timestamp {ts!r}") from None
            body = body.replace("{date}", instant.strftime("%Y-%m-%d"))
            body = body.replace("{time}", instant.strftime("%H:%M:%S"))
        data = {}
        for key, source_field in self.data_fields.items():
            value = record.get(source_field)
            if not isinstance(value, str):
                raise TriggerTemplateError(
                    f"record field {source_field!r} missing or not a string"
                )
            data[key] = value
        return Message(
            topic=self.topic,
            notification={"title": self.title, "body": body},
            data=data,
        )


DEFAULT_INTRUSION_RULE = TriggerRule(
    pattern="/Users/{pushId}",
    topic="rpi_security",
    title="Intrusion Detected",
    body_template="Detected intrusion on {date} at {time} GMT",
    data_fields={"imageUrl": "imageUrl"},
)
