"""Small shared helpers: canonical JSON and UTC timestamp handling."""

from __future__ import annotations

import json
from datetime import datetime, timezone


def canonical_dumps(obj) -> str:
    """Compact JSON with sorted keys; the one true byte form for records."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def iso_utc(dt: datetime) -> str:
    """Fixed-width UTC ISO 8601 with microseconds and a Z suffix.

    Constant width keeps lexicographic order identical to time order.
    """
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%f") + "Z"


def parse_iso(text: str) -> datetime:
    """Parse ISO 8601, accepting both Z and explicit offsets."""
    cleaned = text.strip()
    if cleaned.endswith("Z") or cleaned.endswith("z"):
        cleaned = cleaned[:-1] + "+00:00"
    dt = datetime.fromisoformat(cleaned)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)
