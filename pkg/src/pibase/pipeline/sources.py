"""Simulated motion sensor and camera: replay files and frame directories."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

from pibase.imaging import GrayImage, load_pgm
from pibase.util import parse_iso


@dataclass(frozen=True)
class MotionEvent:
    """A detected-motion pulse from one (simulated) sensor."""

    timestamp: datetime
    source_id: str = "pir0"

    @property
    def key(self) -> str:
        return f"{self.source_id}:{self.timestamp.isoformat()}"


def parse_motion_file(text: str, source_id: str = "pir0") -> list[MotionEvent]:
    """One UTC timestamp per line; '#' starts a comment; blank lines skipped.

    Timestamps must be non-decreasing.
    """
    events: list[MotionEvent] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            ts = parse_iso(line)
        except ValueError:
            raise ValueError(f"line {lineno}: unparsable timestamp {line!r}") from None
        if events and ts < events[-1].timestamp:
            raise ValueError(f"line {lineno}: timestamps must be non-decreasing")
        events.append(MotionEvent(ts, source_id))
    return events


class ListFrameSource:
    """Serves pre-built frames in order; None once exhausted."""

    def __init__(self, frames: list[GrayImage]):
        self._frames = list(frames)
        self._next = 0
        self.read_count = 0

    def read(self) -> GrayImage | None:
        self.read_count += 1
        if self._next >= len(self._frames):
            return None
        frame = self._frames[self._next]
        self._next += 1
        return frame


@dataclass
class DirectoryFrameSource:
    """Serves the PGM files of a directory in lexicographic name order."""

    path: Path
    _files: list[Path] = field(init=False)
    _next: int = field(init=False, default=0)
    read_count: int = field(init=False, default=0)

    def __post_init__(self):
        self.path = Path(self.path)
        if not self.path.is_dir():
            raise FileNotFoundError(f"frame directory {self.path} does not exist")
        self._files = sorted(self.path.glob("*.pgm"), key=lambda p: p.name)

    def read(self) -> GrayImage | None:
        self.read_count += 1
        if self._next >= len(self._files):
            return None
        data = self._files[self._next].read_bytes()
        self._next += 1
        return load_pgm(data)

    def remaining(self) -> int:
        return len(self._files) - self._next
