"""Burst capture: the camera is touched only inside a burst."""

from __future__ import annotations

import time
from dataclasses import dataclass
from datetime import datetime

from pibase.imaging import GrayImage
from pibase.util import utc_now


@dataclass(frozen=True)
class CaptureBurst:
    """Frames read for one motion event, stamped at capture time."""

    frames: tuple[tuple[GrayImage, datetime], ...]
    requested: int
    interval: float
    complete: bool


def run_burst(
    source,
    count: int,
    interval: float,
    clock=utc_now,
    sleep=time.sleep,
) -> CaptureBurst:
    """Read ``count`` frames, pausing ``interval`` seconds between reads.

    A failing or exhausted source ends the burst early and flags it
    incomplete. Interval 0 never sleeps (replay mode).
    """
    if count < 1:
        raise ValueError("burst count must be >= 1")
    frames: list[tuple[GrayImage, datetime]] = []
    complete = True
    for i in range(count):
        if i > 0 and interval > 0:
            sleep(interval)
        try:
            frame = source.read()
        except Exception:  # noqa: BLE001 - camera fault ends the burst
            complete = False
            break
        if frame is None:
            complete = False
            break
        frames.append((frame, clock()))
    return CaptureBurst(tuple(frames), requested=count, interval=interval, complete=complete)
