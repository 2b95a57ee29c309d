"""Decide-and-publish flow: burst processing, intrusion delivery, sync.

A burst is an intrusion when at least one face anywhere in it comes back
UNKNOWN from the recognizer; the published picture is the frame holding
the largest-area unknown face. Frames with only enrolled faces, or no
faces at all, produce nothing. Intrusion records that cannot reach the
broker are parked in an append-only retry queue and delivered in order on
recovery.
"""

from __future__ import annotations

import base64
import json
import logging
import os
import time
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

from pibase import recognizer as rec
from pibase.broker.client import APIError, BrokerUnreachable
from pibase.detector import CascadeModel, DetectParams, detect
from pibase.imaging import GrayImage, Rect, load_pgm, save_pgm
from pibase.pipeline.capture import CaptureBurst, run_burst
from pibase.pipeline.sources import MotionEvent
from pibase.util import iso_utc, utc_now

log = logging.getLogger(__name__)


def expand_rect(r: Rect, factor: float, width: int, height: int) -> Rect:
    """Grow a box by ``factor`` per axis around its center, clamped in-bounds."""
    grow_w = int(r.w * factor / 2 + 0.5)
    grow_h = int(r.h * factor / 2 + 0.5)
    x = max(0, r.x - grow_w)
    y = max(0, r.y - grow_h)
    x2 = min(width, r.x2 + grow_w)
    y2 = min(height, r.y2 + grow_h)
    return Rect(x, y, x2 - x, y2 - y)


@dataclass(frozen=True)
class IntrusionCandidate:
    frame: GrayImage
    timestamp: datetime
    face: Rect
    confidence: float


@dataclass
class PipelineConfig:
    burst_count: int = 10
    burst_interval: float = 2.0
    recognition_threshold: float = rec.DEFAULT_THRESHOLD
    detect_params: DetectParams = field(default_factory=DetectParams)
    crop_expand: float = 0.1
    grid: tuple[int, int] = rec.DEFAULT_GRID
    face_size: tuple[int, int] = rec.DEFAULT_FACE_SIZE
    intrusion_folder: str = "intrusions"
    intrusion_db_path: str = "/Users"
    enrollment_db_path: str = "/Enrollments"


def process_burst(
    burst: CaptureBurst,
    cascade: CascadeModel,
    model: rec.RecognizerModel,
    threshold: float,
    detect_params: DetectParams | None = None,
    crop_expand: float = 0.1,
) -> IntrusionCandidate | None:
    """Detect and recognize in every frame; pick the intrusion frame, if any."""
    best: IntrusionCandidate | None = None
    for frame, stamp in burst.frames:
        for box in detect(cascade, frame, detect_params):
            crop_box = expand_rect(box.rect, crop_expand, frame.width, frame.height)
            result = rec.predict(model, frame.crop(crop_box), threshold)
            if not result.is_unknown:
                continue
            if best is None or box.rect.area > best.face.area:
                best = IntrusionCandidate(frame, stamp, box.rect, result.confidence)
    return best


@dataclass
class EventOutcome:
    event_key: str
    outcome: str  # "intrusion" | "no_intrusion" | "error"
    queued: bool = False
    duplicate: bool = False
    push_id: str | None = None
    image_url: str | None = None
    confidence: float | None = None
    error: str | None = None

    def as_dict(self) -> dict:
        doc = {"outcome": self.outcome, "event_key": self.event_key}
        if self.queued:
            doc["queued"] = True
        if self.duplicate:
            doc["duplicate"] = True
        for key in ("push_id", "image_url", "confidence", "error"):
            value = getattr(self, key)
            if value is not None:
                doc[key] = value
        return doc


class RetryQueue:
    """Append-only JSON-lines queue of undelivered intrusion records.

    Record lines carry the full payload; ack lines mark delivery. Pending
    entries replay in append order and an acked id is never redelivered.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._entries: list[dict] = []
        self._acked: set[str] = set()
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    doc = json.loads(line)
                    if doc.get("kind") == "record":
                        self._entries.append(doc["entry"])
                    elif doc.get("kind") == "ack":
                        self._acked.add(doc["id"])
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)

    def _append_line(self, doc: dict) -> None:
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(doc) + "\n")

    def append(self, entry: dict) -> None:
        self._entries.append(entry)
        self._append_line({"kind": "record", "entry": entry})

    def ack(self, entry_id: str) -> None:
        self._acked.add(entry_id)
        self._append_line({"kind": "ack", "id": entry_id})

    def pending(self) -> list[dict]:
        seen: set[str] = set()
        out = []
        for entry in self._entries:
            if entry["id"] in self._acked or entry["id"] in seen:
                continue
            seen.add(entry["id"])
            out.append(entry)
        return out


@dataclass
class SyncReport:
    new_records: int = 0
    people: int = 0
    images_downloaded: int = 0
    retrained: bool = False
    entry_count: int = 0
    model_version: int = 0
    failure: str | None = None

    def as_dict(self) -> dict:
        return {
            "new_records": self.new_records,
            "people": self.people,
            "images_downloaded": self.images_downloaded,
            "retrained": self.retrained,
            "entry_count": self.entry_count,
            "model_version": self.model_version,
            "failure": self.failure,
        }


class Pipeline:
    """Single-threaded event loop for one simulated device.

    The recognizer model reference is swapped atomically (a single tuple
    assignment), so a reader always sees one consistent (model, version)
    pair. Events are deduplicated by key for the life of the process; a
    redelivered event reports its original outcome and writes nothing.
    """

    def __init__(
        self,
        broker,
        cascade: CascadeModel,
        model: rec.RecognizerModel | None,
        config: PipelineConfig | None = None,
        camera=None,
        queue_path: str | Path | None = None,
        faces_dir: str | Path | None = None,
        model_path: str | Path | None = None,
        clock=utc_now,
        sleep=time.sleep,
    ):
        self.broker = broker
        self.cascade = cascade
        self.config = config or PipelineConfig()
        self.camera = camera
        self.clock = clock
        self.sleep = sleep
        self.model_path = Path(model_path) if model_path else None
        self.faces_dir = Path(faces_dir) if faces_dir else None
        self.queue = RetryQueue(queue_path) if queue_path else None
        self._model_ref: tuple[rec.RecognizerModel | None, int] = (model, 0)
        self._outcomes: dict[str, EventOutcome] = {}

    @property
    def model(self) -> rec.RecognizerModel | None:
        return self._model_ref[0]

    @property
    def model_version(self) -> int:
        return self._model_ref[1]

    def model_snapshot(self) -> tuple[rec.RecognizerModel | None, int]:
        return self._model_ref

    # -- intrusion flow ------------------------------------------------------

    def handle_motion(self, event: MotionEvent) -> EventOutcome:
        key = event.key
        if key in self._outcomes:
            previous = self._outcomes[key]
            return EventOutcome(
                event_key=key,
                outcome=previous.outcome,
                duplicate=True,
                push_id=previous.push_id,
                image_url=previous.image_url,
                confidence=previous.confidence,
            )

        if self.queue is not None and self.queue.pending():
            try:
                self.flush_retry_queue()
            except BrokerUnreachable:
                pass

        model = self.model
        if model is None:
            outcome = EventOutcome(key, "error", error="no recognizer model loaded")
            self._outcomes[key] = outcome
            return outcome
        if self.camera is None:
            outcome = EventOutcome(key, "error", error="no camera configured")
            self._outcomes[key] = outcome
            return outcome

        burst = run_burst(
            self.camera,
            self.config.burst_count,
            self.config.burst_interval,
            clock=self.clock,
            sleep=self.sleep,
        )
        candidate = process_burst(
            burst,
            self.cascade,
            model,
            self.config.recognition_threshold,
            self.config.detect_params,
            self.config.crop_expand,
        )
        if candidate is None:
            outcome = EventOutcome(key, "no_intrusion")
            self._outcomes[key] = outcome
            return outcome

        entry = self._make_entry(event, candidate)
        try:
            push_id, url = self._deliver(entry)
            outcome = EventOutcome(
                key,
                "intrusion",
                push_id=push_id,
                image_url=url,
                confidence=entry["confidence"],
            )
        except BrokerUnreachable:
            if self.queue is None:
                outcome = EventOutcome(
                    key, "error", error="broker unreachable and no retry queue"
                )
            else:
                self.queue.append(entry)
                outcome = EventOutcome(
                    key, "intrusion", queued=True, confidence=entry["confidence"]
                )
        self._outcomes[key] = outcome
        return outcome

    def run(self, events: list[MotionEvent]) -> list[EventOutcome]:
        return [self.handle_motion(event) for event in events]

    def _make_entry(self, event: MotionEvent, candidate: IntrusionCandidate) -> dict:
        stamp = candidate.timestamp
        name = (
            stamp.strftime("%Y%m%dT%H%M%S%f")
            + "Z-"
            + event.source_id.replace(":", "-")
            + ".pgm"
        )
        return {
            "id": event.key,
            "timestamp": iso_utc(stamp),
            "confidence": round(candidate.confidence, 6),
            "image_name": name,
            "image_b64": base64.b64encode(save_pgm(candidate.frame)).decode("ascii"),
        }

    def _deliver(self, entry: dict) -> tuple[str, str]:
        folder = self.config.intrusion_folder
        data = base64.b64decode(entry["image_b64"])
        try:
            url = self.broker.storage_put(
                folder, entry["image_name"], data, "image/x-portable-graymap"
            )
        except APIError as exc:
            if exc.status != 409:
                raise
            # image landed on an earlier partially-delivered attempt
            url = f"storage://{folder}/{entry['image_name']}"
        record = {
            "imageUrl": url,
            "timestamp": entry["timestamp"],
            "confidence": entry["confidence"],
        }
        push_id, _ = self.broker.db_push(self.config.intrusion_db_path, record)
        return push_id, url

    def flush_retry_queue(self) -> int:
        """Deliver queued records in order; stops at the first outage."""
        if self.queue is None:
            return 0
        delivered = 0
        for entry in self.queue.pending():
            push_id, url = self._deliver(entry)
            self.queue.ack(entry["id"])
            outcome = self._outcomes.get(entry["id"])
            if outcome is not None:
                outcome.queued = False
                outcome.push_id = push_id
                outcome.image_url = url
            delivered += 1
        return delivered

    # -- enrollment sync -------------------------------------------------------

    def sync_enrollments(self, since_hours: float = 24.0) -> SyncReport:
        """Pull new enrollment folders and retrain on the accumulated set.

        Any download failure leaves the previous model in place.
        """
        if self.faces_dir is None:
            return SyncReport(failure="no faces directory configured")
        now = self.clock()
        start = iso_utc(now - timedelta(hours=since_hours))
        end = iso_utc(now)
        try:
            rows = self.broker.db_query(
                self.config.enrollment_db_path, order_by="timestamp", start=start, end=end
            )
        except (BrokerUnreachable, APIError) as exc:
            return SyncReport(failure=f"enrollment query failed: {exc}")

        if not rows:
            return SyncReport(new_records=0, entry_count=self._entry_count())

        folders: list[str] = []
        for _, value in rows:
            folder = value.get("folder") if isinstance(value, dict) else None
            if isinstance(folder, str) and folder not in folders:
                folders.append(folder)

        downloaded = 0
        try:
            for folder in folders:
                names = self.broker.storage_list(folder)
                target = self.faces_dir / folder
                target.mkdir(parents=True, exist_ok=True)
                for name in names:
                    data = self.broker.storage_get(folder, name)
                    (target / name).write_bytes(data)
                    downloaded += 1
        except (BrokerUnreachable, APIError) as exc:
            return SyncReport(
                new_records=len(rows),
                people=len(folders),
                failure=f"download failed: {exc}",
                entry_count=self._entry_count(),
                model_version=self.model_version,
            )

        samples = self._collect_samples()
        if not samples:
            return SyncReport(
                new_records=len(rows),
                people=len(folders),
                images_downloaded=downloaded,
                failure="no usable face images after download",
                entry_count=self._entry_count(),
                model_version=self.model_version,
            )
        new_model = rec.train(samples, self.config.grid, self.config.face_size)
        version = self.model_version + 1
        self._model_ref = (new_model, version)
        if self.model_path is not None:
            self._save_model_atomic(new_model)
        return SyncReport(
            new_records=len(rows),
            people=len(folders),
            images_downloaded=downloaded,
            retrained=True,
            entry_count=len(new_model.entries),
            model_version=version,
        )

    def _entry_count(self) -> int:
        model = self.model
        return len(model.entries) if model is not None else 0

    def _collect_samples(self) -> list[tuple[str, GrayImage]]:
        """Accumulated master-list images: one (person, crop) per file.

        Each stored image is cropped with the face detector when it finds a
        face (frame-style images); otherwise the whole image is taken as
        the crop (pre-cropped uploads).
        """
        samples = []
        for person_dir in sorted(self.faces_dir.iterdir()):
            if not person_dir.is_dir():
                continue
            for path in sorted(person_dir.glob("*.pgm")):
                try:
                    img = load_pgm(path.read_bytes())
                except Exception as exc:  # noqa: BLE001 - skip unreadable files
                    log.warning("skipping unreadable face image %s: %s", path, exc)
                    continue
                samples.append((person_dir.name, self._training_crop(img)))
        return samples

    def _training_crop(self, img: GrayImage) -> GrayImage:
        boxes = detect(self.cascade, img, self.config.detect_params)
        if not boxes:
            return img
        largest = max(boxes, key=lambda b: b.rect.area)
        return img.crop(
            expand_rect(largest.rect, self.config.crop_expand, img.width, img.height)
        )

    def _save_model_atomic(self, model: rec.RecognizerModel) -> None:
        tmp = self.model_path.with_suffix(self.model_path.suffix + ".tmp")
        tmp.write_bytes(rec.save_model(model))
        os.replace(tmp, self.model_path)
