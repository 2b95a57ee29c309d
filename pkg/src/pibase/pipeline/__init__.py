"""Edge-device brain: motion-gated capture, decide/publish flow, metrics."""

from pibase.pipeline.capture import CaptureBurst, run_burst
from pibase.pipeline.engine import (
    EventOutcome,
    IntrusionCandidate,
    Pipeline,
    PipelineConfig,
    RetryQueue,
    SyncReport,
    expand_rect,
    process_burst,
)
from pibase.pipeline.metrics import MetricsReport, TrialOutcome, compute_metrics
from pibase.pipeline.sources import (
    DirectoryFrameSource,
    ListFrameSource,
    MotionEvent,
    parse_motion_file,
)

__all__ = [
    "CaptureBurst",
    "DirectoryFrameSource",
    "EventOutcome",
    "IntrusionCandidate",
    "ListFrameSource",
    "MetricsReport",
    "MotionEvent",
    "Pipeline",
    "PipelineConfig",
    "RetryQueue",
    "SyncReport",
    "TrialOutcome",
    "compute_metrics",
    "expand_rect",
    "parse_motion_file",
    "process_burst",
    "run_burst",
]
