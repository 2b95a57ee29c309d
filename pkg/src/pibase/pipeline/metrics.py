"""Detection trial bookkeeping and precision/recall computation."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class TrialOutcome:
    """One walk-in trial: what was present and what the detector said."""

    trial_id: str
    face_present: bool
    detected: bool
    identity: str | None = None
    recognized_as: str | None = None

    def __post_init__(self):
        if not self.detected and self.recognized_as is not None:
            raise ValueError("recognized_as is meaningful only when detected")


@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    tp: int
    fp: int
    fn: int
    tn: int
    degenerate_precision: bool = False
    degenerate_recall: bool = False

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
            "degenerate_precision": self.degenerate_precision,
            "degenerate_recall": self.degenerate_recall,
        }


def compute_metrics(outcomes: list[TrialOutcome]) -> MetricsReport:
    """precision = TP/(TP+FP), recall = TP/(TP+FN).

    A 0/0 ratio (nothing claimed, or nothing present) is reported as 1.0
    and flagged as degenerate. Results depend only on the multiset of
    outcomes, never on their order.
    """
    if not outcomes:
        raise ValueError("outcome list must be non-empty")
    tp = sum(1 for o in outcomes if o.face_present and o.detected)
    fn = sum(1 for o in outcomes if o.face_present and not o.detected)
    fp = sum(1 for o in outcomes if not o.face_present and o.detected)
    tn = sum(1 for o in outcomes if not o.face_present and not o.detected)

    degenerate_p = (tp + fp) == 0
    degenerate_r = (tp + fn) == 0
    precision = 1.0 if degenerate_p else tp / (tp + fp)
    recall = 1.0 if degenerate_r else tp / (tp + fn)
    return MetricsReport(
        precision=precision,
        recall=recall,
        tp=tp,
        fp=fp,
        fn=fn,
        tn=tn,
        degenerate_precision=degenerate_p,
        degenerate_recall=degenerate_r,
    )
