"""Haar-feature cascade face detector: enumeration, training, detection."""

from pibase.detector.features import (
    FEATURE_KINDS,
    HaarFeature,
    eval_feature,
    generate_features,
    scale_rect,
)
from pibase.detector.model import (
    CascadeDecision,
    CascadeModel,
    CascadeStage,
    WeakClassifier,
    load_cascade,
    run_cascade,
    save_cascade,
)
from pibase.detector.training import (
    CascadeTargets,
    StageResult,
    TrainingError,
    build_sample_matrix,
    train_cascade,
    train_stage,
)
from pibase.detector.detection import DetectionBox, DetectParams, detect, iou, scan_raw

__all__ = [
    "FEATURE_KINDS",
    "CascadeDecision",
    "CascadeModel",
    "CascadeStage",
    "CascadeTargets",
    "DetectParams",
    "DetectionBox",
    "HaarFeature",
    "StageResult",
    "TrainingError",
    "WeakClassifier",
    "build_sample_matrix",
    "detect",
    "eval_feature",
    "generate_features",
    "iou",
    "load_cascade",
    "scan_raw",
    "run_cascade",
    "save_cascade",
    "scale_rect",
    "train_cascade",
    "train_stage",
]
