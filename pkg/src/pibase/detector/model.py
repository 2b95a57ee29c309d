"""Cascade model types, window evaluation, and JSON (de)serialization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from pibase.imaging import FormatError, IntegralImage, Rect
from pibase.detector.features import FEATURE_KINDS, HaarFeature, eval_feature


@dataclass(frozen=True)
class WeakClassifier:
    """Single-feature threshold stump with an ensemble vote weight.

    Votes +1 (face) when polarity * value < polarity * threshold, else -1.
    Feature values are variance-normalized before comparison.
    """

    feature: HaarFeature
    threshold: float
    polarity: int
    alpha: float

    def __post_init__(self):
        if self.polarity not in (-1, 1):
            raise ValueError(f"polarity must be +1 or -1, got {self.polarity}")
        if not math.isfinite(self.alpha) or self.alpha < 0:
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha}")
        if not math.isfinite(self.threshold):
            raise ValueError("threshold must be finite")

    def vote(self, value: float) -> int:
        return 1 if self.polarity * value < self.polarity * self.threshold else -1


@dataclass(frozen=True)
class CascadeStage:
    """Ordered weak classifiers; passes when the weighted vote sum clears
    the stage threshold."""

    weak: tuple[WeakClassifier, ...]
    threshold: float

    def __post_init__(self):
        if not self.weak:
            raise ValueError("stage must contain at least one weak classifier")
        if not math.isfinite(self.threshold):
            raise ValueError("stage threshold must be finite")

    def score(self, ii: IntegralImage, origin, scale: float, inv_norm: float) -> float:
        total = 0.0
        for wc in self.weak:
            value = eval_feature(wc.feature, ii, origin, scale, inv_norm)
            total += wc.alpha * wc.vote(value)
        return total

    def passes(self, ii: IntegralImage, origin, scale: float, inv_norm: float) -> bool:
        return self.score(ii, origin, scale, inv_norm) >= self.threshold


@dataclass(frozen=True)
class CascadeModel:
    """Staged ensemble over a fixed base window.

    Stage sizes are non-decreasing: cheap stages run first and discard
    most windows before the expensive ones are consulted.
    """

    base_w: int
    base_h: int
    stages: tuple[CascadeStage, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.base_w < 4 or self.base_h < 4:
            raise ValueError("base window must be at least 4x4")
        if not self.stages:
            raise ValueError("cascade must contain at least one stage")
        sizes = [len(s.weak) for s in self.stages]
        for earlier, later in zip(sizes, sizes[1:]):
            if earlier > later:
                raise ValueError(
                    f"stage sizes must be non-decreasing, got {sizes}"
                )


@dataclass(frozen=True)
class CascadeDecision:
    """Outcome of running a window through the cascade."""

    accepted: bool
    stages_evaluated: int
    rejected_at: int | None = None


def run_cascade(
    model: CascadeModel,
    ii: IntegralImage,
    origin: tuple[int, int],
    scale: float = 1.0,
    inv_norm: float = 1.0,
) -> CascadeDecision:
    """Evaluate stages in order, stopping at the first failure."""
    for index, stage in enumerate(model.stages):
        if not stage.passes(ii, origin, scale, inv_norm):
            return CascadeDecision(False, index + 1, rejected_at=index)
    return CascadeDecision(True, len(model.stages))


def _feature_to_json(f: HaarFeature) -> dict:
    return {
        "kind": f.kind,
        "rects": [[r.x, r.y, r.w, r.h, w] for r, w in f.rects],
    }


def _feature_from_json(obj) -> HaarFeature:
    if not isinstance(obj, dict):
        raise FormatError("feature must be an object")
    kind = obj.get("kind")
    if kind not in FEATURE_KINDS:
        raise FormatError(f"unknown feature kind {kind!r}")
    rects_raw = obj.get("rects")
    if not isinstance(rects_raw, list) or not rects_raw:
        raise FormatError("feature rects must be a non-empty list")
    rects = []
    for item in rects_raw:
        if not isinstance(item, list) or len(item) != 5:
            raise FormatError(f"rect entry must be [x, y, w, h, weight], got {item!r}")
        x, y, w, h, weight = item
        if not all(isinstance(v, int) for v in (x, y, w, h, weight)):
            raise FormatError("rect coordinates and weight must be integers")
        try:
            rects.append((Rect(x, y, w, h), weight))
        except ValueError as exc:
            raise FormatError(str(exc)) from None
    try:
        return HaarFeature(kind, tuple(rects))
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def _finite(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise FormatError(f"{what} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise FormatError(f"{what} must be finite, got {value!r}")
    return float(value)


def save_cascade(model: CascadeModel) -> bytes:
    """Serialize to the canonical cascade JSON schema."""
    doc = {
        "base_window": [model.base_w, model.base_h],
        "stages": [
            {
                "threshold": stage.threshold,
                "weak": [
                    {
                        "feature": _feature_to_json(wc.feature),
                        "threshold": wc.threshold,
                        "polarity": wc.polarity,
                        "alpha": wc.alpha,
                    }
                    for wc in stage.weak
                ],
            }
            for stage in model.stages
        ],
        "metadata": model.metadata,
    }
    # json repr of floats is shortest round-trip (>= 15 significant digits)
    return json.dumps(doc, indent=1).encode("utf-8")


def load_cascade(data: bytes) -> CascadeModel:
    """Parse and validate a cascade JSON document."""

    def reject_constant(token):
        raise FormatError(f"non-finite number {token!r} in cascade file")

    try:
        doc = json.loads(data.decode("utf-8"), parse_constant=reject_constant)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"cascade file is not valid JSON: {exc}") from None

    if not isinstance(doc, dict):
        raise FormatError("cascade document must be an object")
    base = doc.get("base_window")
    if (
        not isinstance(base, list)
        or len(base) != 2
        or not all(isinstance(v, int) and v >= 4 for v in base)
    ):
        raise FormatError(f"invalid base_window {base!r}")
    stages_raw = doc.get("stages")
    if not isinstance(stages_raw, list) or not stages_raw:
        raise FormatError("cascade must declare at least one stage")

    stages = []
    for sidx, stage_obj in enumerate(stages_raw):
        if not isinstance(stage_obj, dict):
            raise FormatError(f"stage {sidx} must be an object")
        weak_raw = stage_obj.get("weak")
        if not isinstance(weak_raw, list) or not weak_raw:
            raise FormatError(f"stage {sidx} has an empty weak-classifier list")
        weak = []
        for widx, wc_obj in enumerate(weak_raw):
            if not isinstance(wc_obj, dict):
                raise FormatError(f"weak classifier {sidx}/{widx} must be an object")
            polarity = wc_obj.get("polarity")
            if polarity not in (-1, 1):
                raise FormatError(f"polarity must be +1 or -1, got {polarity!r}")
            try:
                weak.append(
                    WeakClassifier(
                        feature=_feature_from_json(wc_obj.get("feature")),
                        threshold=_finite(wc_obj.get("threshold"), "weak threshold"),
                        polarity=polarity,
                        alpha=_finite(wc_obj.get("alpha"), "alpha"),
                    )
                )
            except ValueError as exc:
                raise FormatError(str(exc)) from None
        try:
            stages.append(
                CascadeStage(tuple(weak), _finite(stage_obj.get("threshold"), "stage threshold"))
            )
        except ValueError as exc:
            raise FormatError(str(exc)) from None

    metadata = doc.get("metadata", {})
    if not isinstance(metadata, dict):
        raise FormatError("metadata must be an object")
    try:
        return CascadeModel(base[0], base[1], tuple(stages), metadata)
    except ValueError as exc:
        raise FormatError(str(exc)) from None
