"""AdaBoost stage training and cascade assembly.

Weak learners are decision stumps over variance-normalized Haar feature
values. Each boosting round scans every feature with a sorted-sample sweep:
candidate thresholds are the midpoints between adjacent distinct values
plus one sentinel beyond each extreme, the candidate with the lowest
weighted error wins, and ties resolve to (lowest feature index, polarity
+1 first, lowest cut). That fixed order keeps training fully deterministic
and lets an exhaustive oracle reproduce selections exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from pibase.imaging import GrayImage, integral, integral_squared
from pibase.detector.features import HaarFeature, count_features
from pibase.detector.model import CascadeModel, CascadeStage, WeakClassifier

# Errors at or below this are treated as an exact split (floating cumsum noise).
_EPS_ZERO = 1e-12
# Error clamp used for alpha so a perfect learner still gets a finite vote.
_EPS_CLAMP = 1e-10

_BLOCK = 2048  # features per sweep block, bounds peak memory


class TrainingError(RuntimeError):
    """Stage or cascade training could not reach its targets."""

    def __init__(self, message: str, partial_model: CascadeModel | None = None):
        super().__init__(message)
        self.partial_model = partial_model


@dataclass(frozen=True)
class StageResult:
    """A trained stage plus the rates it achieved on its training data."""

    stage: CascadeStage
    tpr: float
    fpr: float


@dataclass
class _SampleMatrix:
    """Precomputed normalized feature values, one row per pool feature."""

    values: np.ndarray  # (n_features, n_samples) float64
    base_w: int
    base_h: int


def _normalizers(samples: list[GrayImage]) -> np.ndarray:
    """1/std per sample window, with std clamped to >= 1."""
    inv = np.empty(len(samples), dtype=np.float64)
    for i, img in enumerate(samples):
        area = img.width * img.height
        s1 = int(integral(img).table[-1, -1])
        s2 = int(integral_squared(img).table[-1, -1])
        mean = s1 / area
        var = s2 / area - mean * mean
        inv[i] = 1.0 / math.sqrt(max(var, 1.0))
    return inv


def build_sample_matrix(samples: list[GrayImage], pool: list[HaarFeature]) -> _SampleMatrix:
    """Evaluate every pool feature on every base-window sample."""
    if not samples:
        raise ValueError("sample list must be non-empty")
    base_w, base_h = samples[0].width, samples[0].height
    for img in samples:
        if img.width != base_w or img.height != base_h:
            raise ValueError("all training samples must share the base window size")

    tables = np.stack([integral(img).table for img in samples])  # (N, H+1, W+1)
    inv = _normalizers(samples)

    values = np.empty((len(pool), len(samples)), dtype=np.float64)
    for fi, feat in enumerate(pool):
        acc = np.zeros(len(samples), dtype=np.int64)
        for r, weight in feat.rects:
            acc += weight * (
                tables[:, r.y2, r.x2]
                - tables[:, r.y, r.x2]
                - tables[:, r.y2, r.x]
                + tables[:, r.y, r.x]
            )
        values[fi] = acc * inv
    return _SampleMatrix(values, base_w, base_h)


@dataclass
class _Selection:
    feature_index: int
    threshold: float
    polarity: int
    error: float


def _best_stump(values: np.ndarray, weights: np.ndarray, is_pos: np.ndarray) -> _Selection:
    """Lowest-weighted-error stump over all features and candidate cuts."""
    n = values.shape[1]
    w_pos = np.where(is_pos, weights, 0.0)
    w_neg = np.where(is_pos, 0.0, weights)
    total_pos = float(w_pos.sum())
    total_neg = float(w_neg.sum())

    best: _Selection | None = None
    for start in range(0, values.shape[0], _BLOCK):
        block = values[start : start + _BLOCK]
        order = np.argsort(block, axis=1, kind="stable")
        sorted_v = np.take_along_axis(block, order, axis=1)
        cum_pos = np.cumsum(np.take_along_axis(np.broadcast_to(w_pos, block.shape), order, axis=1), axis=1)
        cum_neg = np.cumsum(np.take_along_axis(np.broadcast_to(w_neg, block.shape), order, axis=1), axis=1)

        # err at cut k: samples at sorted positions <= k sit on the "< theta" side
        err_plus = cum_neg + (total_pos - cum_pos)   # face iff value < theta
        err_minus = cum_pos + (total_neg - cum_neg)  # face iff value > theta
        # cuts between equal adjacent values are unrealizable
        invalid = sorted_v[:, :-1] >= sorted_v[:, 1:]
        err_plus[:, :-1][invalid] = np.inf
        err_minus[:, :-1][invalid] = np.inf

        rows = block.shape[0]
        sentinel_plus = np.full((rows, 1), total_pos)   # theta below min: none vote face
        sentinel_minus = np.full((rows, 1), total_neg)  # theta below min: all vote face
        candidates = np.concatenate([sentinel_plus, err_plus, sentinel_minus, err_minus], axis=1)

        flat_idx = np.argmin(candidates, axis=1)
        flat_err = candidates[np.arange(rows), flat_idx]
        row = int(np.argmin(flat_err))
        err = float(flat_err[row])
        if best is not None and err >= best.error:
            continue

        idx = int(flat_idx[row])
        sv = sorted_v[row]
        if idx <= n:
            polarity = 1
            cut = idx - 1
        else:
            polarity = -1
            cut = idx - n - 2
        if cut < 0:
            threshold = float(sv[0]) - 1.0
        elif cut == n - 1:
            threshold = float(sv[n - 1]) + 1.0
        else:
            threshold = (float(sv[cut]) + float(sv[cut + 1])) / 2.0
        best = _Selection(start + row, threshold, polarity, err)
    assert best is not None
    return best


def _stage_threshold(pos_scores: np.ndarray, min_tpr: float) -> float:
    """Lower the pass bar from 0 until at least min_tpr of positives clear it."""
    k = max(1, math.ceil(min_tpr * pos_scores.size))
    kth_largest = float(np.sort(pos_scores)[::-1][k - 1])
    return min(0.0, kth_largest)


def _train_stage_on_matrix(
    values: np.ndarray,
    is_pos: np.ndarray,
    min_tpr: float,
    max_fpr: float,
    round_cap: int,
    min_rounds: int,
    pool: list[HaarFeature],
    observer=None,
) -> StageResult:
    n_pos = int(is_pos.sum())
    n_neg = int((~is_pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("need at least one positive and one negative sample")
    if not (0.0 < max_fpr < 1.0) or not (0.0 < min_tpr <= 1.0):
        raise ValueError("targets must satisfy 0 < max_fpr < 1 and 0 < min_tpr <= 1")

    weights = np.where(is_pos, 0.5 / n_pos, 0.5 / n_neg)
    y = np.where(is_pos, 1, -1)
    scores = np.zeros(values.shape[1], dtype=np.float64)
    weak: list[WeakClassifier] = []

    while True:
        pick = _best_stump(values, weights, is_pos)
        eps = max(0.0, pick.error)
        if eps >= 0.5:
            raise TrainingError(
                f"no weak learner beats chance (best weighted error {eps:.4f})"
            )
        perfect = eps <= _EPS_ZERO
        eps_c = min(max(eps, _EPS_CLAMP), 1.0 - _EPS_CLAMP)
        alpha = math.log((1.0 - eps_c) / eps_c)

        row = values[pick.feature_index]
        votes = np.where(pick.polarity * row < pick.polarity * pick.threshold, 1, -1)
        weak.append(
            WeakClassifier(
                feature=pool[pick.feature_index],
                threshold=pick.threshold,
                polarity=pick.polarity,
                alpha=alpha,
            )
        )
        scores = scores + alpha * votes

        threshold = _stage_threshold(scores[is_pos], min_tpr)
        tpr = float(np.mean(scores[is_pos] >= threshold))
        fpr = float(np.mean(scores[~is_pos] >= threshold))

        if perfect:
            break
        if fpr <= max_fpr and len(weak) >= max(min_rounds, 1):
            break
        if len(weak) >= round_cap:
            raise TrainingError(
                f"stage could not reach fpr<={max_fpr} within {round_cap} rounds "
                f"(got {fpr:.4f})"
            )
        beta = eps_c / (1.0 - eps_c)
        correct = votes == y
        weights = np.where(correct, weights * beta, weights)
        weights = weights / weights.sum()
        if observer is not None:
            observer(len(weak), eps, weights)

    stage = CascadeStage(tuple(weak), threshold)
    return StageResult(stage, tpr=tpr, fpr=fpr)


def train_stage(
    positives: list[GrayImage],
    negatives: list[GrayImage],
    pool: list[HaarFeature],
    min_tpr: float,
    max_fpr: float,
    round_cap: int = 200,
    min_rounds: int = 0,
    observer=None,
) -> StageResult:
    """Boost one attentional stage from base-window samples.

    ``observer(round_index, weighted_error, weights)`` is invoked after
    each completed reweighting, for diagnostics.
    """
    if not positives or not negatives:
        raise ValueError("positives and negatives must both be non-empty")
    matrix = build_sample_matrix(list(positives) + list(negatives), pool)
    is_pos = np.zeros(matrix.values.shape[1], dtype=bool)
    is_pos[: len(positives)] = True
    return _train_stage_on_matrix(
        matrix.values, is_pos, min_tpr, max_fpr, round_cap, min_rounds, pool, observer
    )


def _stage_scores(values: np.ndarray, stage: CascadeStage, feature_index: dict[int, int]) -> np.ndarray:
    scores = np.zeros(values.shape[1], dtype=np.float64)
    for wc in stage.weak:
        row = values[feature_index[id(wc.feature)]]
        votes = np.where(wc.polarity * row < wc.polarity * wc.threshold, 1, -1)
        scores += wc.alpha * votes
    return scores


@dataclass
class CascadeTargets:
    """Per-stage and cumulative goals for cascade assembly."""

    per_stage_tpr: float = 0.995
    per_stage_fpr: float = 0.5
    overall_fpr: float = 0.05
    round_cap: int = 200
    stage_cap: int = 20


def train_cascade(
    positives: list[GrayImage],
    negatives: list[GrayImage],
    pool: list[HaarFeature],
    targets: CascadeTargets | None = None,
    metadata: dict | None = None,
) -> CascadeModel:
    """Append stages until the cumulative false-positive rate goal is met.

    Each new stage trains against only the negatives the cascade so far
    still accepts, so stage FPRs multiply. Later stages are never allowed
    fewer boosting rounds than the stage before them.
    """
    targets = targets or CascadeTargets()
    if not positives or not negatives:
        raise ValueError("positives and negatives must both be non-empty")

    matrix = build_sample_matrix(list(positives) + list(negatives), pool)
    n_pos = len(positives)
    n_neg = len(negatives)
    pos_cols = np.arange(n_pos)
    neg_cols = np.arange(n_pos, n_pos + n_neg)
    feature_index = {id(f): i for i, f in enumerate(pool)}

    stages: list[CascadeStage] = []
    stage_fprs: list[float] = []
    stage_tprs: list[float] = []
    cumulative_fpr = 1.0

    def partial() -> CascadeModel | None:
        if not stages:
            return None
        return CascadeModel(
            matrix.base_w, matrix.base_h, tuple(stages), _metadata()
        )

    def _metadata() -> dict:
        meta = dict(metadata or {})
        meta.update(
            {
                "pool_size": len(pool),
                "enumerated_feature_count": count_features(matrix.base_w, matrix.base_h),
                "positives": n_pos,
                "negatives": n_neg,
                "stage_fpr": stage_fprs,
                "stage_tpr": stage_tprs,
                "cumulative_fpr": cumulative_fpr,
                "targets": {
                    "per_stage_tpr": targets.per_stage_tpr,
                    "per_stage_fpr": targets.per_stage_fpr,
                    "overall_fpr": targets.overall_fpr,
                },
            }
        )
        return meta

    while len(stages) < targets.stage_cap:
        cols = np.concatenate([pos_cols, neg_cols])
        is_pos = np.zeros(cols.size, dtype=bool)
        is_pos[:n_pos] = True
        min_rounds = len(stages[-1].weak) if stages else 0
        try:
            result = _train_stage_on_matrix(
                matrix.values[:, cols],
                is_pos,
                targets.per_stage_tpr,
                targets.per_stage_fpr,
                targets.round_cap,
                min_rounds,
                pool,
            )
        except TrainingError as exc:
            raise TrainingError(str(exc), partial_model=partial()) from None

        stages.append(result.stage)
        stage_fprs.append(result.fpr)
        stage_tprs.append(result.tpr)

        if neg_cols.size:
            neg_scores = _stage_scores(matrix.values[:, neg_cols], result.stage, feature_index)
            neg_cols = neg_cols[neg_scores >= result.stage.threshold]
        cumulative_fpr = neg_cols.size / n_neg
        if cumulative_fpr <= targets.overall_fpr or neg_cols.size == 0:
            break
    else:
        raise TrainingError(
            f"stage cap {targets.stage_cap} reached with cumulative fpr "
            f"{cumulative_fpr:.4f} > {targets.overall_fpr}",
            partial_model=partial(),
        )

    return CascadeModel(matrix.base_w, matrix.base_h, tuple(stages), _metadata())
