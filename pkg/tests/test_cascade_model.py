import json

import numpy as np
import pytest

from pibase.detector import (
    CascadeDecision,
    CascadeModel,
    CascadeStage,
    HaarFeature,
    WeakClassifier,
    load_cascade,
    run_cascade,
    save_cascade,
)
from pibase.imaging import FormatError, GrayImage, Rect, integral


def _feature(kind="two-rect-vertical", box=Rect(0, 0, 8, 8)):
    top = Rect(box.x, box.y, box.w, box.h // 2)
    bottom = Rect(box.x, box.y + box.h // 2, box.w, box.h // 2)
    return HaarFeature(kind, ((top, 1), (bottom, -1)))


def _stage(threshold=0.0, n_weak=1, weak_threshold=0.0, polarity=1, alpha=1.0):
    weak = tuple(
        WeakClassifier(_feature(), weak_threshold, polarity, alpha) for _ in range(n_weak)
    )
    return CascadeStage(weak, threshold)


class TestValidation:
    def test_empty_stage_list_invalid(self):
        with pytest.raises(ValueError):
            CascadeModel(8, 8, ())

    def test_empty_weak_list_invalid(self):
        with pytest.raises(ValueError):
            CascadeStage((), 0.0)

    def test_polarity_must_be_unit(self):
        with pytest.raises(ValueError):
            WeakClassifier(_feature(), 0.0, 2, 1.0)

    def test_alpha_must_be_finite_nonnegative(self):
        with pytest.raises(ValueError):
            WeakClassifier(_feature(), 0.0, 1, float("nan"))
        with pytest.raises(ValueError):
            WeakClassifier(_feature(), 0.0, 1, -1.0)

    def test_stage_sizes_must_be_nondecreasing(self):
        with pytest.raises(ValueError):
            CascadeModel(8, 8, (_stage(n_weak=2), _stage(n_weak=1)))


class TestRunCascade:
    def _bright_top_image(self):
        px = np.zeros((8, 8), dtype=np.uint8)
        px[:4] = 200
        return GrayImage(px)

    def test_accepts_when_all_stages_pass(self):
        # bright-top image: feature value positive; polarity -1 votes +1 for
        # values above the threshold
        stage = _stage(threshold=0.0, polarity=-1, weak_threshold=10.0)
        model = CascadeModel(8, 8, (stage, stage))
        decision = run_cascade(model, integral(self._bright_top_image()), (0, 0))
        assert decision == CascadeDecision(True, 2)

    def test_rejects_at_first_failing_stage(self):
        passing = _stage(threshold=0.0, polarity=-1, weak_threshold=10.0)
        failing = _stage(threshold=0.0, polarity=1, weak_threshold=10.0)
        model = CascadeModel(8, 8, (failing, passing))
        decision = run_cascade(model, integral(self._bright_top_image()), (0, 0))
        assert not decision.accepted
        assert decision.rejected_at == 0
        assert decision.stages_evaluated == 1

    def test_early_exit_skips_later_stages_entirely(self):
        # the second stage's feature would raise BoundsError if evaluated
        failing = _stage(threshold=0.0, polarity=1, weak_threshold=10.0)
        out_of_bounds = CascadeStage(
            (WeakClassifier(_feature(box=Rect(0, 0, 64, 64)), 0.0, 1, 1.0),), 0.0
        )
        model = CascadeModel(8, 8, (failing, out_of_bounds))
        decision = run_cascade(model, integral(self._bright_top_image()), (0, 0))
        assert decision.rejected_at == 0  # no BoundsError: stage 2 never ran

    def test_prefix_monotonicity(self, rng):
        stages = tuple(
            _stage(threshold=-2.0, polarity=int(rng.choice([-1, 1])), weak_threshold=float(rng.normal()), n_weak=k + 1)
            for k in range(3)
        )
        model = CascadeModel(8, 8, stages)
        for _ in range(25):
            img = GrayImage(rng.integers(0, 256, (8, 8)).astype(np.uint8))
            decision = run_cascade(model, integral(img), (0, 0))
            if decision.accepted:
                for prefix_len in range(1, len(stages) + 1):
                    prefix = CascadeModel(8, 8, stages[:prefix_len])
                    assert run_cascade(prefix, integral(img), (0, 0)).accepted


class TestSerialization:
    def _model(self):
        return CascadeModel(
            8,
            8,
            (_stage(threshold=-0.5), _stage(n_weak=2, alpha=2.25)),
            metadata={"pool_size": 10},
        )

    def test_round_trip_equality(self):
        model = self._model()
        assert load_cascade(save_cascade(model)) == model

    def test_empty_weak_list_rejected(self):
        doc = json.loads(save_cascade(self._model()))
        doc["stages"][0]["weak"] = []
        with pytest.raises(FormatError):
            load_cascade(json.dumps(doc).encode())

    def test_nan_alpha_rejected(self):
        text = save_cascade(self._model()).decode()
        doc = json.loads(text)
        doc["stages"][0]["weak"][0]["alpha"] = "NaN"
        with pytest.raises(FormatError):
            load_cascade(json.dumps(doc).encode())
        # a bare JSON NaN literal is rejected too
        with pytest.raises(FormatError):
            load_cascade(text.replace("1.0", "NaN", 1).encode())

    def test_unknown_feature_kind_rejected(self):
        doc = json.loads(save_cascade(self._model()))
        doc["stages"][0]["weak"][0]["feature"]["kind"] = "five-rect-star"
        with pytest.raises(FormatError):
            load_cascade(json.dumps(doc).encode())

    def test_floats_survive_round_trip_exactly(self):
        stage = _stage(threshold=-0.1234567890123456, alpha=1.0000000000000002)
        model = CascadeModel(8, 8, (stage,))
        loaded = load_cascade(save_cascade(model))
        assert loaded.stages[0].threshold == stage.threshold
        assert loaded.stages[0].weak[0].alpha == stage.weak[0].alpha

    def test_not_json_rejected(self):
        with pytest.raises(FormatError):
            load_cascade(b"not json at all")
