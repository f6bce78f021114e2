import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crowdatoms.encode import VideoRepresentation
from crowdatoms.errors import DataError
from crowdatoms.evaluate import LabeledScore, report, roc_auc, roc_csv, score_clips
from crowdatoms.svm import MulticlassModel, SvmModel
from testutil import auc_pair_counting


def scores_from(pos, neg):
    out = [LabeledScore(f"p{i}", s, 1) for i, s in enumerate(pos)]
    out += [LabeledScore(f"n{i}", s, 0) for i, s in enumerate(neg)]
    return out


class TestRocAuc:
    def test_perfect_ranking(self):
        assert roc_auc(scores_from([0.9, 0.8], [0.2, 0.1])).auc == 1.0

    def test_all_tied_is_half(self):
        assert roc_auc(scores_from([0.5, 0.5], [0.5, 0.5])).auc == 0.5

    def test_hand_counted(self):
        # pairs: (.9,.6)+ (.9,.2)+ (.4,.6)- (.4,.2)+ -> 3/4
        assert roc_auc(scores_from([0.9, 0.4], [0.6, 0.2])).auc == 0.75

    def test_single_class_rejected(self):
        with pytest.raises(DataError):
            roc_auc(scores_from([0.9], []))
        with pytest.raises(DataError):
            roc_auc(scores_from([], [0.1]))

    def test_roc_endpoints_and_monotonicity(self):
        result = roc_auc(scores_from([0.9, 0.5, 0.5], [0.5, 0.2]))
        assert result.points[0] == (0.0, 0.0)
        assert result.points[-1] == (1.0, 1.0)
        for (f0, t0), (f1, t1) in zip(result.points, result.points[1:]):
            assert f1 >= f0 and t1 >= t0

    def test_trapezoid_area_equals_pair_counting(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            pos = rng.integers(0, 5, size=rng.integers(1, 8)) / 4.0
            neg = rng.integers(0, 5, size=rng.integers(1, 8)) / 4.0
            result = roc_auc(scores_from(pos, neg))
            area = 0.0
            for (f0, t0), (f1, t1) in zip(result.points, result.points[1:]):
                area += (f1 - f0) * (t0 + t1) / 2.0
            assert result.auc == pytest.approx(area, abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_exact_rational_pair_counting(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 50))
        truth = np.zeros(n, dtype=int)
        truth[: int(rng.integers(1, n))] = 1
        rng.shuffle(truth)
        if truth.all() or not truth.any():
            truth[0] = 1 - truth[0]
        values = rng.integers(0, 10, size=n) / 8.0  # ties likely
        scores = [LabeledScore(f"s{i}", float(values[i]), int(truth[i])) for i in range(n)]
        assert roc_auc(scores).auc == float(auc_pair_counting(scores))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_invariance_under_monotone_transform(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 30))
        truth = rng.integers(0, 2, size=n)
        if truth.all() or not truth.any():
            truth[0] = 1 - truth[0]
        values = rng.standard_normal(n)
        base = [LabeledScore(f"s{i}", float(values[i]), int(truth[i])) for i in range(n)]
        for transform in (lambda v: 3.0 * v + 7.0, math.exp, lambda v: v**3):
            mapped = [LabeledScore(s.id, transform(s.score), s.truth) for s in base]
            assert roc_auc(mapped).auc == pytest.approx(roc_auc(base).auc, abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_label_flip_maps_auc_to_complement(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 30))
        truth = rng.integers(0, 2, size=n)
        if truth.all() or not truth.any():
            truth[0] = 1 - truth[0]
        values = rng.integers(0, 6, size=n) / 4.0
        base = [LabeledScore(f"s{i}", float(values[i]), int(truth[i])) for i in range(n)]
        flipped = [LabeledScore(s.id, s.score, 1 - s.truth) for s in base]
        assert roc_auc(flipped).auc == pytest.approx(1.0 - roc_auc(base).auc, abs=1e-12)


def bundle_with_bias(classes, biases):
    models = [
        SvmModel(w=np.zeros(2), b=b, epsilon=0.0, c_reg=1.0, mode="classification")
        for b in biases
    ]
    return MulticlassModel(classes=list(classes), models=models)


class TestScoreClips:
    def test_constant_model(self):
        bundle = bundle_with_bias(["anomaly", "normal"], [0.3, 0.0])
        reps = [VideoRepresentation(f"v{i}", np.zeros(2)) for i in range(3)]
        truth = {f"v{i}": 1 for i in range(3)}
        out = score_clips(bundle, reps, truth)
        assert [s.score for s in out] == [pytest.approx(0.3)] * 3

    def test_fixture_dot_products(self):
        m_anom = SvmModel(w=np.array([2.0, -1.0]), b=0.5, epsilon=0.0, c_reg=1.0,
                          mode="classification")
        m_norm = SvmModel(w=np.zeros(2), b=0.0, epsilon=0.0, c_reg=1.0,
                          mode="classification")
        bundle = MulticlassModel(classes=["event", "normal"], models=[m_anom, m_norm])
        reps = [
            VideoRepresentation("a", np.array([1.0, 1.0])),
            VideoRepresentation("b", np.array([0.0, 2.0])),
        ]
        out = score_clips(bundle, reps, {"a": 1, "b": 0})
        assert out[0].score == pytest.approx(2.0 - 1.0 + 0.5)
        assert out[1].score == pytest.approx(-2.0 + 0.5)
        assert [s.truth for s in out] == [1, 0]

    def test_multiclass_max_over_non_normal(self):
        bundle = bundle_with_bias(["a", "b", "normal"], [0.2, 0.7, 5.0])
        reps = [VideoRepresentation("v", np.zeros(2))]
        out = score_clips(bundle, reps, {"v": 0})
        assert out[0].score == pytest.approx(0.7)

    def test_empty_video_set(self):
        bundle = bundle_with_bias(["a", "normal"], [0.0, 0.0])
        assert score_clips(bundle, [], {}) == []

    def test_all_normal_classes_rejected(self):
        bundle = bundle_with_bias(["normal"], [0.0])
        with pytest.raises(DataError):
            score_clips(bundle, [], {}, normal_label="normal")


class TestReport:
    def test_reference_rows(self):
        result = roc_auc(scores_from([0.9], [0.1]))
        text = report(result, baselines=True)
        assert "MDT" in text and "0.78" in text
        assert "SF" in text and "0.74" in text
        assert "MPPCA" in text and "0.65" in text
        assert "Ours" in text and "1.00" in text
        assert "literature" in text

    def test_formats_two_decimals(self):
        result = roc_auc(scores_from([0.9], [0.1]))
        assert "1.00" in report(result, baselines=False)

    def test_without_baselines(self):
        result = roc_auc(scores_from([0.9], [0.1]))
        text = report(result, baselines=False)
        assert "MDT" not in text and "Ours" in text

    def test_roc_csv(self):
        result = roc_auc(scores_from([0.9], [0.1]))
        lines = roc_csv(result).splitlines()
        assert lines[0] == "fpr,tpr"
        assert lines[1] == "0.0,0.0"
        assert lines[-1] == "1.0,1.0"
