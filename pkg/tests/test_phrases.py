from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crowdatoms.atoms import AtomSet, MotionAtom
from crowdatoms.errors import DataError
from crowdatoms.ingest import CHANNELS
from crowdatoms.phrases import (
    MotionPhrase,
    PhraseUnit,
    dis,
    mine_phrases,
    phrase_response,
    rep,
    response_from_matrix,
    top_set,
)
from crowdatoms.similarity import ChannelNormalizers
from crowdatoms.svm import SvmModel
from testutil import make_segment, phrase_response_brute, rep_dis_brute


def unit(atom, anchor, window=0):
    return PhraseUnit(atom, anchor, window)


def phrase(*units):
    return MotionPhrase(tuple(units))


class TestPhraseStructure:
    def test_units_sorted_by_anchor(self):
        p = phrase(unit(0, 2), unit(1, 0))
        assert [u.anchor for u in p.units] == [0, 2]

    def test_duplicate_unit_rejected(self):
        with pytest.raises(DataError):
            phrase(unit(0, 1), unit(0, 1))

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            MotionPhrase(())

    def test_encode(self):
        p = phrase(unit(1, 2, 1), unit(0, 0, 1))
        assert p.encode() == "unit(0,0,1);unit(1,2,1)"


class TestPhraseResponse:
    def test_wide_window_is_max_pooling(self):
        matrix = np.array([[0.3, 0.9, -0.2, 0.5]])
        p = phrase(unit(0, 0, window=3))
        assert response_from_matrix(p, matrix) == pytest.approx(0.9)

    def test_two_units_min_of_max(self):
        matrix = np.array([[0.9, 0.1], [0.2, 0.8]])
        p = phrase(unit(0, 0, 0), unit(1, 1, 0))
        assert response_from_matrix(p, matrix) == pytest.approx(0.8)
        swapped = phrase(unit(0, 1, 0), unit(1, 0, 0))
        assert response_from_matrix(swapped, matrix) == pytest.approx(0.1)

    def test_anchor_clamps_to_short_video(self):
        matrix = np.array([[0.4, 0.6]])
        p = phrase(unit(0, 7, 0))
        assert response_from_matrix(p, matrix) == pytest.approx(0.6)

    def test_unknown_atom(self):
        with pytest.raises(DataError, match="unknown atom"):
            response_from_matrix(phrase(unit(5, 0)), np.zeros((2, 3)))

    def test_full_api_with_atom_set(self):
        w = np.zeros(8)
        w[0] = 1.0
        atoms = AtomSet(
            [MotionAtom(0, SvmModel(w=w, b=0.0, epsilon=0.0, c_reg=1.0,
                                    mode="classification"))],
            ChannelNormalizers(m={ch: 1.0 for ch in CHANNELS}),
        )
        seg = make_segment("v", 0, {ch: [1.0, 0.0] for ch in CHANNELS})
        assert phrase_response(phrase(unit(0, 0, 0)), [seg], atoms) == pytest.approx(1.0)
        with pytest.raises(DataError):
            phrase_response(phrase(unit(0, 0, 0)), [], atoms)

    @settings(max_examples=150, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_matches_brute_force_exactly(self, seed):
        rng = np.random.default_rng(seed)
        n_atoms = int(rng.integers(1, 5))
        n_seg = int(rng.integers(1, 9))
        matrix = rng.standard_normal((n_atoms, n_seg))
        n_units = int(rng.integers(1, 5))
        units, used = [], set()
        for _ in range(n_units):
            a = int(rng.integers(n_atoms))
            anchor = int(rng.integers(0, 10))
            if (a, anchor) in used:
                continue
            used.add((a, anchor))
            units.append((a, anchor, int(rng.integers(0, 3))))
        if not units:
            units = [(0, 0, 0)]
        p = MotionPhrase(tuple(PhraseUnit(*u) for u in units))
        got = response_from_matrix(p, matrix)
        want = phrase_response_brute([(u.atom_id, u.anchor, u.window) for u in p.units],
                                     matrix.tolist())
        assert got == want  # exact: same floats, only min/max applied

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_monotone_and(self, seed):
        rng = np.random.default_rng(seed)
        matrix = rng.standard_normal((3, 5))
        base = phrase(unit(0, 1, 1))
        extended = phrase(unit(0, 1, 1), unit(int(rng.integers(3)), 3, 1))
        assert response_from_matrix(extended, matrix) <= response_from_matrix(base, matrix)


class TestTopSet:
    def test_hand_ranked(self):
        responses = {"V1": 0.9, "V2": 0.1, "V3": 0.5}
        assert top_set(responses, 2) == {"V1", "V3"}

    def test_full_set(self):
        responses = {"a": 1.0, "b": 2.0}
        assert top_set(responses, 2) == {"a", "b"}

    def test_ties_lexicographic(self):
        responses = {"b": 0.5, "a": 0.5, "c": 0.5}
        assert top_set(responses, 1) == {"a"}

    def test_t_too_large(self):
        with pytest.raises(DataError):
            top_set({"a": 1.0}, 2)


class TestRepDis:
    def test_rep_mean(self):
        responses = {"V1": 0.5, "V2": 0.7, "V3": -1.0}
        labels = {"V1": "c", "V2": "c", "V3": "other"}
        assert rep(responses, labels, "c", 2) == pytest.approx(0.6)

    def test_rep_empty_set_is_zero(self):
        responses = {"V1": 0.9, "V2": 0.1}
        labels = {"V1": "a", "V2": "b"}
        assert rep(responses, labels, "b", 1) == 0.0

    def test_rep_singleton(self):
        responses = {"V1": 0.9, "V2": 0.1}
        labels = {"V1": "a", "V2": "b"}
        assert rep(responses, labels, "a", 1) == pytest.approx(0.9)

    def test_rep_unknown_class(self):
        with pytest.raises(DataError):
            rep({"V1": 1.0}, {"V1": "a"}, "zz", 1)

    def test_dis_subtracts_best_other(self):
        responses = {"V1": 0.8, "V2": 0.3}
        labels = {"V1": "c1", "V2": "c2"}
        score = dis(responses, labels, "c1", 2)
        assert score.dis == pytest.approx(0.5)
        assert score.best_class == "c1"
        assert score.rep_per_class == {"c1": pytest.approx(0.8), "c2": pytest.approx(0.3)}

    def test_single_class_dis_equals_rep(self):
        responses = {"V1": 0.8, "V2": 0.6}
        labels = {"V1": "c", "V2": "c"}
        score = dis(responses, labels, "c", 2)
        assert score.dis == pytest.approx(0.7)

    def test_symmetric_classes_give_zero(self):
        responses = {"V1": 0.5, "V2": 0.5}
        labels = {"V1": "a", "V2": "b"}
        assert dis(responses, labels, "a", 2).dis == pytest.approx(0.0)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_matches_materialized_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 12))
        ids = [f"v{i:02d}" for i in range(n)]
        responses = {v: float(np.round(rng.standard_normal(), 3)) for v in ids}
        pool = ["a", "b", "c"][: int(rng.integers(1, 4))]
        labels = {v: pool[int(rng.integers(len(pool)))] for v in ids}
        classes = sorted(set(labels.values()))
        t = int(rng.integers(1, n + 1))
        target = classes[int(rng.integers(len(classes)))]
        want_rep, want_dis = rep_dis_brute(responses, labels, target, t)
        score = dis(responses, labels, target, t)
        assert score.dis == pytest.approx(want_dis, abs=1e-12)
        for c in classes:
            assert score.rep_per_class[c] == pytest.approx(want_rep[c], abs=1e-12)
            assert rep(responses, labels, c, t) == pytest.approx(want_rep[c], abs=1e-12)


def ab_order_fixture():
    """Two atoms; class c1 videos fire atom 0 then atom 1, class c2 the
    reverse.  Response values are chosen so the two-unit conjunction
    strictly beats every single unit."""
    matrices = {
        "c1_v0": np.array([[1.0, -1.0], [-1.0, 1.0]]),
        "c1_v1": np.array([[1.0, -1.0], [-1.0, 1.0]]),
        "c2_v0": np.array([[-0.5, 1.0], [1.0, -1.5]]),
        "c2_v1": np.array([[-1.5, 1.0], [1.0, -0.5]]),
    }
    labels = {"c1_v0": "c1", "c1_v1": "c1", "c2_v0": "c2", "c2_v1": "c2"}
    return matrices, labels


def dummy_atom_set(n):
    zero = SvmModel(w=np.zeros(8), b=0.0, epsilon=0.0, c_reg=1.0,
                    mode="classification")
    return AtomSet([MotionAtom(i, zero) for i in range(n)],
                   ChannelNormalizers(m={ch: 1.0 for ch in CHANNELS}))


def exhaustive_best(matrices, labels, target, t, max_units, n_atoms, n_anchors, window):
    """Independent oracle: enumerate every phrase of <= max_units units."""
    all_units = [(a, s, window) for s in range(n_anchors) for a in range(n_atoms)]
    best = None
    for size in range(1, max_units + 1):
        for combo in combinations(all_units, size):
            if len({(a, s) for a, s, _ in combo}) != size:
                continue
            responses = {
                vid: phrase_response_brute(combo, m.tolist())
                for vid, m in matrices.items()
            }
            _, d = rep_dis_brute(responses, labels, target, t)
            if best is None or d > best[1]:
                best = (combo, d)
    return best


class TestMinePhrases:
    def test_order_sensitive_two_class_fixture(self):
        matrices, labels = ab_order_fixture()
        mined = mine_phrases(
            dummy_atom_set(2), matrices, labels,
            per_class_budget=3, max_units=2, t=4, window=0, n_anchors=2,
        )
        c1 = [(p, s) for p, s in mined if s.best_class == "c1"]
        top_phrase, top_score = c1[0]
        assert {(u.atom_id, u.anchor) for u in top_phrase.units} == {(0, 0), (1, 1)}
        # its dis strictly exceeds every 1-unit phrase's dis
        singles = exhaustive_best(matrices, labels, "c1", 4, 1, 2, 2, 0)
        assert top_score.dis > singles[1]
        # and matches the exhaustive <=2-unit oracle
        oracle = exhaustive_best(matrices, labels, "c1", 4, 2, 2, 2, 0)
        assert top_score.dis == pytest.approx(oracle[1], abs=1e-12)

    def test_max_units_one_is_ranked_enumeration(self):
        matrices, labels = ab_order_fixture()
        mined = mine_phrases(
            dummy_atom_set(2), matrices, labels,
            per_class_budget=8, max_units=1, t=4, window=0, n_anchors=2,
        )
        for cls in ("c1", "c2"):
            got = [(p, s) for p, s in mined if s.best_class == cls]
            assert all(len(p.units) == 1 for p, _ in got)
            assert len(got) == 4  # 2 atoms x 2 anchors, budget larger
            dises = [s.dis for _, s in got]
            assert dises == sorted(dises, reverse=True)

    def test_singleton_candidate_space(self):
        matrices = {"v0": np.array([[0.5]]), "v1": np.array([[-0.5]])}
        labels = {"v0": "a", "v1": "b"}
        mined = mine_phrases(
            dummy_atom_set(1), matrices, labels,
            per_class_budget=5, max_units=2, t=2, window=0, n_anchors=1,
        )
        per_class = {}
        for p, s in mined:
            per_class.setdefault(s.best_class, []).append(p)
        assert all(len(v) == 1 for v in per_class.values())

    def test_budget_exceeding_candidates_returns_all(self):
        matrices, labels = ab_order_fixture()
        mined = mine_phrases(
            dummy_atom_set(2), matrices, labels,
            per_class_budget=100, max_units=1, t=4, window=0, n_anchors=2,
        )
        assert len([1 for _, s in mined if s.best_class == "c1"]) == 4

    def test_mined_score_never_below_seed(self):
        matrices, labels = ab_order_fixture()
        singles = {}
        for p, s in mine_phrases(dummy_atom_set(2), matrices, labels,
                                 per_class_budget=100, max_units=1, t=4,
                                 window=0, n_anchors=2):
            singles.setdefault(s.best_class, []).append(s.dis)
        mined = mine_phrases(dummy_atom_set(2), matrices, labels,
                             per_class_budget=4, max_units=3, t=4,
                             window=0, n_anchors=2)
        best_seed = {c: max(v) for c, v in singles.items()}
        for p, s in mined:
            if s.dis == max(x.dis for q, x in mined if x.best_class == s.best_class):
                assert s.dis >= best_seed[s.best_class] - 1e-12

    def test_deterministic(self):
        matrices, labels = ab_order_fixture()
        kwargs = dict(per_class_budget=4, max_units=2, t=3, window=0, n_anchors=2)
        a = mine_phrases(dummy_atom_set(2), matrices, labels, **kwargs)
        b = mine_phrases(dummy_atom_set(2), matrices, labels, **kwargs)
        assert [(p.key(), s.dis) for p, s in a] == [(p.key(), s.dis) for p, s in b]
