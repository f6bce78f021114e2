"""AND/OR motion phrases over atoms, scored by representativeness (Rep)
and uniqueness (Dis), mined bottom-up with strict-improvement greedy
extension.

A phrase unit fires via OR: the maximum atom response inside a temporal
window around its anchor segment.  The phrase fires via AND: the minimum
over its units.  Rep(P, c) is the mean response over class-c videos that
rank inside P's top response set; Dis(P, c) subtracts the best Rep among
the other classes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .atoms import AtomSet, response_matrix
from .errors import DataError
from .ingest import SegmentHistogram


@dataclass(frozen=True)
class PhraseUnit:
    atom_id: int
    anchor: int  # segment slot index
    window: int  # max temporal displacement, in segments


@dataclass
class MotionPhrase:
    units: tuple[PhraseUnit, ...]
    class_hint: str | None = None

    def __post_init__(self) -> None:
        if not self.units:
            raise DataError("phrase needs at least one unit")
        units = tuple(sorted(self.units, key=lambda u: (u.anchor, u.atom_id)))
        keys = [(u.atom_id, u.anchor) for u in units]
        if len(set(keys)) != len(keys):
            raise DataError("phrase units must have distinct (atom, anchor) pairs")
        self.units = units

    def key(self) -> tuple:
        """Canonical identity, used for dedup and deterministic ordering."""
        return tuple((u.anchor, u.atom_id, u.window) for u in self.units)

    def encode(self) -> str:
        """Human-readable unit list: ``unit(atom,anchor,window);...``."""
        return ";".join(f"unit({u.atom_id},{u.anchor},{u.window})" for u in self.units)


@dataclass
class PhraseScore:
    rep_per_class: dict[str, float] = field(default_factory=dict)
    dis: float = 0.0
    best_class: str = ""


def response_from_matrix(phrase: MotionPhrase, matrix: np.ndarray) -> float:
    """min over units of (max atom response within the unit's window).

    `matrix` is the atoms x segments response matrix of one video; anchors
    beyond the last segment clamp into range, so every unit always sees at
    least one segment.
    """
    n_segments = matrix.shape[1]
    if n_segments == 0:
        raise DataError("video has no segments")
    value = np.inf
    for unit in phrase.units:
        if not 0 <= unit.atom_id < matrix.shape[0]:
            raise DataError(f"unknown atom id {unit.atom_id}")
        anchor = min(max(unit.anchor, 0), n_segments - 1)
        lo = max(0, anchor - unit.window)
        hi = min(n_segments - 1, anchor + unit.window)
        value = min(value, float(matrix[unit.atom_id, lo : hi + 1].max()))
    return value


def phrase_response(
    phrase: MotionPhrase,
    video_segments: list[SegmentHistogram],
    atom_set: AtomSet,
) -> float:
    """Phrase response on a video given as an ordered segment list."""
    if not video_segments:
        raise DataError("video has no segments")
    for unit in phrase.units:
        if not 0 <= unit.atom_id < atom_set.num_atoms:
            raise DataError(f"unknown atom id {unit.atom_id}")
    return response_from_matrix(phrase, response_matrix(atom_set, video_segments))


def top_set(responses: Mapping[str, float], t: int) -> set[str]:
    """Ids of the t highest-responding videos (ties to the lexicographically
    smaller id)."""
    if t > len(responses):
        raise DataError(f"top-set size {t} exceeds {len(responses)} videos")
    ranked = sorted(responses.items(), key=lambda kv: (-kv[1], kv[0]))
    return {vid for vid, _ in ranked[:t]}


def rep(
    responses: Mapping[str, float],
    labels: Mapping[str, str],
    target: str,
    t: int,
) -> float:
    """Mean response over target-class videos inside the top set (0 if none)."""
    if target not in set(labels.values()):
        raise DataError(f"unknown class {target!r}")
    top = top_set(responses, t)
    # sorted iteration fixes the summation order across processes
    values = [responses[v] for v in sorted(top) if labels[v] == target]
    if not values:
        return 0.0
    return float(sum(values) / len(values))


def dis(
    responses: Mapping[str, float],
    labels: Mapping[str, str],
    target: str,
    t: int,
) -> PhraseScore:
    """Rep for the target class minus the best Rep among the other classes
    (the max over an empty class set is 0)."""
    classes = sorted(set(labels.values()))
    if not classes:
        raise DataError("no classes present")
    top = top_set(responses, t)
    sums: dict[str, float] = {c: 0.0 for c in classes}
    counts: dict[str, int] = {c: 0 for c in classes}
    for vid in sorted(top):  # fixed order keeps the float sums reproducible
        cls = labels[vid]
        sums[cls] += responses[vid]
        counts[cls] += 1
    rep_per_class = {
        c: (sums[c] / counts[c] if counts[c] else 0.0) for c in classes
    }
    if target not in rep_per_class:
        raise DataError(f"unknown class {target!r}")
    others = [rep_per_class[c] for c in classes if c != target]
    value = rep_per_class[target] - (max(others) if others else 0.0)
    return PhraseScore(rep_per_class=rep_per_class, dis=value, best_class=target)


def _score(
    phrase: MotionPhrase,
    matrices: Mapping[str, np.ndarray],
    labels: Mapping[str, str],
    target: str,
    t: int,
) -> PhraseScore:
    responses = {vid: response_from_matrix(phrase, m) for vid, m in matrices.items()}
    return dis(responses, labels, target, t)


def mine_phrases(
    atom_set: AtomSet,
    matrices: Mapping[str, np.ndarray],
    labels: Mapping[str, str],
    per_class_budget: int,
    max_units: int,
    t: int,
    window: int,
    n_anchors: int,
) -> list[tuple[MotionPhrase, PhraseScore]]:
    """Greedy bottom-up phrase mining.

    Stage 1 enumerates every 1-unit phrase (atom x anchor, all with the
    given window) and scores it per class.  Stage 2 grows the
    budget-best seeds of each class one unit at a time, keeping an
    extension only when Dis strictly increases, so a mined phrase never
    scores below its seed.  Returns the per-class best phrases,
    deduplicated, ordered by class then (-dis, canonical encoding).

    `matrices` maps video id -> atoms x segments response matrix.
    """
    if atom_set.num_atoms == 0:
        raise DataError("empty atom set")
    if not matrices:
        raise DataError("no training videos")
    if per_class_budget < 1 or max_units < 1:
        raise DataError("per_class_budget and max_units must be positive")
    classes = sorted(set(labels.values()))
    all_units = [
        PhraseUnit(atom_id, anchor, window)
        for anchor in range(n_anchors)
        for atom_id in range(atom_set.num_atoms)
    ]

    mined: list[tuple[MotionPhrase, PhraseScore]] = []
    for cls in classes:
        seeds = []
        for unit in all_units:
            phrase = MotionPhrase((unit,), class_hint=cls)
            seeds.append((phrase, _score(phrase, matrices, labels, cls, t)))
        seeds.sort(key=lambda ps: (-ps[1].dis, ps[0].key()))
        grown: dict[tuple, tuple[MotionPhrase, PhraseScore]] = {}
        for phrase, score in seeds[:per_class_budget]:
            while len(phrase.units) < max_units:
                used = {(u.atom_id, u.anchor) for u in phrase.units}
                best_ext: tuple[MotionPhrase, PhraseScore] | None = None
                for unit in all_units:
                    if (unit.atom_id, unit.anchor) in used:
                        continue
                    candidate = MotionPhrase(phrase.units + (unit,), class_hint=cls)
                    cand_score = _score(candidate, matrices, labels, cls, t)
                    if cand_score.dis <= score.dis:
                        continue
                    if best_ext is None or (
                        (-cand_score.dis, candidate.key())
                        < (-best_ext[1].dis, best_ext[0].key())
                    ):
                        best_ext = (candidate, cand_score)
                if best_ext is None:
                    break
                phrase, score = best_ext
            grown.setdefault(phrase.key(), (phrase, score))
        ranked = sorted(grown.values(), key=lambda ps: (-ps[1].dis, ps[0].key()))
        mined.extend(ranked[:per_class_budget])
    return mined
