"""Motion-atom mining: alternate segment clustering with per-cluster
one-vs-rest classifier training until the assignment reaches a fixed point.

Each atom is a cluster of segments plus the linear classifier that
recognizes it; the classifier's raw decision value on a segment's
concatenated 4-channel histogram is the atom's response.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .ingest import CHANNELS, Segment, SegmentHistogram
from .kmeans import lloyd
from .similarity import ChannelNormalizers, similarity
from .svm import SvmModel, SvmParams, train_classifier

INIT_METHODS = ("kmeans", "sim-spectral")


@dataclass
class MotionAtom:
    atom_id: int
    classifier: SvmModel
    member_segments: list[Segment] = field(default_factory=list)  # training-time only


@dataclass
class AtomSet:
    atoms: list[MotionAtom]
    norms: ChannelNormalizers

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)


def concat_histogram(seg: SegmentHistogram) -> np.ndarray:
    """Stack the four channel histograms into one 4K vector (channel order
    HOG, HOF, MBHX, MBHY)."""
    try:
        return np.concatenate([seg.histograms[c] for c in CHANNELS])
    except KeyError as exc:
        raise DataError(f"segment histogram missing channel {exc.args[0]}") from exc


def _concat_matrix(segments: list[SegmentHistogram]) -> np.ndarray:
    return np.stack([concat_histogram(s) for s in segments])


def _spectral_embedding(
    segments: list[SegmentHistogram], norms: ChannelNormalizers, dims: int
) -> np.ndarray:
    """Rows of the bottom eigenvectors of the normalized Laplacian of the
    pairwise similarity matrix, with signs fixed for determinism."""
    n = len(segments)
    affinity = np.zeros((n, n))
    for i in range(n):
        affinity[i, i] = 4.0  # Sim of a segment with itself
        for j in range(i + 1, n):
            affinity[i, j] = affinity[j, i] = similarity(segments[i], segments[j], norms)
    degree = affinity.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(degree)
    laplacian = np.eye(n) - inv_sqrt[:, None] * affinity * inv_sqrt[None, :]
    eigvals, eigvecs = np.linalg.eigh(laplacian)
    emb = eigvecs[:, :dims]
    for col in range(emb.shape[1]):
        pivot = int(np.abs(emb[:, col]).argmax())
        if emb[pivot, col] < 0:
            emb[:, col] = -emb[:, col]
    return emb


def init_clusters(
    segments: list[SegmentHistogram],
    num_atoms: int,
    norms: ChannelNormalizers,
    seed: int,
    method: str = "kmeans",
) -> np.ndarray:
    """Initial segment -> atom assignment; every atom gets >= 1 member.

    "kmeans" clusters the concatenated histograms directly; "sim-spectral"
    first embeds the similarity matrix spectrally and clusters the
    embedding.
    """
    if num_atoms < 1:
        raise DataError(f"atom count must be positive, got {num_atoms}")
    if len(segments) < num_atoms:
        raise DataError(f"{len(segments)} segments < {num_atoms} atoms")
    if method not in INIT_METHODS:
        raise DataError(f"unknown init method {method!r}, expected one of {INIT_METHODS}")
    rng = np.random.default_rng(seed)
    if method == "kmeans":
        points = _concat_matrix(segments)
    else:
        points = _spectral_embedding(segments, norms, num_atoms)
    result = lloyd(points, num_atoms, rng, max_iter=100)
    return result.labels


def train_atom_classifiers(
    assignment: np.ndarray,
    segments: list[SegmentHistogram],
    svm_params: SvmParams,
) -> list[SvmModel]:
    """One one-vs-rest linear classifier per cluster (+1 members, -1 rest)."""
    num_atoms = int(assignment.max()) + 1
    counts = np.bincount(assignment, minlength=num_atoms)
    if (counts == 0).any():
        empty = int(np.flatnonzero(counts == 0)[0])
        raise DataError(f"cluster {empty} is empty")
    x = _concat_matrix(segments)
    classifiers = []
    for atom_id in range(num_atoms):
        labels = np.where(assignment == atom_id, 1.0, -1.0)
        data = list(zip(x, labels))
        classifiers.append(
            train_classifier(
                data,
                c_reg=svm_params.c_reg,
                tol=svm_params.tol,
                max_passes=svm_params.max_passes,
                seed=svm_params.seed,
            )
        )
    return classifiers


def _score_matrix(x: np.ndarray, classifiers: list[SvmModel]) -> np.ndarray:
    scores = np.empty((x.shape[0], len(classifiers)))
    for a, clf in enumerate(classifiers):
        scores[:, a] = (x * clf.w).sum(axis=1) + clf.b
    return scores


def reassign(
    segments: list[SegmentHistogram], classifiers: list[SvmModel]
) -> np.ndarray:
    """Assign each segment to its highest-scoring atom (ties to the lowest
    atom id); atoms left empty steal the lowest-scoring member of the
    largest cluster."""
    if not classifiers:
        raise DataError("need at least one classifier")
    if len(segments) < len(classifiers):
        raise DataError(f"{len(segments)} segments < {len(classifiers)} atoms")
    x = _concat_matrix(segments)
    scores = _score_matrix(x, classifiers)
    assignment = scores.argmax(axis=1)
    num_atoms = len(classifiers)
    counts = np.bincount(assignment, minlength=num_atoms)
    for empty in np.flatnonzero(counts == 0):
        largest = int(counts.argmax())
        members = np.flatnonzero(assignment == largest)
        victim = members[int(scores[members, largest].argmin())]
        assignment[victim] = empty
        counts[largest] -= 1
        counts[empty] += 1
    return assignment


def mine_atoms(
    segments: list[SegmentHistogram],
    num_atoms: int,
    norms: ChannelNormalizers,
    svm_params: SvmParams,
    max_iters: int = 20,
    seed: int = 0,
    init: str = "kmeans",
) -> tuple[AtomSet, list[tuple[int, int]]]:
    """Alternate train/reassign until a fixed point or the iteration cap.

    Returns the atom set plus a report of (iteration, changed-count) rows;
    the change count is recorded, not guaranteed monotone.
    """
    if len(segments) < 2 * num_atoms:
        raise DataError(
            f"need at least {2 * num_atoms} segments for {num_atoms} atoms, got {len(segments)}"
        )
    assignment = init_clusters(segments, num_atoms, norms, seed, method=init)
    classifiers = train_atom_classifiers(assignment, segments, svm_params)
    report: list[tuple[int, int]] = []
    for iteration in range(1, max_iters + 1):
        new_assignment = reassign(segments, classifiers)
        changed = int((new_assignment != assignment).sum())
        report.append((iteration, changed))
        assignment = new_assignment
        if changed == 0:
            break
        # retrain so the classifiers always match the latest assignment
        classifiers = train_atom_classifiers(assignment, segments, svm_params)

    atoms = []
    for atom_id in range(num_atoms):
        members = [
            segments[i].segment for i in np.flatnonzero(assignment == atom_id)
        ]
        atoms.append(MotionAtom(atom_id, classifiers[atom_id], members))
    return AtomSet(atoms=atoms, norms=norms), report


def atom_response(atom: MotionAtom, segment: SegmentHistogram) -> float:
    """Raw decision value of the atom's classifier on the segment."""
    vec = concat_histogram(segment)
    if vec.shape != atom.classifier.w.shape:
        raise DataError(
            f"dimension mismatch: segment has {vec.shape}, atom expects "
            f"{atom.classifier.w.shape}"
        )
    return float((atom.classifier.w * vec).sum() + atom.classifier.b)


def response_matrix(atom_set: AtomSet, video_segments: list[SegmentHistogram]) -> np.ndarray:
    """Atoms x segments matrix of raw responses for one video."""
    x = _concat_matrix(video_segments)
    out = np.empty((atom_set.num_atoms, x.shape[0]))
    for a, atom in enumerate(atom_set.atoms):
        if x.shape[1] != atom.classifier.w.shape[0]:
            raise DataError(
                f"dimension mismatch: segments have {x.shape[1]}, atom {a} expects "
                f"{atom.classifier.w.shape[0]}"
            )
        out[a] = (x * atom.classifier.w).sum(axis=1) + atom.classifier.b
    return out
