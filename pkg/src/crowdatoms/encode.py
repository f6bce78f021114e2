"""Fixed-length video vectors: max-pooled atom responses followed by
phrase responses, in the model's serialized atom/phrase order."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .atoms import AtomSet, response_matrix
from .errors import DataError, NumericError
from .ingest import SegmentHistogram
from .phrases import MotionPhrase, response_from_matrix


@dataclass
class VideoRepresentation:
    video_id: str
    vector: np.ndarray  # length num_atoms + num_phrases


def encode_video(
    video_segments: list[SegmentHistogram],
    atom_set: AtomSet,
    phrase_list: list[MotionPhrase],
    l2: bool = False,
) -> VideoRepresentation:
    """Atom part: per-atom max response over segments.  Phrase part: each
    phrase's min-of-max response.  Optional post-pooling l2 normalization
    (off by default)."""
    if not video_segments:
        raise DataError("video has no segments")
    if atom_set.num_atoms == 0 and not phrase_list:
        raise DataError("empty model: no atoms or phrases")
    matrix = response_matrix(atom_set, video_segments)
    atom_part = matrix.max(axis=1)
    phrase_part = np.array(
        [response_from_matrix(p, matrix) for p in phrase_list], dtype=np.float64
    )
    vector = np.concatenate([atom_part, phrase_part])
    if not np.isfinite(vector).all():
        raise NumericError("video representation contains non-finite values")
    if l2:
        norm = float(np.sqrt((vector * vector).sum()))
        if norm > 0:
            vector = vector / norm
    video_id = video_segments[0].segment.video_id
    return VideoRepresentation(video_id=video_id, vector=vector)


def format_representation(rep: VideoRepresentation) -> str:
    """Dump line: ``video_id<TAB>v1,v2,...``."""
    from .ingest import format_float

    return rep.video_id + "\t" + ",".join(format_float(v) for v in rep.vector)
