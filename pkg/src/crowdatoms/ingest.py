"""Descriptor ingestion, overlapping segmentation, codebooks, and histograms.

File formats owned here:

* descriptor file — one record per line:
  ``video_id<TAB>frame_index<TAB>channel<TAB>v1,v2,...,vd``
  with channel in {HOG, HOF, MBHX, MBHY};
* clip manifest — ``video_id<TAB>clip_length_frames<TAB>class_label`` with an
  optional fourth ``split`` column (``train``/``test``);
* codebook file — header ``CODEBOOK v1 <channel> <K> <dim>`` followed by K
  comma-separated centroid lines.

Descriptor dimensions are whatever the files provide, as long as they are
consistent per channel (dense-trajectory dims would be 96/108/96/96, but
nothing here enforces that).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .kmeans import lloyd, squared_distances

CHANNELS = ("HOG", "HOF", "MBHX", "MBHY")


@dataclass
class DescriptorRecord:
    video_id: str
    frame_index: int
    channel: str
    vector: np.ndarray


@dataclass
class ClipInfo:
    video_id: str
    clip_length: int
    label: str
    split: str | None = None


@dataclass
class Codebook:
    channel: str
    centroids: np.ndarray  # (K, dim)

    @property
    def size(self) -> int:
        return int(self.centroids.shape[0])

    @property
    def dim(self) -> int:
        return int(self.centroids.shape[1])


@dataclass(frozen=True)
class Segment:
    video_id: str
    segment_index: int
    start_frame: int
    end_frame: int  # exclusive

    @property
    def length(self) -> int:
        return self.end_frame - self.start_frame


@dataclass
class SegmentHistogram:
    segment: Segment
    histograms: dict[str, np.ndarray] = field(default_factory=dict)


def load_descriptors(path: str) -> list[DescriptorRecord]:
    """Parse a descriptor file, preserving record order.

    Raises DataError naming the offending line for malformed records and
    naming the channel for within-channel dimension mismatches.
    """
    records: list[DescriptorRecord] = []
    dims: dict[str, int] = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read descriptor file {path}: {exc}") from exc
    with fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise DataError(
                    f"{path}:{lineno}: expected 4 tab-separated fields, got {len(parts)}"
                )
            video_id, frame_s, channel, vec_s = parts
            if channel not in CHANNELS:
                raise DataError(f"{path}:{lineno}: unknown channel {channel!r}")
            try:
                frame = int(frame_s)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad frame index {frame_s!r}") from exc
            if frame < 0:
                raise DataError(f"{path}:{lineno}: negative frame index {frame}")
            try:
                vector = np.array([float(v) for v in vec_s.split(",")], dtype=np.float64)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad descriptor vector") from exc
            if vector.size == 0 or not np.isfinite(vector).all():
                raise DataError(f"{path}:{lineno}: empty or non-finite descriptor vector")
            expected = dims.setdefault(channel, vector.size)
            if vector.size != expected:
                raise DataError(
                    f"channel {channel} dimension mismatch at {path}:{lineno}: "
                    f"got {vector.size}, expected {expected}"
                )
            records.append(DescriptorRecord(video_id, frame, channel, vector))
    return records


def load_manifest(path: str) -> list[ClipInfo]:
    """Parse a clip manifest; the split column is optional per row."""
    clips: list[ClipInfo] = []
    seen: set[str] = set()
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    with fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in (3, 4):
                raise DataError(f"{path}:{lineno}: expected 3 or 4 fields, got {len(parts)}")
            video_id, length_s, label = parts[:3]
            split = parts[3] if len(parts) == 4 else None
            if video_id in seen:
                raise DataError(f"{path}:{lineno}: duplicate video id {video_id!r}")
            seen.add(video_id)
            try:
                length = int(length_s)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad clip length {length_s!r}") from exc
            if length <= 0:
                raise DataError(f"{path}:{lineno}: clip length must be positive")
            clips.append(ClipInfo(video_id, length, label, split))
    return clips


def check_frames_in_range(records: list[DescriptorRecord], clips: list[ClipInfo]) -> None:
    """Validate that every record's frame index fits its declared clip."""
    lengths = {c.video_id: c.clip_length for c in clips}
    for rec in records:
        length = lengths.get(rec.video_id)
        if length is None:
            raise DataError(f"descriptor video {rec.video_id!r} missing from manifest")
        if rec.frame_index >= length:
            raise DataError(
                f"video {rec.video_id!r}: frame {rec.frame_index} outside clip length {length}"
            )


def segment_clip(clip_length: int, k: int, video_id: str = "") -> list[Segment]:
    """Cut a clip into k equal-length segments with 50% overlap.

    The window L is the largest integer with ``L + (k-1)*floor(L/2) <=
    clip_length``; segment j starts at ``j*floor(L/2)`` and only the last
    segment is stretched so its end lands exactly on clip_length.  For clip
    lengths that do not divide evenly the final segment can exceed L by a
    few frames.
    """
    if k < 1:
        raise DataError(f"segments per clip must be >= 1, got {k}")
    if clip_length < k:
        raise DataError(f"clip length {clip_length} shorter than k={k} segments")
    if k == 1:
        return [Segment(video_id, 0, 0, clip_length)]

    def cover(length: int) -> int:
        return length + (k - 1) * (length // 2)

    window = max(1, (2 * clip_length) // (k + 1))
    while cover(window + 1) <= clip_length:
        window += 1
    step = window // 2
    segments = [
        Segment(video_id, j, j * step, j * step + window) for j in range(k - 1)
    ]
    segments.append(Segment(video_id, k - 1, (k - 1) * step, clip_length))
    return segments


def build_codebook(
    records: list[DescriptorRecord], channel: str, size: int, seed: int
) -> Codebook:
    """k-means codebook over one channel's descriptors, k-means++ seeded.

    Deterministic for a fixed seed; requires at least `size` distinct
    vectors for the channel.
    """
    if size < 1:
        raise DataError(f"codebook size must be positive, got {size}")
    vectors = [r.vector for r in records if r.channel == channel]
    if not vectors:
        raise DataError(f"no descriptors for channel {channel}")
    points = np.stack(vectors)
    distinct = np.unique(points, axis=0).shape[0]
    if distinct < size:
        raise DataError(
            f"channel {channel}: {distinct} distinct vectors < codebook size {size}"
        )
    rng = np.random.default_rng(seed)
    result = lloyd(points, size, rng, max_iter=100)
    return Codebook(channel, result.centroids)


def _vote(vectors: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Histogram of nearest-centroid votes (ties to the lowest index)."""
    k = centroids.shape[0]
    if len(vectors) == 0:
        return np.zeros(k)
    idx = squared_distances(vectors, centroids).argmin(axis=1)
    counts = np.bincount(idx, minlength=k).astype(np.float64)
    return counts / counts.sum()


def quantize_segment(
    segment: Segment,
    records: list[DescriptorRecord],
    codebooks: dict[str, Codebook],
) -> SegmentHistogram:
    """BoVW histogram of one segment over all four channels.

    Each descriptor whose frame lies in [start, end) votes for its nearest
    centroid; counts are L1-normalized per channel.  A channel with no
    descriptors yields the all-zeros vector.
    """
    for channel in CHANNELS:
        if channel not in codebooks:
            raise DataError(f"missing codebook for channel {channel}")
    hists: dict[str, np.ndarray] = {}
    for channel in CHANNELS:
        vecs = [
            r.vector
            for r in records
            if r.channel == channel
            and r.video_id == segment.video_id
            and segment.start_frame <= r.frame_index < segment.end_frame
        ]
        hists[channel] = _vote(
            np.stack(vecs) if vecs else np.empty((0, codebooks[channel].dim)),
            codebooks[channel].centroids,
        )
    return SegmentHistogram(segment, hists)


def index_descriptors(
    records: list[DescriptorRecord],
) -> dict[str, dict[str, tuple[np.ndarray, np.ndarray]]]:
    """Group records as video_id -> channel -> (frames, stacked vectors)."""
    grouped: dict[str, dict[str, list[DescriptorRecord]]] = {}
    for rec in records:
        grouped.setdefault(rec.video_id, {}).setdefault(rec.channel, []).append(rec)
    out: dict[str, dict[str, tuple[np.ndarray, np.ndarray]]] = {}
    for video_id, by_channel in grouped.items():
        out[video_id] = {}
        for channel, recs in by_channel.items():
            frames = np.array([r.frame_index for r in recs], dtype=np.int64)
            out[video_id][channel] = (frames, np.stack([r.vector for r in recs]))
    return out


def quantize_clip(
    segments: list[Segment],
    channel_data: dict[str, tuple[np.ndarray, np.ndarray]],
    codebooks: dict[str, Codebook],
) -> list[SegmentHistogram]:
    """Quantize all segments of one clip from pre-indexed descriptors."""
    out = []
    for seg in segments:
        hists: dict[str, np.ndarray] = {}
        for channel in CHANNELS:
            cb = codebooks[channel]
            if channel in channel_data:
                frames, vecs = channel_data[channel]
                mask = (frames >= seg.start_frame) & (frames < seg.end_frame)
                hists[channel] = _vote(vecs[mask], cb.centroids)
            else:
                hists[channel] = np.zeros(cb.size)
        out.append(SegmentHistogram(seg, hists))
    return out


def format_float(x: float) -> str:
    """Shortest round-trip decimal form, shared by all text serializers."""
    return repr(float(x))


def write_codebook_file(codebook: Codebook, path: str) -> None:
    lines = [f"CODEBOOK v1 {codebook.channel} {codebook.size} {codebook.dim}"]
    for row in codebook.centroids:
        lines.append(",".join(format_float(v) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_codebook_file(path: str) -> Codebook:
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read codebook {path}: {exc}") from exc
    with fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DataError(f"{path}: empty codebook file")
    head = lines[0].split()
    if len(head) != 5 or head[0] != "CODEBOOK" or head[1] != "v1":
        raise DataError(f"{path}:1: bad codebook header")
    channel, size_s, dim_s = head[2], head[3], head[4]
    if channel not in CHANNELS:
        raise DataError(f"{path}:1: unknown channel {channel!r}")
    size, dim = int(size_s), int(dim_s)
    if len(lines) < 1 + size:
        raise DataError(f"{path}: expected {size} centroid lines, got {len(lines) - 1}")
    rows = []
    for i, line in enumerate(lines[1 : 1 + size], 2):
        try:
            row = np.array([float(v) for v in line.split(",")], dtype=np.float64)
        except ValueError as exc:
            raise DataError(f"{path}:{i}: bad centroid line") from exc
        if row.size != dim:
            raise DataError(f"{path}:{i}: centroid has {row.size} values, expected {dim}")
        rows.append(row)
    return Codebook(channel, np.stack(rows))
