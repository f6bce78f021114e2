"""Desk-scale synthetic data: clips whose classes share the same motif set
and differ only in temporal order.

Each clip is laid out on k+1 half-zones of `halfzone` frames; descriptors
are emitted only into the even half-zones, so after 50%-overlap
segmentation every segment sees exactly one motif and the discovered atoms
correspond to the motifs.  Class sequences are permutations of the motif
slots, so phrase mining has to recover the temporal layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .ingest import CHANNELS
from .rng import stage_rng

LAYOUTS = ("block-rotations", "swaps", "rotations")
MOTIF_SPREAD = 5.0


@dataclass
class SynthSpec:
    n_classes: int
    clips_per_class: int
    k: int  # segments per clip
    seed: int
    halfzone: int = 8  # frames per half-zone
    desc_per_zone: int = 6  # descriptors per occupied zone per channel
    dim: int = 8  # descriptor dimension (all channels)
    feature_noise: float = 0.05
    label_noise: float = 0.0  # fraction of clips with a randomized label
    train_fraction: float = 0.5
    layout: str = "block-rotations"


@dataclass
class SynthResult:
    descriptor_lines: list[str]
    manifest_lines: list[str]
    classes: list[str]
    sequences: dict[str, tuple[int, ...]]  # class -> motif slot order
    clip_length: int = 0
    n_slots: int = 0


def n_slots_for(k: int) -> int:
    """Motif slots available with k segments (even half-zones only)."""
    return k // 2 + 1


def class_sequences(n_classes: int, n_slots: int, layout: str) -> list[tuple[int, ...]]:
    """Deterministic per-class motif orders sharing one multiset.

    "block-rotations" (default): cyclic shifts of a two-motif block pattern
    (e.g. 0011); with a one-segment phrase window no single unit is ever
    specific to one class, but two-unit conjunctions pin each class down,
    so mining must exploit the temporal layout.  "swaps": identity composed
    with disjoint adjacent-pair swaps.  "rotations": cyclic shifts of the
    identity permutation.
    """
    if layout not in LAYOUTS:
        raise DataError(f"unknown layout {layout!r}, expected one of {LAYOUTS}")
    if layout == "swaps":
        capacity = 2 ** (n_slots // 2)
    else:
        capacity = n_slots
    if n_classes > capacity:
        raise DataError(
            f"layout {layout!r} with {n_slots} motif slots supports at most "
            f"{capacity} classes, got {n_classes}; increase k"
        )
    sequences = []
    for c in range(n_classes):
        if layout == "block-rotations":
            base = [0] * ((n_slots + 1) // 2) + [1] * (n_slots // 2)
            seq = [base[(j + c) % n_slots] for j in range(n_slots)]
        elif layout == "swaps":
            seq = list(range(n_slots))
            for pair in range(n_slots // 2):
                if (c >> pair) & 1:
                    a, b = 2 * pair, 2 * pair + 1
                    seq[a], seq[b] = seq[b], seq[a]
        else:
            seq = [(j + c) % n_slots for j in range(n_slots)]
        sequences.append(tuple(seq))
    return sequences


def generate(spec: SynthSpec) -> SynthResult:
    """Build descriptor and manifest lines; identical bytes per seed."""
    if spec.n_classes < 1 or spec.clips_per_class < 1:
        raise DataError("class count and clips per class must be positive")
    if spec.k < 1 or spec.halfzone < 1 or spec.desc_per_zone < 1 or spec.dim < 1:
        raise DataError("k, halfzone, desc_per_zone, and dim must be positive")
    if not 0.0 <= spec.label_noise <= 1.0:
        raise DataError("label noise must lie in [0, 1]")
    if not 0.0 < spec.train_fraction <= 1.0:
        raise DataError("train fraction must lie in (0, 1]")

    slots = n_slots_for(spec.k)
    sequences = class_sequences(spec.n_classes, slots, spec.layout)
    classes = [f"class{c}" for c in range(spec.n_classes)]
    clip_length = (spec.k + 1) * spec.halfzone

    motif_rng = stage_rng(spec.seed, "synth:motifs")
    centers = {
        (motif, channel): MOTIF_SPREAD * motif_rng.standard_normal(spec.dim)
        for motif in range(slots)
        for channel in CHANNELS
    }
    jitter_rng = stage_rng(spec.seed, "synth:jitter")
    label_rng = stage_rng(spec.seed, "synth:labels")

    n_train = int(np.ceil(spec.train_fraction * spec.clips_per_class))
    descriptor_lines: list[str] = []
    manifest_lines: list[str] = []
    seq_by_class: dict[str, tuple[int, ...]] = {}
    for c, cls in enumerate(classes):
        seq = sequences[c]
        seq_by_class[cls] = seq
        for idx in range(spec.clips_per_class):
            video_id = f"{cls}v{idx:03d}"
            label = cls
            if spec.label_noise > 0 and label_rng.random() < spec.label_noise:
                label = classes[int(label_rng.integers(spec.n_classes))]
            split = "train" if idx < n_train else "test"
            manifest_lines.append(f"{video_id}\t{clip_length}\t{label}\t{split}")
            for slot in range(slots):
                zone_start = 2 * slot * spec.halfzone
                motif = seq[slot]
                for channel in CHANNELS:
                    center = centers[(motif, channel)]
                    for i in range(spec.desc_per_zone):
                        frame = zone_start + (i % spec.halfzone)
                        vec = center + spec.feature_noise * jitter_rng.standard_normal(
                            spec.dim
                        )
                        values = ",".join(f"{v:.8g}" for v in vec)
                        descriptor_lines.append(
                            f"{video_id}\t{frame}\t{channel}\t{values}"
                        )
    return SynthResult(
        descriptor_lines=descriptor_lines,
        manifest_lines=manifest_lines,
        classes=classes,
        sequences=seq_by_class,
        clip_length=clip_length,
        n_slots=slots,
    )
