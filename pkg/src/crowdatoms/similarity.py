"""Chi-square histogram distance and the 4-channel exponential similarity.

The per-channel distance is normalized by twice the channel's mean
chi-square distance over training segment pairs; the segment similarity is
the sum over the four channels of exp(-normalized distance), so it lives in
(0, 4] with 4 reached only by identical histograms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import exp

import numpy as np

from .errors import DataError, NumericError
from .ingest import CHANNELS, SegmentHistogram

#: below this many segments the pair mean is exact; above, pairs are sampled
EXACT_PAIR_THRESHOLD = 2000
MAX_SAMPLED_PAIRS = 1_000_000


@dataclass
class ChannelNormalizers:
    """Mean chi-square distance per channel over training segment pairs."""

    m: dict[str, float] = field(default_factory=dict)
    approx: bool = False  # True when the mean came from sampled pairs


def chi_square(h_a: np.ndarray, h_b: np.ndarray) -> float:
    """Sum over bins of (a-b)^2 / (a+b), with 0/0 bins contributing 0."""
    a = np.asarray(h_a, dtype=np.float64)
    b = np.asarray(h_b, dtype=np.float64)
    if a.shape != b.shape:
        raise DataError(f"histogram length mismatch: {a.shape} vs {b.shape}")
    if (a < 0).any() or (b < 0).any():
        raise DataError("histogram entries must be non-negative")
    total = a + b
    diff = a - b
    mask = total > 0
    return float((diff[mask] ** 2 / total[mask]).sum())


def _pair_chi_square(h: np.ndarray, ii: np.ndarray, jj: np.ndarray) -> np.ndarray:
    """chi_square for many (ii, jj) index pairs of the row matrix h."""
    a = h[ii]
    b = h[jj]
    total = a + b
    diff = a - b
    num = diff * diff
    out = np.divide(num, total, out=np.zeros_like(num), where=total > 0)
    return out.sum(axis=1)


def compute_normalizers(
    training: list[SegmentHistogram],
    seed: int = 0,
    exact_threshold: int = EXACT_PAIR_THRESHOLD,
    max_pairs: int = MAX_SAMPLED_PAIRS,
) -> ChannelNormalizers:
    """Mean chi-square distance per channel over unordered training pairs.

    With fewer than `exact_threshold` segments every pair is used; beyond
    that a uniform sample of `max_pairs` pairs drawn from `seed` stands in
    for the full quadratic sweep and the result is flagged approximate.
    """
    n = len(training)
    if n < 2:
        raise DataError(f"need at least 2 training segments, got {n}")
    approx = n >= exact_threshold
    if approx:
        rng = np.random.default_rng(seed)
        ii = rng.integers(0, n, size=max_pairs)
        jj = rng.integers(0, n - 1, size=max_pairs)
        jj = np.where(jj >= ii, jj + 1, jj)  # j != i, uniform over the rest
    else:
        pairs = np.array(list(combinations(range(n), 2)), dtype=np.int64)
        ii, jj = pairs[:, 0], pairs[:, 1]

    norms = ChannelNormalizers(approx=approx)
    for channel in CHANNELS:
        h = np.stack([s.histograms[channel] for s in training])
        total = 0.0
        count = 0
        for lo in range(0, len(ii), 100_000):
            hi = min(lo + 100_000, len(ii))
            total += float(_pair_chi_square(h, ii[lo:hi], jj[lo:hi]).sum())
            count += hi - lo
        mean = total / count
        if mean <= 0.0:
            raise NumericError(f"degenerate channel {channel}: all pairwise distances zero")
        norms.m[channel] = mean
    return norms


def normalized_distance(h_a: np.ndarray, h_b: np.ndarray, m_m: float) -> float:
    """chi_square(h_a, h_b) / (2 * m_m)."""
    if m_m <= 0:
        raise DataError(f"channel normalizer must be positive, got {m_m}")
    return chi_square(h_a, h_b) / (2.0 * m_m)


def similarity(
    s_a: SegmentHistogram, s_b: SegmentHistogram, norms: ChannelNormalizers
) -> float:
    """Sum over the four channels of exp(-normalized chi-square distance)."""
    total = 0.0
    for channel in CHANNELS:
        if channel not in s_a.histograms or channel not in s_b.histograms:
            raise DataError(f"segment histogram missing channel {channel}")
        if channel not in norms.m:
            raise DataError(f"normalizers missing channel {channel}")
        total += exp(
            -normalized_distance(
                s_a.histograms[channel], s_b.histograms[channel], norms.m[channel]
            )
        )
    return total
