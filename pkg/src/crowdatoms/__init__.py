"""Crowd event recognition from multi-channel motion descriptors.

The pipeline encodes overlapping temporal segments of each clip as
bag-of-visual-words histograms over four descriptor channels, mines
discriminative motion atoms by alternating clustering and classifier
training, composes atoms into AND/OR motion phrases ranked by their
representativeness/uniqueness, max-pools atom and phrase responses into a
fixed-length video vector, and trains linear SVMs for event recognition
and anomaly scoring.
"""

__version__ = "0.1.0"

from .errors import CrowdAtomsError, DataError, NumericError

__all__ = ["CrowdAtomsError", "DataError", "NumericError", "__version__"]
