"""Quality-scaled JPEG quantization tables."""

from dataclasses import dataclass

import numpy as np

from core.exceptions import InvalidInput

# ITU-T T.81 Annex K luminance table
LUMINANCE_BASE = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=np.int64)
LUMINANCE_BASE.setflags(write=False)


@dataclass(frozen=True, eq=False)
class QuantTable:
    entries: np.ndarray
    quality: int = None

    def __post_init__(self):
        entries = np.array(self.entries, dtype=np.int64)
        if entries.shape != (8, 8):
            raise InvalidInput(f"quantization table must be 8x8, got {entries.shape}")
        if entries.min() < 1:
            raise InvalidInput("quantization table entries must be >= 1")
        entries.setflags(write=False)
        object.__setattr__(self, 'entries', entries)

    @property
    def largest(self):
        return int(self.entries.max())


def quality_to_table(q):
    """
    Scale the base table by s/100 with s = 5000/q below 50 and 200 - 2q from 50
    up, rounding half up and flooring at 1. s is kept as an exact fraction, so
    qualities that do not divide 5000 differ from libjpeg's truncated integer s.
    """
    if isinstance(q, bool) or not isinstance(q, (int, np.integer)):
        raise InvalidInput(f"quality must be an integer, got {q!r}")
    if not 1 <= q <= 100:
        raise InvalidInput(f"quality {q} outside [1, 100]")
    # s/100 = numerator / denominator
    numerator, denominator = (5000, 100 * q) if q < 50 else (200 - 2 * q, 100)
    entries = np.maximum((2 * LUMINANCE_BASE * numerator + denominator) // (2 * denominator), 1)
    return QuantTable(entries, quality=int(q))
