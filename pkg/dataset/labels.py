"""
Region intensities and the binary palsy label rule.

A frame is positive when either region shows strong palsy, or both regions
show slight palsy.
"""

from enum import IntEnum

import numpy as np

from errors import IngestionError


class RegionIntensity(IntEnum):
    """Palsy intensity of one facial region, ordered Absent < Slight < Strong."""
    ABSENT = 0
    SLIGHT = 1
    STRONG = 2

    @property
    def token(self) -> str:
        return _TOKENS_BY_LEVEL[self]

    @classmethod
    def parse(cls, token: str) -> "RegionIntensity":
        """Parse a manifest token (case-insensitive)."""
        key = str(token).strip().lower()
        if key not in _LEVELS_BY_TOKEN:
            raise IngestionError(
                f"unknown intensity token '{token}', valid tokens: {', '.join(VALID_TOKENS)}"
            )
        return _LEVELS_BY_TOKEN[key]


_LEVELS_BY_TOKEN = {
    "none": RegionIntensity.ABSENT,
    "slight": RegionIntensity.SLIGHT,
    "strong": RegionIntensity.STRONG,
}
_TOKENS_BY_LEVEL = {level: token for token, level in _LEVELS_BY_TOKEN.items()}
VALID_TOKENS = tuple(_LEVELS_BY_TOKEN)


class BinaryLabel(IntEnum):
    NEGATIVE = 0
    POSITIVE = 1


def derive_binary_label(eye: RegionIntensity, mouth: RegionIntensity) -> BinaryLabel:
    """Positive iff either region is Strong, or both regions are Slight."""
    if eye == RegionIntensity.STRONG or mouth == RegionIntensity.STRONG:
        return BinaryLabel.POSITIVE
    if eye == RegionIntensity.SLIGHT and mouth == RegionIntensity.SLIGHT:
        return BinaryLabel.POSITIVE
    return BinaryLabel.NEGATIVE


def one_hot(labels) -> np.ndarray:
    """Binary labels -> B x 2 targets ([1, 0] negative, [0, 1] positive)."""
    labels = np.asarray(labels, dtype=np.int64)
    targets = np.zeros((labels.shape[0], 2), dtype=np.float64)
    targets[np.arange(labels.shape[0]), labels] = 1.0
    return targets
