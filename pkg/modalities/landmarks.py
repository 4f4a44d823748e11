"""
Landmark and expression-feature modalities.

LandmarkSet holds the 478 (x, y, z) face-mesh points, x and y normalised to
image width/height. The coordinate modality keeps 125 of them as a 125 x 2
matrix; z is never read.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from errors import IngestionError, SubsetSpecError
from modalities.face_mesh import NUM_BLENDSHAPES, NUM_LANDMARKS, SUBSET_SIZE


@dataclass(frozen=True)
class LandmarkSet:
    points: np.ndarray  # 478 x 3

    def __post_init__(self):
        if self.points.shape != (NUM_LANDMARKS, 3):
            raise IngestionError(
                f"landmark set must be {NUM_LANDMARKS} x 3, got {tuple(self.points.shape)}"
            )
        xy = self.points[:, :2]
        if not np.all(np.isfinite(self.points)) or np.any(xy < 0) or np.any(xy > 1):
            raise IngestionError("landmark x, y must be finite and lie in [0, 1]")


@dataclass(frozen=True)
class CoordinateMatrix:
    coords: np.ndarray  # 125 x 2

    def flatten(self) -> np.ndarray:
        """Row-major 250-vector (x0, y0, x1, y1, ...)."""
        return self.coords.reshape(-1)


@dataclass(frozen=True)
class BlendshapeVector:
    values: np.ndarray  # 52

    def __post_init__(self):
        if self.values.shape != (NUM_BLENDSHAPES,):
            raise IngestionError(
                f"blendshape vector must have {NUM_BLENDSHAPES} entries, got {self.values.size}"
            )
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0) or np.any(self.values > 1):
            bad = int(np.flatnonzero(~((self.values >= 0) & (self.values <= 1)))[0])
            raise IngestionError(f"blendshape entry {bad} = {self.values[bad]} lies outside [0, 1]")


def validate_subset_indices(indices: Sequence[int]) -> np.ndarray:
    """Exactly 125 unique indices, each below 478."""
    array = np.asarray(list(indices), dtype=np.int64)
    if array.shape != (SUBSET_SIZE,):
        raise SubsetSpecError(f"landmark subset needs {SUBSET_SIZE} indices, got {array.size}")
    if np.unique(array).size != array.size:
        values, counts = np.unique(array, return_counts=True)
        raise SubsetSpecError(f"landmark subset repeats indices {values[counts > 1].tolist()}")
    if np.any(array < 0) or np.any(array >= NUM_LANDMARKS):
        bad = array[(array < 0) | (array >= NUM_LANDMARKS)].tolist()
        raise SubsetSpecError(f"landmark subset indices out of range [0, {NUM_LANDMARKS}): {bad}")
    return array


def select_landmark_subset(landmarks: LandmarkSet, indices: Sequence[int]) -> CoordinateMatrix:
    """Row r = (x, y) of landmark indices[r]; z is discarded."""
    rows = validate_subset_indices(indices)
    return CoordinateMatrix(landmarks.points[rows, :2].copy())
