"""
Readers for the estimator's per-frame output files and the modality configs.

    landmarks file     478 lines "x,y,z"
    blendshape file    52 lines "name,value"
    subset file        125 lines, one landmark index each
    contour spec       YAML: groups: [{name, closed, indices}]

Every failure is an IngestionError (or the config-specific error) that names
the file and, where it applies, the line.
"""

import logging
from typing import List

import numpy as np
import yaml
from pydantic import BaseModel, Field, ValidationError

from errors import ContourSpecError, IngestionError, SubsetSpecError
from modalities.face_mesh import NUM_BLENDSHAPES, NUM_LANDMARKS
from modalities.landmarks import BlendshapeVector, LandmarkSet, validate_subset_indices
from modalities.raster import ContourGroup, ContourSpec

logger = logging.getLogger(__name__)


def _read_lines(path: str) -> List[str]:
    try:
        with open(path, 'r') as f:
            return [line.strip() for line in f if line.strip()]
    except OSError as e:
        raise IngestionError(f"cannot read {path}: {e}")


def read_landmarks(path: str) -> LandmarkSet:
    """
    Parse a 478-line landmark file.

    Args:
        path: File of "x,y,z" lines, x and y normalised to the image

    Returns:
        LandmarkSet with float64 points

    Raises:
        IngestionError: wrong line count, malformed line or x, y outside [0, 1]
    """
    lines = _read_lines(path)
    if len(lines) != NUM_LANDMARKS:
        raise IngestionError(f"{path}: expected {NUM_LANDMARKS} landmark lines, found {len(lines)}")

    points = np.empty((NUM_LANDMARKS, 3), dtype=np.float64)
    for row, line in enumerate(lines):
        fields = line.split(',')
        if len(fields) != 3:
            raise IngestionError(f"{path}:{row + 1}: expected 'x,y,z', got '{line}'")
        try:
            points[row] = [float(v) for v in fields]
        except ValueError:
            raise IngestionError(f"{path}:{row + 1}: non-numeric landmark '{line}'")
        x, y = points[row, 0], points[row, 1]
        if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
            raise IngestionError(f"{path}:{row + 1}: landmark x, y must lie in [0, 1], got ({x}, {y})")
    return LandmarkSet(points)


def read_blendshapes(path: str) -> BlendshapeVector:
    """Parse a blendshape file. Out-of-range scores are rejected, never clamped."""
    lines = _read_lines(path)
    if len(lines) != NUM_BLENDSHAPES:
        raise IngestionError(f"{path}: expected {NUM_BLENDSHAPES} blendshape lines, found {len(lines)}")

    values = np.empty(NUM_BLENDSHAPES, dtype=np.float64)
    for row, line in enumerate(lines):
        name, sep, raw = line.rpartition(',')
        if not sep or not name:
            raise IngestionError(f"{path}:{row + 1}: expected 'name,value', got '{line}'")
        try:
            values[row] = float(raw)
        except ValueError:
            raise IngestionError(f"{path}:{row + 1}: non-numeric score for '{name}'")
        if not 0.0 <= values[row] <= 1.0:
            raise IngestionError(f"{path}:{row + 1}: score for '{name}' = {values[row]} lies outside [0, 1]")
    return BlendshapeVector(values)


def read_subset_indices(path: str) -> List[int]:
    """Read and validate the landmark subset, one index per line."""
    try:
        with open(path, 'r') as f:
            lines = [line.strip() for line in f if line.strip()]
    except OSError as e:
        raise SubsetSpecError(f"cannot read landmark subset {path}: {e}")
    try:
        indices = [int(line) for line in lines]
    except ValueError as e:
        raise SubsetSpecError(f"{path}: subset indices must be integers ({e})")
    try:
        return validate_subset_indices(indices).tolist()
    except SubsetSpecError as e:
        raise SubsetSpecError(f"{path}: {e}")


class ContourGroupModel(BaseModel):
    name: str
    closed: bool = True
    indices: List[int] = Field(min_length=2)


class ContourSpecModel(BaseModel):
    groups: List[ContourGroupModel] = Field(default_factory=list)


def read_contour_spec(path: str) -> ContourSpec:
    try:
        with open(path, 'r') as f:
            raw = yaml.safe_load(f) or {}
    except OSError as e:
        raise ContourSpecError(f"cannot read contour spec {path}: {e}")
    except yaml.YAMLError as e:
        raise ContourSpecError(f"contour spec {path} is not valid YAML: {e}")

    try:
        model = ContourSpecModel.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise ContourSpecError(f"contour spec {path}: {location}: {first['msg']}")

    groups = tuple(ContourGroup(g.name, tuple(g.indices), g.closed) for g in model.groups)
    logger.debug("contour spec %s: %s", path, [g.name for g in groups])
    return ContourSpec(groups)
