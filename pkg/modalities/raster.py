"""
BnW contour rasterisation.

Contour groups of the face mesh are drawn as 1-pixel white polylines
(value 1) on an all-black canvas, directly at the target size. Drawing is
integer-only, so the same landmarks always give byte-identical rasters.
"""

from dataclasses import dataclass, field
from typing import Iterator, List, Sequence, Tuple

import numpy as np

from errors import ContourSpecError, ParameterError
from modalities.face_mesh import NUM_LANDMARKS, get_contour_groups
from modalities.landmarks import LandmarkSet

MIN_CANVAS = 8
DEFAULT_CANVAS = 224


@dataclass(frozen=True)
class ContourGroup:
    name: str
    indices: Tuple[int, ...]
    closed: bool = True

    def __post_init__(self):
        if len(self.indices) < 2:
            raise ContourSpecError(f"contour group '{self.name}' needs at least 2 indices")
        bad = [i for i in self.indices if not 0 <= i < NUM_LANDMARKS]
        if bad:
            raise ContourSpecError(
                f"contour group '{self.name}' has indices out of range [0, {NUM_LANDMARKS}): {bad}"
            )

    def segments(self) -> Iterator[Tuple[int, int]]:
        for a, b in zip(self.indices, self.indices[1:]):
            yield a, b
        if self.closed and len(self.indices) > 2:
            yield self.indices[-1], self.indices[0]


@dataclass(frozen=True)
class ContourSpec:
    groups: Tuple[ContourGroup, ...] = field(default_factory=tuple)

    @property
    def names(self) -> List[str]:
        return [group.name for group in self.groups]

    @classmethod
    def default(cls, include_extras: bool = False) -> "ContourSpec":
        return cls(tuple(
            ContourGroup(name, tuple(indices), closed)
            for name, (indices, closed) in get_contour_groups(include_extras).items()
        ))


@dataclass(frozen=True)
class BnwRaster:
    width: int
    height: int
    pixels: np.ndarray  # uint8, height x width, values {0, 1}

    @property
    def lit(self) -> int:
        return int(self.pixels.sum())


def to_pixel(value: float, side: int) -> int:
    """Map a normalised coordinate to a pixel index, rounding half up."""
    return int(np.floor(value * (side - 1) + 0.5))


def bresenham_line(x0: int, y0: int, x1: int, y1: int) -> List[Tuple[int, int]]:
    """
    Integer line from (x0, y0) to (x1, y1), both endpoints included.

    Works in every octant and yields max(|dx|, |dy|) + 1 8-connected points.
    """
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    points = []
    x, y = x0, y0
    while True:
        points.append((x, y))
        if x == x1 and y == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy
    return points


def rasterize_contours(
    landmarks: LandmarkSet,
    spec: ContourSpec,
    width: int = DEFAULT_CANVAS,
    height: int = DEFAULT_CANVAS,
) -> BnwRaster:
    """
    Draw every contour group of `spec` onto a width x height black canvas.

    Args:
        landmarks: Source face mesh
        spec: Groups to draw; an empty spec yields an all-black raster
        width: Canvas width in pixels (>= 8)
        height: Canvas height in pixels (>= 8)

    Returns:
        BnwRaster with pixels[row=y, col=x]
    """
    if width < MIN_CANVAS or height < MIN_CANVAS:
        raise ParameterError(f"raster canvas must be at least {MIN_CANVAS}x{MIN_CANVAS}, got {width}x{height}")

    pixels = np.zeros((height, width), dtype=np.uint8)
    points = landmarks.points
    for group in spec.groups:
        for a, b in group.segments():
            x0, y0 = to_pixel(points[a, 0], width), to_pixel(points[a, 1], height)
            x1, y1 = to_pixel(points[b, 0], width), to_pixel(points[b, 1], height)
            for x, y in bresenham_line(x0, y0, x1, y1):
                pixels[y, x] = 1
    return BnwRaster(width, height, pixels)


def contour_spec_from_groups(groups: Sequence[Tuple[str, Sequence[int], bool]]) -> ContourSpec:
    return ContourSpec(tuple(ContourGroup(name, tuple(int(i) for i in idx), bool(closed))
                             for name, idx, closed in groups))
