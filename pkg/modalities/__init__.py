"""
Modalities: landmark subsets, expression features, BnW contour rasters and
RGB tensors derived from the landmark estimator's per-frame outputs.
"""

from .landmarks import BlendshapeVector, CoordinateMatrix, LandmarkSet, select_landmark_subset
from .raster import BnwRaster, ContourGroup, ContourSpec, bresenham_line, rasterize_contours
from .readers import read_blendshapes, read_contour_spec, read_landmarks, read_subset_indices
from .images import preprocess_rgb, raster_to_tensor, read_rgb

__all__ = [
    'LandmarkSet',
    'CoordinateMatrix',
    'BlendshapeVector',
    'select_landmark_subset',
    'BnwRaster',
    'ContourGroup',
    'ContourSpec',
    'bresenham_line',
    'rasterize_contours',
    'read_landmarks',
    'read_blendshapes',
    'read_subset_indices',
    'read_contour_spec',
    'preprocess_rgb',
    'raster_to_tensor',
    'read_rgb',
]
