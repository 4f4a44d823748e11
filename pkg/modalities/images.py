"""
RGB and BnW image tensors for the CNN input interface.

Images are resized with OpenCV's bilinear filter (half-pixel centres, edge
clamping), scaled to [0, 1] and laid out channels-first.
"""

from typing import Optional, Sequence

import cv2
import numpy as np

from errors import IngestionError, InputError
from modalities.raster import MIN_CANVAS, BnwRaster

DEFAULT_IMAGE_SIZE = 224


def read_rgb(path: str) -> np.ndarray:
    """Load an image file as an H x W x 3 uint8 RGB array."""
    image = cv2.imread(path, cv2.IMREAD_COLOR)
    if image is None:
        raise IngestionError(f"cannot decode image {path}")
    return cv2.cvtColor(image, cv2.COLOR_BGR2RGB)


def _resize(image: np.ndarray, side: int) -> np.ndarray:
    if image.shape[0] == side and image.shape[1] == side:
        return image
    return cv2.resize(image, (side, side), interpolation=cv2.INTER_LINEAR)


def preprocess_rgb(
    image: np.ndarray,
    side: int = DEFAULT_IMAGE_SIZE,
    mean: Optional[Sequence[float]] = None,
    std: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """
    Turn an H x W x 3 byte image into a 3 x S x S float32 tensor.

    Values are byte / 255 in [0, 1]; when mean and std are given each
    channel is then normalised as (v - mean[c]) / std[c].
    """
    if image is None or image.size == 0:
        raise InputError("empty image")
    if image.ndim != 3 or image.shape[2] != 3:
        raise InputError(f"expected an H x W x 3 image, got shape {tuple(image.shape)}")
    height, width = image.shape[:2]
    if height < MIN_CANVAS or width < MIN_CANVAS:
        raise InputError(f"image must be at least {MIN_CANVAS}x{MIN_CANVAS}, got {width}x{height}")

    scaled = _resize(image.astype(np.float32) / np.float32(255.0), side)
    tensor = np.ascontiguousarray(scaled.transpose(2, 0, 1), dtype=np.float32)
    if mean is not None or std is not None:
        if mean is None or std is None or len(mean) != 3 or len(std) != 3:
            raise InputError("per-channel normalisation needs 3 means and 3 stds")
        if any(s <= 0 for s in std):
            raise InputError(f"normalisation std must be positive, got {list(std)}")
        tensor = (tensor - np.asarray(mean, np.float32)[:, None, None]) / np.asarray(std, np.float32)[:, None, None]
    return tensor


def raster_to_tensor(raster: BnwRaster, side: int = DEFAULT_IMAGE_SIZE) -> np.ndarray:
    """3 x S x S float32 tensor with three identical copies of the raster."""
    grid = _resize(raster.pixels.astype(np.float32), side)
    grid = np.clip(grid, 0.0, 1.0)
    return np.ascontiguousarray(np.repeat(grid[None, :, :], 3, axis=0), dtype=np.float32)
