"""
Modality bundles: from frame records to model-ready batches.

`preprocess_frames` fills the modality cache with coordinate matrices,
validated blendshape vectors and BnW rasters. `ModalityLoader` stacks cached
entries (and RGB images, decoded on demand) into the arrays each model
family consumes:

    coords        N x 250   (x0, y0, x1, y1, ...)
    blendshapes   N x 52
    rgb           N x 3 x S x S
    bnw           N x 3 x S x S
    bnw+rgb       N x 6 x S x S   ([RGB || BnW])
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from errors import IngestionError, UsageError
from modalities.images import DEFAULT_IMAGE_SIZE, preprocess_rgb, raster_to_tensor, read_rgb
from modalities.landmarks import CoordinateMatrix, select_landmark_subset
from modalities.raster import DEFAULT_CANVAS, BnwRaster, ContourSpec, rasterize_contours
from modalities.readers import read_blendshapes, read_landmarks
from storage.cache import CACHED_MODALITIES, ModalityCache
from storage.records import FrameRecord

logger = logging.getLogger(__name__)

INPUT_KINDS = ("coords", "blendshapes", "rgb", "bnw", "bnw+rgb")

# Cached modalities each input kind reads.
CACHE_NEEDS = {
    "coords": ("coords",),
    "blendshapes": ("blendshapes",),
    "rgb": (),
    "bnw": ("bnw",),
    "bnw+rgb": ("bnw",),
}


@dataclass(frozen=True)
class ModalityBundle:
    """The derived inputs of one frame."""
    coords: CoordinateMatrix
    blendshapes: np.ndarray
    bnw: BnwRaster


@dataclass
class PreprocessSummary:
    frames: int
    written: int
    skipped: int


def build_bundle(
    record: FrameRecord,
    subset: Sequence[int],
    contours: ContourSpec,
    raster_size: int = DEFAULT_CANVAS,
) -> ModalityBundle:
    """Read one frame's estimator outputs and derive its structured modalities."""
    try:
        landmarks = read_landmarks(record.landmark_path)
        blendshapes = read_blendshapes(record.blendshape_path)
    except IngestionError as e:
        raise IngestionError(f"frame {record.key_str}: {e}")
    return ModalityBundle(
        coords=select_landmark_subset(landmarks, subset),
        blendshapes=blendshapes.values,
        bnw=rasterize_contours(landmarks, contours, raster_size, raster_size),
    )


def preprocess_frames(
    records: Sequence[FrameRecord],
    cache: ModalityCache,
    subset: Sequence[int],
    contours: ContourSpec,
    raster_size: int = DEFAULT_CANVAS,
    config_sources: Sequence[str] = (),
    workers: int = 1,
) -> PreprocessSummary:
    """
    Write every frame's cached modalities, skipping entries that are newer
    than their landmark/blendshape files and the given config files. A BnW
    entry rasterised at another canvas size is rebuilt.

    The first ingestion error aborts the run and names the frame.
    """
    cache.reset_counters()

    def process(record: FrameRecord) -> None:
        sources = [record.landmark_path, record.blendshape_path, *config_sources]
        shapes = {"bnw": (raster_size, raster_size)}
        if all(cache.is_fresh(record, modality, sources, shapes.get(modality)) for modality in CACHED_MODALITIES):
            for _ in CACHED_MODALITIES:
                cache.mark_skipped()
            return
        bundle = build_bundle(record, subset, contours, raster_size)
        cache.put(record, "coords", bundle.coords.coords)
        cache.put(record, "blendshapes", bundle.blendshapes)
        cache.put(record, "bnw", bundle.bnw.pixels)

    if workers <= 1:
        for record in records:
            process(record)
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            # list() re-raises the first worker exception
            list(executor.map(process, records))

    stats = cache.stats()
    logger.info("preprocessed %d frames: %d written, %d skipped", len(records), stats['written'], stats['skipped'])
    return PreprocessSummary(len(records), stats['written'], stats['skipped'])


class ModalityLoader:
    """Stacks cached modality tensors into model input arrays."""

    def __init__(
        self,
        cache: ModalityCache,
        image_size: int = DEFAULT_IMAGE_SIZE,
        rgb_mean: Optional[Sequence[float]] = None,
        rgb_std: Optional[Sequence[float]] = None,
        dtype=np.float32,
    ):
        self.cache = cache
        self.image_size = image_size
        self.rgb_mean = rgb_mean
        self.rgb_std = rgb_std
        self.dtype = dtype

    def require(self, records: Sequence[FrameRecord], kind: str) -> None:
        self.cache.require(records, CACHE_NEEDS[_check_kind(kind)])

    def _rgb(self, record: FrameRecord) -> np.ndarray:
        try:
            image = read_rgb(record.rgb_path)
        except IngestionError as e:
            raise IngestionError(f"frame {record.key_str}: {e}")
        return preprocess_rgb(image, self.image_size, self.rgb_mean, self.rgb_std)

    def _bnw(self, record: FrameRecord) -> np.ndarray:
        pixels = self.cache.get(record, "bnw").astype(np.uint8)
        raster = BnwRaster(pixels.shape[1], pixels.shape[0], pixels)
        return raster_to_tensor(raster, self.image_size)

    def frame(self, record: FrameRecord, kind: str) -> np.ndarray:
        kind = _check_kind(kind)
        if kind == "coords":
            return self.cache.get(record, "coords").reshape(-1)
        if kind == "blendshapes":
            return self.cache.get(record, "blendshapes")
        if kind == "rgb":
            return self._rgb(record)
        if kind == "bnw":
            return self._bnw(record)
        return np.concatenate([self._rgb(record), self._bnw(record)], axis=0)

    def load(self, records: Sequence[FrameRecord], kind: str) -> np.ndarray:
        if not records:
            return np.empty((0,), dtype=self.dtype)
        return np.stack([self.frame(record, kind) for record in records]).astype(self.dtype, copy=False)

    def load_many(self, records: Sequence[FrameRecord], kinds: Sequence[str]) -> Dict[str, np.ndarray]:
        return {kind: self.load(records, kind) for kind in kinds}


def labels_for(records: Sequence[FrameRecord]) -> np.ndarray:
    return np.asarray([int(record.label) for record in records], dtype=np.int64)


def _check_kind(kind: str) -> str:
    if kind not in INPUT_KINDS:
        raise UsageError(f"unknown input kind '{kind}'; valid: {', '.join(INPUT_KINDS)}")
    return kind
