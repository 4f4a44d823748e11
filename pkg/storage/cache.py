"""
On-disk modality cache.

One archive file per frame per modality:

    <root>/<patient_id>/<video_id>/<frame_index:06d>/<modality>.tensor

An entry is fresh when it exists and is newer than every source file it was
derived from, so a rerun only rewrites frames whose inputs changed.
"""

import logging
import os
import threading
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np

from errors import CacheMissingError, IngestionError
from storage.archive import load_archive, save_archive
from storage.records import FrameRecord

logger = logging.getLogger(__name__)

CACHED_MODALITIES = ("coords", "blendshapes", "bnw")
SUFFIX = ".tensor"


class ModalityCache:
    """
    Frame-keyed tensor store shared read-only by fold workers.

    Writes happen only during preprocessing; counters are guarded by a lock
    so preprocessing may fan out over threads.
    """

    def __init__(self, root: str):
        self.root = root
        self._lock = threading.Lock()
        self._written = 0
        self._skipped = 0

    def path_for(self, record: FrameRecord, modality: str) -> str:
        return os.path.join(
            self.root,
            record.patient_id,
            record.video_id,
            f"{record.frame_index:06d}",
            f"{modality}{SUFFIX}",
        )

    def is_fresh(
        self,
        record: FrameRecord,
        modality: str,
        sources: Iterable[str],
        expected_shape: Optional[Tuple[int, ...]] = None,
    ) -> bool:
        """
        True when the entry exists, is newer than every source and, if
        ``expected_shape`` is given, holds a tensor of that shape.
        """
        path = self.path_for(record, modality)
        if not os.path.isfile(path):
            return False
        built = os.path.getmtime(path)
        if not all(os.path.getmtime(source) <= built for source in sources if os.path.exists(source)):
            return False
        if expected_shape is None:
            return True
        try:
            return load_archive(path)[modality].shape == tuple(expected_shape)
        except (IngestionError, KeyError):
            return False

    def put(self, record: FrameRecord, modality: str, tensor: np.ndarray) -> None:
        save_archive(self.path_for(record, modality), {modality: tensor})
        with self._lock:
            self._written += 1

    def mark_skipped(self) -> None:
        with self._lock:
            self._skipped += 1

    def get(self, record: FrameRecord, modality: str) -> np.ndarray:
        """
        Load one cached tensor.

        Raises:
            CacheMissingError when the entry has not been built yet
        """
        path = self.path_for(record, modality)
        if not os.path.isfile(path):
            raise CacheMissingError(
                f"no cached {modality} for frame {record.key_str} under {self.root}; "
                f"run the 'preprocess' command first"
            )
        return load_archive(path)[modality]

    def missing(self, records: Iterable[FrameRecord], modalities: Iterable[str]) -> List[str]:
        wanted = list(modalities)
        return [
            f"{record.key_str}:{modality}"
            for record in records
            for modality in wanted
            if not os.path.isfile(self.path_for(record, modality))
        ]

    def require(self, records: Iterable[FrameRecord], modalities: Iterable[str]) -> None:
        absent = self.missing(records, modalities)
        if absent:
            raise CacheMissingError(
                f"modality cache {self.root} lacks {len(absent)} entries (first: {absent[0]}); "
                f"run the 'preprocess' command first"
            )

    def reset_counters(self) -> None:
        with self._lock:
            self._written = 0
            self._skipped = 0

    def stats(self) -> Dict[str, Any]:
        with self._lock:
            return {
                'root': self.root,
                'written': self._written,
                'skipped': self._skipped,
            }

    def __repr__(self) -> str:
        stats = self.stats()
        return f"ModalityCache(root={self.root!r}, written={stats['written']}, skipped={stats['skipped']})"
