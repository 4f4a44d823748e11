"""
Dataset: manifest ingestion, the binary label rule, LOPO fold planning,
seeded batching and the synthetic corpus generator.
"""

from .labels import BinaryLabel, RegionIntensity, derive_binary_label, one_hot
from .manifest import load_manifest
from .folds import Fold, FoldPlan, lopo_folds
from .batching import DEFAULT_BATCH_SIZE, batch_iterator

__all__ = [
    'BinaryLabel',
    'RegionIntensity',
    'derive_binary_label',
    'one_hot',
    'load_manifest',
    'Fold',
    'FoldPlan',
    'lopo_folds',
    'DEFAULT_BATCH_SIZE',
    'batch_iterator',
]
