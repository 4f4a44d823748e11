"""
Leave-one-patient-out fold planning.

Folds are produced by scikit-learn's LeaveOneGroupOut with the patient id as
the group, so every frame of the held-out patient (across all of their
videos) lands in the test set and none in training. Fold order follows the
sorted patient ids, independent of manifest order.
"""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from sklearn.model_selection import LeaveOneGroupOut

from errors import ProtocolError
from storage.records import FrameRecord, Manifest


@dataclass(frozen=True)
class Fold:
    index: int
    held_out_patient_id: str
    train: Tuple[FrameRecord, ...]
    test: Tuple[FrameRecord, ...]


@dataclass(frozen=True)
class FoldPlan:
    folds: Tuple[Fold, ...]

    def __len__(self) -> int:
        return len(self.folds)

    def __iter__(self):
        return iter(self.folds)


def lopo_folds(manifest: Manifest) -> FoldPlan:
    """One fold per patient; the held-out patient's frames form the test set."""
    if len(manifest.patients) < 2:
        raise ProtocolError(
            f"leave-one-patient-out needs at least 2 patients, manifest has {len(manifest.patients)}"
        )
    frames = manifest.frames()
    groups = np.array([frame.patient_id for frame in frames], dtype=object)
    splitter = LeaveOneGroupOut()
    folds: List[Fold] = []
    for index, (train_idx, test_idx) in enumerate(splitter.split(np.zeros(len(frames)), groups=groups)):
        held_out = {frames[i].patient_id for i in test_idx}
        if len(held_out) != 1:
            raise ProtocolError(f"fold {index} holds out {len(held_out)} patients")
        folds.append(Fold(
            index=index,
            held_out_patient_id=held_out.pop(),
            train=tuple(frames[i] for i in train_idx),
            test=tuple(frames[i] for i in test_idx),
        ))
    return FoldPlan(tuple(folds))
