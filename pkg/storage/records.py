"""
Frame-level records of a palsy video corpus.

A Manifest owns patients, a patient owns videos, a video owns its ordered
frames. Records are immutable once loaded and can be shared read-only
across fold workers.
"""

from dataclasses import dataclass
from typing import Any, Dict, Iterator, List, Tuple

from dataset.labels import BinaryLabel, RegionIntensity, derive_binary_label


FrameKey = Tuple[str, str, int]


@dataclass(frozen=True)
class FrameRecord:
    """One sampled video frame: file paths, region labels and identity."""
    patient_id: str
    video_id: str
    frame_index: int
    rgb_path: str
    landmark_path: str
    blendshape_path: str
    eye: RegionIntensity
    mouth: RegionIntensity

    @property
    def key(self) -> FrameKey:
        return (self.patient_id, self.video_id, self.frame_index)

    @property
    def key_str(self) -> str:
        return f"{self.patient_id}/{self.video_id}/{self.frame_index}"

    @property
    def label(self) -> BinaryLabel:
        return derive_binary_label(self.eye, self.mouth)


@dataclass(frozen=True)
class VideoEntry:
    video_id: str
    fps: float
    frames: Tuple[FrameRecord, ...]


@dataclass(frozen=True)
class PatientEntry:
    patient_id: str
    videos: Tuple[VideoEntry, ...]

    def frames(self) -> List[FrameRecord]:
        return [frame for video in self.videos for frame in video.frames]


@dataclass(frozen=True)
class Manifest:
    """Validated corpus description."""
    root: str
    patients: Tuple[PatientEntry, ...]

    def frames(self) -> List[FrameRecord]:
        return [frame for patient in self.patients for frame in patient.frames()]

    def __iter__(self) -> Iterator[FrameRecord]:
        return iter(self.frames())

    @property
    def patient_ids(self) -> List[str]:
        return [patient.patient_id for patient in self.patients]

    def stats(self) -> Dict[str, Any]:
        frames = self.frames()
        positives = sum(1 for frame in frames if frame.label == BinaryLabel.POSITIVE)
        return {
            'patients': len(self.patients),
            'videos': sum(len(p.videos) for p in self.patients),
            'frames': len(frames),
            'positive_frames': positives,
            'negative_frames': len(frames) - positives,
        }
