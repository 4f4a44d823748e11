"""
Manifest ingestion.

The manifest is a JSON document:

    {"patients": [{"patient_id": ..., "videos": [{"video_id": ..., "fps": 6,
        "frames": [{"index", "rgb", "landmarks", "blendshapes", "eye", "mouth"}]}]}]}

Paths are relative to the manifest's directory. The schema is checked with
pydantic, then semantic rules are applied: unique frame keys, strictly
increasing frame indices per video, a closed intensity vocabulary and
existing files.
"""

import json
import logging
import os
from typing import List

from pydantic import BaseModel, Field, ValidationError

from dataset.labels import RegionIntensity
from errors import IngestionError
from storage.records import FrameRecord, Manifest, PatientEntry, VideoEntry

logger = logging.getLogger(__name__)


class FrameEntryModel(BaseModel):
    index: int = Field(ge=0)
    rgb: str
    landmarks: str
    blendshapes: str
    eye: str
    mouth: str


class VideoEntryModel(BaseModel):
    video_id: str
    fps: float = 6.0
    frames: List[FrameEntryModel]


class PatientEntryModel(BaseModel):
    patient_id: str
    videos: List[VideoEntryModel]


class ManifestModel(BaseModel):
    patients: List[PatientEntryModel]


def _describe_validation_error(error: ValidationError) -> str:
    first = error.errors()[0]
    location = ".".join(str(part) for part in first["loc"])
    return f"{location}: {first['msg']}"


def load_manifest(path: str, check_files: bool = True) -> Manifest:
    """
    Load and validate a manifest file.

    Args:
        path: Path to the manifest JSON
        check_files: Verify that every referenced file exists

    Returns:
        Validated Manifest

    Raises:
        IngestionError naming the offending record
    """
    try:
        with open(path, 'r') as f:
            raw = json.load(f)
    except FileNotFoundError:
        raise IngestionError(f"manifest not found: {path}")
    except json.JSONDecodeError as e:
        raise IngestionError(f"manifest {path} is not valid JSON: {e}")

    try:
        schema = ManifestModel.model_validate(raw)
    except ValidationError as e:
        raise IngestionError(f"manifest {path} violates the schema at {_describe_validation_error(e)}")

    root = os.path.dirname(os.path.abspath(path))
    seen_keys = set()
    seen_patients = set()
    patients = []

    for patient in schema.patients:
        if patient.patient_id in seen_patients:
            raise IngestionError(f"patient '{patient.patient_id}' is listed twice")
        seen_patients.add(patient.patient_id)
        videos = []
        for video in patient.videos:
            frames = []
            previous_index = -1
            for entry in video.frames:
                key = (patient.patient_id, video.video_id, entry.index)
                key_str = "/".join(str(part) for part in key)
                if key in seen_keys:
                    raise IngestionError(f"duplicate frame key {key_str}")
                seen_keys.add(key)
                if entry.index <= previous_index:
                    raise IngestionError(
                        f"frame {key_str}: indices must increase strictly within a video "
                        f"(previous {previous_index})"
                    )
                previous_index = entry.index
                try:
                    eye = RegionIntensity.parse(entry.eye)
                    mouth = RegionIntensity.parse(entry.mouth)
                except IngestionError as e:
                    raise IngestionError(f"frame {key_str}: {e}")
                record = FrameRecord(
                    patient_id=patient.patient_id,
                    video_id=video.video_id,
                    frame_index=entry.index,
                    rgb_path=os.path.join(root, entry.rgb),
                    landmark_path=os.path.join(root, entry.landmarks),
                    blendshape_path=os.path.join(root, entry.blendshapes),
                    eye=eye,
                    mouth=mouth,
                )
                if check_files:
                    _check_files(record)
                frames.append(record)
            if video.fps != 6.0:
                logger.debug("video %s/%s sampled at %s fps", patient.patient_id, video.video_id, video.fps)
            videos.append(VideoEntry(video.video_id, video.fps, tuple(frames)))
        patients.append(PatientEntry(patient.patient_id, tuple(videos)))

    manifest = Manifest(root=root, patients=tuple(patients))
    logger.info("loaded manifest %s: %s", path, manifest.stats())
    return manifest


def _check_files(record: FrameRecord) -> None:
    for kind, file_path in (
        ('rgb', record.rgb_path),
        ('landmarks', record.landmark_path),
        ('blendshapes', record.blendshape_path),
    ):
        if not os.path.isfile(file_path):
            raise IngestionError(f"frame {record.key_str}: missing {kind} file {file_path}")
