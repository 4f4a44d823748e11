"""
Synthetic palsy corpus.

Writes a manifest plus per-frame landmark, blendshape and RGB files for a
set of simulated patients. Palsy intensity drives a one-sided droop of the
eye and mouth landmarks and an asymmetry between left/right expression
scores, so every modality carries signal for the binary label.
"""

import json
import logging
import os
from dataclasses import dataclass
from typing import List, Tuple

import cv2
import numpy as np

from dataset.labels import RegionIntensity, derive_binary_label
from modalities.face_mesh import (
    BLENDSHAPE_NAMES,
    FACE_OVAL,
    LEFT_EYE,
    LEFT_EYEBROW,
    LEFT_IRIS,
    LIPS_INNER,
    LIPS_OUTER,
    NOSE,
    NOSE_BRIDGE,
    NUM_LANDMARKS,
    RIGHT_EYE,
    RIGHT_EYEBROW,
    RIGHT_IRIS,
)
from errors import OutputError, ParameterError
from numerics.rng import RngState

logger = logging.getLogger(__name__)

# Droop (normalised units) per intensity level on the affected side.
EYE_DROOP = (0.0, 0.02, 0.05)
MOUTH_DROOP = (0.0, 0.02, 0.05)
# Left/right expression-score gap per intensity level.
EXPRESSION_GAP = (0.0, 0.25, 0.6)

_BLEND = {name: i for i, name in enumerate(BLENDSHAPE_NAMES)}
_EYE_PAIRS = [("eyeBlinkLeft", "eyeBlinkRight"), ("eyeSquintLeft", "eyeSquintRight"),
              ("browDownLeft", "browDownRight")]
_MOUTH_PAIRS = [("mouthSmileLeft", "mouthSmileRight"), ("mouthFrownLeft", "mouthFrownRight"),
                ("mouthStretchLeft", "mouthStretchRight"), ("mouthPressLeft", "mouthPressRight")]


@dataclass
class SyntheticCorpus:
    manifest_path: str
    patients: int
    videos: int
    frames: int
    positives: int


def _ellipse(count: int, center: Tuple[float, float], radii: Tuple[float, float],
             start: float = -np.pi / 2) -> np.ndarray:
    angles = start + np.linspace(0.0, 2 * np.pi, count, endpoint=False)
    return np.stack([center[0] + radii[0] * np.cos(angles), center[1] + radii[1] * np.sin(angles)], axis=1)


def _arc(count: int, center: Tuple[float, float], width: float, lift: float) -> np.ndarray:
    t = np.linspace(-1.0, 1.0, count)
    return np.stack([center[0] + width * t, center[1] - lift * (1 - t ** 2)], axis=1)


def face_template(rng: RngState) -> np.ndarray:
    """A neutral 478 x 3 face mesh with every named group on its contour."""
    points = np.zeros((NUM_LANDMARKS, 3), dtype=np.float64)
    radius = np.sqrt(rng.uniform(0.0, 1.0, (NUM_LANDMARKS,)))
    theta = rng.uniform(0.0, 2 * np.pi, (NUM_LANDMARKS,))
    points[:, 0] = 0.5 + 0.26 * radius * np.cos(theta)
    points[:, 1] = 0.52 + 0.33 * radius * np.sin(theta)
    points[:, 2] = rng.normal(0.0, 0.02, (NUM_LANDMARKS,))

    points[FACE_OVAL, :2] = _ellipse(len(FACE_OVAL), (0.5, 0.52), (0.3, 0.38))
    points[RIGHT_EYE, :2] = _ellipse(len(RIGHT_EYE), (0.38, 0.42), (0.06, 0.025), start=np.pi)
    points[LEFT_EYE, :2] = _ellipse(len(LEFT_EYE), (0.62, 0.42), (0.06, 0.025), start=np.pi)
    for iris, center in ((RIGHT_IRIS, (0.38, 0.42)), (LEFT_IRIS, (0.62, 0.42))):
        points[iris[0], :2] = center
        points[iris[1:], :2] = _ellipse(len(iris) - 1, center, (0.015, 0.015))
    points[RIGHT_EYEBROW, :2] = _arc(len(RIGHT_EYEBROW), (0.38, 0.35), 0.07, 0.02)
    points[LEFT_EYEBROW, :2] = _arc(len(LEFT_EYEBROW), (0.62, 0.35), 0.07, 0.02)
    points[LIPS_OUTER, :2] = _ellipse(len(LIPS_OUTER), (0.5, 0.72), (0.12, 0.05), start=np.pi)
    points[LIPS_INNER, :2] = _ellipse(len(LIPS_INNER), (0.5, 0.72), (0.09, 0.02), start=np.pi)
    points[NOSE, :2] = np.stack([
        0.5 + rng.uniform(-0.05, 0.05, (len(NOSE),)),
        0.56 + rng.uniform(-0.06, 0.06, (len(NOSE),)),
    ], axis=1)
    points[NOSE_BRIDGE, 0] = 0.5
    points[NOSE_BRIDGE, 1] = np.linspace(0.42, 0.62, len(NOSE_BRIDGE))
    return points


def apply_palsy(points: np.ndarray, eye: RegionIntensity, mouth: RegionIntensity) -> np.ndarray:
    """Droop the subject's right eye, brow and mouth corner by intensity."""
    out = points.copy()
    eye_group = RIGHT_EYE + RIGHT_EYEBROW + RIGHT_IRIS
    out[eye_group, 1] += EYE_DROOP[eye]
    lips = np.asarray(LIPS_OUTER + LIPS_INNER)
    right_side = lips[out[lips, 0] < 0.5]
    # droop grows toward the mouth corner
    weight = (0.5 - out[right_side, 0]) / 0.12
    out[right_side, 1] += MOUTH_DROOP[mouth] * np.clip(weight, 0.0, 1.0)
    return out


def expression_scores(rng: RngState, eye: RegionIntensity, mouth: RegionIntensity) -> np.ndarray:
    scores = rng.uniform(0.0, 0.2, (len(BLENDSHAPE_NAMES),))
    for pairs, level in ((_EYE_PAIRS, eye), (_MOUTH_PAIRS, mouth)):
        for left, right in pairs:
            base = float(rng.uniform(0.2, 0.35))
            scores[_BLEND[left]] = base + EXPRESSION_GAP[level]
            scores[_BLEND[right]] = base
    scores += rng.normal(0.0, 0.02, scores.shape)
    return np.clip(scores, 0.0, 1.0)


def render_face(points: np.ndarray, size: int, rng: RngState) -> np.ndarray:
    """Draw the mesh as a simple shaded face; returns an RGB uint8 image."""
    canvas = rng.integers(0, 40, (size, size, 3)).astype(np.uint8)

    def pixels(indices) -> np.ndarray:
        return np.round(points[indices, :2] * (size - 1)).astype(np.int32)

    cv2.fillPoly(canvas, [pixels(FACE_OVAL)], (205, 170, 140))
    for group in (RIGHT_EYE, LEFT_EYE):
        cv2.fillPoly(canvas, [pixels(group)], (245, 245, 245))
    for group in (RIGHT_EYEBROW, LEFT_EYEBROW):
        cv2.polylines(canvas, [pixels(group)], False, (70, 45, 30), 1)
    cv2.fillPoly(canvas, [pixels(LIPS_OUTER)], (170, 60, 70))
    cv2.fillPoly(canvas, [pixels(LIPS_INNER)], (90, 20, 30))
    cv2.polylines(canvas, [pixels(NOSE_BRIDGE)], False, (150, 110, 90), 1)
    return canvas


def _draw_intensities(rng: RngState, severity: np.ndarray) -> Tuple[RegionIntensity, RegionIntensity]:
    eye, mouth = (int(rng.integers(0, 3)) if rng.random(1)[0] < 0.3
                  else int(np.argmax(rng.uniform(0.0, 1.0, (3,)) * severity)) for _ in range(2))
    return RegionIntensity(eye), RegionIntensity(mouth)


def generate_synthetic_corpus(
    root: str,
    n_patients: int = 21,
    frames_per_video: int = 6,
    image_size: int = 64,
    seed: int = 0,
) -> SyntheticCorpus:
    """
    Write a synthetic corpus under `root` and return its summary.

    Every third patient gets a second video. Files are laid out as
    <patient>/<video>/<frame:06d>_{landmarks.txt,blendshapes.txt,rgb.png}.
    """
    if n_patients < 1 or frames_per_video < 1:
        raise ParameterError("synthetic corpus needs at least one patient and one frame per video")
    if image_size < 8:
        raise ParameterError(f"synthetic image size must be >= 8, got {image_size}")

    rng = RngState(seed)
    patients = []
    videos = frames = positives = 0
    try:
        os.makedirs(root, exist_ok=True)
        for p in range(n_patients):
            patient_id = f"patient_{p + 1:02d}"
            patient_rng = rng.child(p)
            template = face_template(patient_rng)
            severity = patient_rng.uniform(0.2, 1.0, (3,))
            video_entries = []
            for v in range(2 if p % 3 == 2 else 1):
                video_id = f"video_{v + 1}"
                directory = os.path.join(root, patient_id, video_id)
                os.makedirs(directory, exist_ok=True)
                frame_entries = []
                for f in range(frames_per_video):
                    eye, mouth = _draw_intensities(patient_rng, severity)
                    mesh = apply_palsy(template, eye, mouth)
                    mesh[:, :2] += patient_rng.normal(0.0, 0.002, (NUM_LANDMARKS, 2))
                    mesh[:, :2] = np.clip(mesh[:, :2], 0.0, 1.0)
                    stem = f"{f:06d}"
                    _write_landmarks(os.path.join(directory, f"{stem}_landmarks.txt"), mesh)
                    _write_blendshapes(os.path.join(directory, f"{stem}_blendshapes.txt"),
                                       expression_scores(patient_rng, eye, mouth))
                    image = render_face(mesh, image_size, patient_rng)
                    cv2.imwrite(os.path.join(directory, f"{stem}_rgb.png"), cv2.cvtColor(image, cv2.COLOR_RGB2BGR))
                    relative = f"{patient_id}/{video_id}/{stem}"
                    frame_entries.append({
                        "index": f,
                        "rgb": f"{relative}_rgb.png",
                        "landmarks": f"{relative}_landmarks.txt",
                        "blendshapes": f"{relative}_blendshapes.txt",
                        "eye": eye.token,
                        "mouth": mouth.token,
                    })
                    frames += 1
                    positives += int(derive_binary_label(eye, mouth))
                video_entries.append({"video_id": video_id, "fps": 6, "frames": frame_entries})
                videos += 1
            patients.append({"patient_id": patient_id, "videos": video_entries})

        manifest_path = os.path.join(root, "manifest.json")
        with open(manifest_path, 'w') as f:
            json.dump({"patients": patients}, f, indent=1)
    except OSError as e:
        raise OutputError(f"cannot write synthetic corpus under {root}: {e}")

    logger.info("synthetic corpus %s: %d patients, %d videos, %d frames (%d positive)",
                root, n_patients, videos, frames, positives)
    return SyntheticCorpus(manifest_path, n_patients, videos, frames, positives)


def _write_landmarks(path: str, mesh: np.ndarray) -> None:
    with open(path, 'w') as f:
        f.writelines(f"{x:.6f},{y:.6f},{z:.6f}\n" for x, y, z in mesh)


def _write_blendshapes(path: str, scores: np.ndarray) -> None:
    with open(path, 'w') as f:
        f.writelines(f"{name},{value:.6f}\n" for name, value in zip(BLENDSHAPE_NAMES, scores))


def separable_blendshape_data(
    n_per_class: int = 500,
    seed: int = 0,
    separation: float = 1.0,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Two Gaussian clusters in the 52-dim blendshape space, clipped to [0, 1].

    Returns (features N x 52, labels N) with classes interleaved by a
    seeded shuffle.
    """
    rng = RngState(seed)
    dim = len(BLENDSHAPE_NAMES)
    direction = np.zeros(dim)
    direction[: dim // 2] = 1.0
    direction /= np.linalg.norm(direction)
    centers = [np.full(dim, 0.4) - separation / 2 * direction, np.full(dim, 0.4) + separation / 2 * direction]
    features: List[np.ndarray] = []
    labels: List[np.ndarray] = []
    for label, center in enumerate(centers):
        features.append(center + rng.normal(0.0, 0.05, (n_per_class, dim)))
        labels.append(np.full(n_per_class, label, dtype=np.int64))
    x = np.clip(np.concatenate(features), 0.0, 1.0)
    y = np.concatenate(labels)
    order = rng.permutation(len(y))
    return x[order], y[order]
