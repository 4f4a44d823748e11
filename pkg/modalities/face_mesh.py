"""
Face-mesh topology reference.

Index groups of the 478-point face mesh produced by the upstream landmark
estimator (468 mesh points plus 10 iris points), and the names of its 52
expression (blendshape) scores.

These tables seed the shipped configuration files: the 125-point
eyes/nose/mouth subset and the contour groups drawn on BnW images.
"""

from typing import Dict, List

NUM_LANDMARKS = 478
NUM_BLENDSHAPES = 52
SUBSET_SIZE = 125

# Ordered contours (each is a polyline, closed unless noted in CONTOUR_GROUPS).
FACE_OVAL = [
    10, 338, 297, 332, 284, 251, 389, 356, 454, 323, 361, 288, 397, 365, 379, 378,
    400, 377, 152, 148, 176, 149, 150, 136, 172, 58, 132, 93, 234, 127, 162, 21,
    54, 103, 67, 109,
]
LEFT_EYEBROW = [336, 296, 334, 293, 300, 276, 283, 282, 295, 285]
RIGHT_EYEBROW = [107, 66, 105, 63, 70, 46, 53, 52, 65, 55]
LEFT_EYE = [362, 382, 381, 380, 374, 373, 390, 249, 263, 466, 388, 387, 386, 385, 384, 398]
RIGHT_EYE = [33, 7, 163, 144, 145, 153, 154, 155, 133, 173, 157, 158, 159, 160, 161, 246]
LEFT_IRIS = [473, 474, 475, 476, 477]
RIGHT_IRIS = [468, 469, 470, 471, 472]
LIPS_OUTER = [61, 146, 91, 181, 84, 17, 314, 405, 321, 375, 291, 409, 270, 269, 267, 0, 37, 39, 40, 185]
LIPS_INNER = [78, 95, 88, 178, 87, 14, 317, 402, 318, 324, 308, 415, 310, 311, 312, 13, 82, 81, 80, 191]
NOSE_BRIDGE = [168, 6, 197, 195, 5, 4, 1, 19, 94, 2]
NOSE = [
    1, 2, 4, 5, 6, 19, 45, 48, 51, 59, 64, 75, 79, 94, 97, 98, 99, 102, 115, 129,
    131, 168, 195, 197, 198, 209, 218, 219, 220, 235, 240, 275, 278, 281, 289, 294,
    305, 326, 327, 328, 331, 344, 440,
]

# Eyes (32 contour + 10 iris), mouth (40), nose (43): 125 points.
DEFAULT_SUBSET: List[int] = (
    RIGHT_EYE + LEFT_EYE + RIGHT_IRIS + LEFT_IRIS + LIPS_OUTER + LIPS_INNER + NOSE
)

# name -> (indices, closed)
CONTOUR_GROUPS = {
    "face_silhouette": (FACE_OVAL, True),
    "left_eyebrow": (LEFT_EYEBROW, True),
    "right_eyebrow": (RIGHT_EYEBROW, True),
    "left_eye": (LEFT_EYE, True),
    "right_eye": (RIGHT_EYE, True),
}
EXTRA_CONTOUR_GROUPS = {
    "lips_outer": (LIPS_OUTER, True),
    "lips_inner": (LIPS_INNER, True),
    "nose_bridge": (NOSE_BRIDGE, False),
}

BLENDSHAPE_NAMES = [
    "_neutral", "browDownLeft", "browDownRight", "browInnerUp", "browOuterUpLeft",
    "browOuterUpRight", "cheekPuff", "cheekSquintLeft", "cheekSquintRight",
    "eyeBlinkLeft", "eyeBlinkRight", "eyeLookDownLeft", "eyeLookDownRight",
    "eyeLookInLeft", "eyeLookInRight", "eyeLookOutLeft", "eyeLookOutRight",
    "eyeLookUpLeft", "eyeLookUpRight", "eyeSquintLeft", "eyeSquintRight",
    "eyeWideLeft", "eyeWideRight", "jawForward", "jawLeft", "jawOpen", "jawRight",
    "mouthClose", "mouthDimpleLeft", "mouthDimpleRight", "mouthFrownLeft",
    "mouthFrownRight", "mouthFunnel", "mouthLeft", "mouthLowerDownLeft",
    "mouthLowerDownRight", "mouthPressLeft", "mouthPressRight", "mouthPucker",
    "mouthRight", "mouthRollLower", "mouthRollUpper", "mouthShrugLower",
    "mouthShrugUpper", "mouthSmileLeft", "mouthSmileRight", "mouthStretchLeft",
    "mouthStretchRight", "mouthUpperUpLeft", "mouthUpperUpRight", "noseSneerLeft",
    "noseSneerRight",
]


def get_contour_groups(include_extras: bool = False) -> Dict[str, tuple]:
    groups = dict(CONTOUR_GROUPS)
    if include_extras:
        groups.update(EXTRA_CONTOUR_GROUPS)
    return groups
