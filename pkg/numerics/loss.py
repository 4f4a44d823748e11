"""
Binary cross-entropy on sigmoid probabilities.

Each log argument is floored at EPSILON, so a perfect prediction costs exactly
0 and the worst prediction costs -ln(EPSILON) instead of infinity.
"""

from typing import Tuple

import numpy as np

from errors import DimensionError, LabelError

EPSILON = 1e-7


def bce_loss(p: np.ndarray, y: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Mean BCE over all B*U elements.

    Args:
        p: Probabilities, shape B x U
        y: Targets in {0, 1}, same shape

    Returns:
        (loss, gradient of the loss w.r.t. p)
    """
    if p.shape != y.shape:
        raise DimensionError(f"probabilities {tuple(p.shape)} and targets {tuple(y.shape)} differ")
    if not np.all((y == 0) | (y == 1)):
        raise LabelError("BCE targets must be 0 or 1")
    pos = np.maximum(p, EPSILON)
    neg = np.maximum(1 - p, EPSILON)
    per_element = -(y * np.log(pos) + (1 - y) * np.log(neg))
    n = p.size
    grad = (-y / pos + (1 - y) / neg) / n
    return float(per_element.sum() / n), grad.astype(p.dtype, copy=False)
