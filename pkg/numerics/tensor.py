"""
Tensor conventions.

A tensor is a dense ``numpy.ndarray``. Element precision is chosen at
construction: "single" (float32, the default for training) or "double"
(float64, used by the gradient verification suite).
"""

from enum import Enum
from typing import Union

import numpy as np

from errors import ParameterError


class LayerMode(Enum):
    """Switches dropout and batch-norm behavior."""
    TRAIN = "train"
    EVAL = "eval"


PRECISIONS = {
    "single": np.float32,
    "double": np.float64,
}


def resolve_dtype(precision: Union[str, type, np.dtype]) -> np.dtype:
    """Map a precision name (or dtype) to a numpy float dtype."""
    if isinstance(precision, str):
        if precision not in PRECISIONS:
            raise ParameterError(
                f"unknown precision '{precision}', expected one of {sorted(PRECISIONS)}"
            )
        return np.dtype(PRECISIONS[precision])
    dtype = np.dtype(precision)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ParameterError(f"unsupported tensor dtype {dtype}")
    return dtype


def as_tensor(data, precision: Union[str, type, np.dtype] = "single") -> np.ndarray:
    """Copy ``data`` into a contiguous float tensor of the given precision."""
    return np.ascontiguousarray(np.asarray(data, dtype=resolve_dtype(precision)))

