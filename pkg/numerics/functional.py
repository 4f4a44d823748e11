"""
Stateless forward and backward kernels.

Each forward op has a matching ``*_backward`` that returns exact analytic
gradients. Layers in ``numerics.layers`` keep whatever the backward needs.
"""

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from errors import BatchSizeError, DimensionError, ParameterError, ShapeError
from numerics.rng import RngState
from numerics.tensor import LayerMode

BN_EPSILON = 1e-5
BN_MOMENTUM = 0.1

Padding = Union[int, str]


# ---------------------------------------------------------------------------
# Dense
# ---------------------------------------------------------------------------

def dense_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """out[b, o] = sum_i weight[o, i] * x[b, i] + bias[o]."""
    if x.ndim != 2 or weight.ndim != 2 or weight.shape[1] != x.shape[1]:
        raise DimensionError(
            f"dense input {tuple(x.shape)} does not conform to weight {tuple(weight.shape)}"
        )
    if bias.shape != (weight.shape[0],):
        raise DimensionError(
            f"dense bias {tuple(bias.shape)} does not conform to weight {tuple(weight.shape)}"
        )
    return x @ weight.T + bias


def dense_backward(
    grad_out: np.ndarray, x: np.ndarray, weight: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dx, dweight, dbias)."""
    return grad_out @ weight, grad_out.T @ x, grad_out.sum(axis=0)


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------

def relu(x: np.ndarray) -> np.ndarray:
    """Elementwise max(x, 0), keeping the input dtype."""
    return np.maximum(x, 0).astype(x.dtype, copy=False)


def relu_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    # subgradient at 0 is 0
    return grad_out * (x > 0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    return expit(x)


def sigmoid_backward(grad_out: np.ndarray, out: np.ndarray) -> np.ndarray:
    return grad_out * out * (1 - out)


# ---------------------------------------------------------------------------
# Dropout
# ---------------------------------------------------------------------------

def dropout_forward(
    x: np.ndarray, p: float, mode: LayerMode, rng: Optional[RngState]
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """
    Inverted dropout.

    Returns the output and the scaled keep-mask (None in Eval mode). Train
    mode always draws from ``rng``, even for p == 0.
    """
    if not 0 <= p < 1:
        raise ParameterError(f"dropout probability must lie in [0, 1), got {p}")
    if mode is LayerMode.EVAL:
        return x, None
    if rng is None:
        raise ParameterError("Train-mode dropout requires an RngState")
    keep = rng.random(x.shape) >= p
    mask = keep.astype(x.dtype) / x.dtype.type(1 - p)
    return x * mask, mask


def dropout_backward(grad_out: np.ndarray, mask: Optional[np.ndarray]) -> np.ndarray:
    return grad_out if mask is None else grad_out * mask


# ---------------------------------------------------------------------------
# Batch normalisation
# ---------------------------------------------------------------------------

@dataclass
class BatchNormState:
    """Running statistics of one batch-norm layer."""
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = BN_MOMENTUM
    eps: float = BN_EPSILON

    @classmethod
    def fresh(cls, features: int, dtype) -> "BatchNormState":
        return cls(np.zeros(features, dtype=dtype), np.ones(features, dtype=dtype))


def batchnorm1d_forward(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    state: BatchNormState,
    mode: LayerMode,
) -> np.ndarray:
    """
    Normalise each feature column of ``x`` (B x F).

    Train mode uses batch statistics and updates the running statistics in
    ``state``; Eval mode uses the running statistics.
    """
    if x.ndim != 2 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise DimensionError(
            f"batchnorm input {tuple(x.shape)} does not conform to "
            f"gamma {tuple(gamma.shape)} / beta {tuple(beta.shape)}"
        )
    if mode is LayerMode.EVAL:
        inv_std = 1.0 / np.sqrt(state.running_var + state.eps)
        return ((x - state.running_mean) * inv_std * gamma + beta).astype(x.dtype, copy=False)

    n = x.shape[0]
    if n < 2:
        raise BatchSizeError(f"Train-mode batch norm needs at least 2 rows, got {n}")
    mean = x.mean(axis=0)
    var = x.var(axis=0)
    xhat = (x - mean) / np.sqrt(var + state.eps)
    m = state.momentum
    state.running_mean = ((1 - m) * state.running_mean + m * mean).astype(x.dtype)
    state.running_var = ((1 - m) * state.running_var + m * var * n / (n - 1)).astype(x.dtype)
    return xhat * gamma + beta


def batchnorm1d_backward(
    grad_out: np.ndarray, x: np.ndarray, gamma: np.ndarray, eps: float = BN_EPSILON
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Train-mode gradients (dx, dgamma, dbeta); batch statistics are recomputed from x."""
    n = x.shape[0]
    mean = x.mean(axis=0)
    inv_std = 1.0 / np.sqrt(x.var(axis=0) + eps)
    xhat = (x - mean) * inv_std
    dgamma = (grad_out * xhat).sum(axis=0)
    dbeta = grad_out.sum(axis=0)
    dxhat = grad_out * gamma
    dx = inv_std / n * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
    return dx, dgamma, dbeta


def batchnorm_eval_backward(
    grad_out: np.ndarray, gamma: np.ndarray, state: BatchNormState
) -> np.ndarray:
    """Input gradient of Eval-mode batch norm (an affine map)."""
    return grad_out * gamma / np.sqrt(state.running_var + state.eps)


# ---------------------------------------------------------------------------
# Convolution
# ---------------------------------------------------------------------------

def resolve_padding(size: int, kernel: int, stride: int, padding: Padding) -> Tuple[int, int, int]:
    """
    Return (pad_before, pad_after, out_size) for one spatial axis.

    Integer padding must give an integral output size. "same" padding yields
    ceil(size / stride) outputs with the total pad split before/after.
    """
    if padding == "same":
        out = -(-size // stride)
        total = max((out - 1) * stride + kernel - size, 0)
        return total // 2, total - total // 2, out
    if not isinstance(padding, int) or padding < 0:
        raise ParameterError(f"padding must be a non-negative int or 'same', got {padding!r}")
    span = size + 2 * padding - kernel
    if span < 0 or span % stride != 0:
        raise ShapeError(
            f"output size ({size} + 2*{padding} - {kernel}) / {stride} + 1 is not integral"
        )
    return padding, padding, span // stride + 1


@dataclass
class ConvGeometry:
    stride: int
    pads: Tuple[int, int, int, int]   # top, bottom, left, right
    out_hw: Tuple[int, int]


def conv_geometry(x_shape, kernel_shape, stride: int, padding: Padding) -> ConvGeometry:
    """Validate conv operand shapes and resolve output size and padding."""
    if len(x_shape) != 4 or len(kernel_shape) != 4 or kernel_shape[1] != x_shape[1]:
        raise DimensionError(
            f"conv input {tuple(x_shape)} does not conform to kernel {tuple(kernel_shape)}"
        )
    if kernel_shape[2] != kernel_shape[3]:
        raise DimensionError(f"conv kernel must be square, got {tuple(kernel_shape)}")
    if stride < 1:
        raise ParameterError(f"stride must be >= 1, got {stride}")
    k = kernel_shape[2]
    top, bottom, out_h = resolve_padding(x_shape[2], k, stride, padding)
    left, right, out_w = resolve_padding(x_shape[3], k, stride, padding)
    return ConvGeometry(stride, (top, bottom, left, right), (out_h, out_w))


def _pad(x: np.ndarray, pads: Tuple[int, int, int, int]) -> np.ndarray:
    top, bottom, left, right = pads
    if not any(pads):
        return x
    return np.pad(x, ((0, 0), (0, 0), (top, bottom), (left, right)))


def im2col(x: np.ndarray, k: int, geom: ConvGeometry) -> np.ndarray:
    """Patch matrix of shape (B*H'*W', C*k*k)."""
    b, c = x.shape[:2]
    out_h, out_w = geom.out_hw
    s = geom.stride
    windows = sliding_window_view(_pad(x, geom.pads), (k, k), axis=(2, 3))
    windows = windows[:, :, : (out_h - 1) * s + 1 : s, : (out_w - 1) * s + 1 : s]
    return windows.transpose(0, 2, 3, 1, 4, 5).reshape(b * out_h * out_w, c * k * k)


def conv2d_forward(
    x: np.ndarray,
    kernel: np.ndarray,
    bias: Optional[np.ndarray],
    stride: int = 1,
    padding: Padding = 0,
) -> np.ndarray:
    """Cross-correlation of x (B x C x H x W) with kernel (K x C x k x k)."""
    geom = conv_geometry(x.shape, kernel.shape, stride, padding)
    n_out = kernel.shape[0]
    if bias is not None and bias.shape != (n_out,):
        raise DimensionError(f"conv bias {tuple(bias.shape)} does not match {n_out} kernels")
    cols = im2col(x, kernel.shape[2], geom)
    out = cols @ kernel.reshape(n_out, -1).T
    if bias is not None:
        out = out + bias
    out_h, out_w = geom.out_hw
    return out.reshape(x.shape[0], out_h, out_w, n_out).transpose(0, 3, 1, 2)


def conv2d_backward(
    grad_out: np.ndarray,
    x: np.ndarray,
    kernel: np.ndarray,
    stride: int = 1,
    padding: Padding = 0,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dx, dkernel, dbias)."""
    geom = conv_geometry(x.shape, kernel.shape, stride, padding)
    b, c, h, w = x.shape
    n_out, _, k, _ = kernel.shape
    out_h, out_w = geom.out_hw
    g = grad_out.transpose(0, 2, 3, 1).reshape(-1, n_out)

    cols = im2col(x, k, geom)
    dkernel = (g.T @ cols).reshape(kernel.shape)
    dbias = g.sum(axis=0)

    dcols = (g @ kernel.reshape(n_out, -1)).reshape(b, out_h, out_w, c, k, k)
    top, bottom, left, right = geom.pads
    dxp = np.zeros((b, c, h + top + bottom, w + left + right), dtype=x.dtype)
    s = stride
    for i in range(k):
        for j in range(k):
            dxp[:, :, i : i + s * out_h : s, j : j + s * out_w : s] += dcols[..., i, j].transpose(0, 3, 1, 2)
    dx = dxp[:, :, top : top + h, left : left + w]
    return dx, dkernel, dbias


# ---------------------------------------------------------------------------
# Pooling
# ---------------------------------------------------------------------------

def global_avg_pool(x: np.ndarray) -> np.ndarray:
    """
    Average each channel over its spatial extent.

    Args:
        x: B x C x H x W activations

    Returns:
        B x C channel means

    Raises:
        DimensionError: input is not rank 4
    """
    if x.ndim != 4:
        raise DimensionError(f"global pooling expects B x C x H x W, got {tuple(x.shape)}")
    return x.mean(axis=(2, 3))


def global_avg_pool_backward(grad_out: np.ndarray, x_shape) -> np.ndarray:
    # spreads each channel gradient evenly over H x W
    h, w = x_shape[2], x_shape[3]
    scaled = grad_out / (h * w)
    return np.broadcast_to(scaled[:, :, None, None], x_shape).copy()
