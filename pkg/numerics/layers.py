"""
Neural layers with analytic forward/backward passes.

A layer caches what its backward pass needs during ``forward`` and
accumulates parameter gradients into ``Parameter.grad`` during ``backward``.
Gradients are zeroed by ``sgd_step`` (or ``zero_grad``).
"""

from abc import ABC, abstractmethod
from typing import Dict, List, Optional, Sequence

import numpy as np

from errors import DimensionError, ParameterError
from numerics import functional as F
from numerics.rng import RngState
from numerics.tensor import LayerMode


class Parameter:
    """A trainable tensor and its gradient."""

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value)

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad[...] = 0

    def __repr__(self) -> str:
        return f"Parameter({self.name}, shape={tuple(self.value.shape)})"


def he_normal(rng: RngState, shape, fan_in: int, dtype) -> np.ndarray:
    """He initialisation for layers followed by ReLU."""
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), shape).astype(dtype)


def xavier_normal(rng: RngState, shape, fan_in: int, fan_out: int, dtype) -> np.ndarray:
    """Xavier/Glorot initialisation for the output layer."""
    return rng.normal(0.0, np.sqrt(2.0 / (fan_in + fan_out)), shape).astype(dtype)


class Layer(ABC):
    """Base class for all layers."""

    consumes_rng = False

    def __init__(self, name: str):
        self.name = name

    def parameters(self) -> List[Parameter]:
        return []

    def buffers(self) -> Dict[str, np.ndarray]:
        """Non-trainable state that must be saved with the weights."""
        return {}

    def load_buffer(self, name: str, value: np.ndarray) -> None:
        raise KeyError(name)

    @abstractmethod
    def forward(self, x: np.ndarray, mode: LayerMode, rng: Optional[RngState]) -> np.ndarray:
        pass

    @abstractmethod
    def backward(self, grad: np.ndarray) -> np.ndarray:
        pass

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.name})"


class Dense(Layer):
    """Fully connected layer: out = x W^T + b."""

    def __init__(self, name: str, in_features: int, out_features: int, rng: RngState,
                 dtype=np.float32, init: str = "he"):
        super().__init__(name)
        if in_features < 1 or out_features < 1:
            raise ParameterError(f"{name}: dense sizes must be positive, got {in_features}x{out_features}")
        shape = (out_features, in_features)
        if init == "he":
            w = he_normal(rng, shape, in_features, dtype)
        elif init == "xavier":
            w = xavier_normal(rng, shape, in_features, out_features, dtype)
        else:
            raise ParameterError(f"{name}: unknown initialisation '{init}'")
        self.weight = Parameter(f"{name}.weight", w)
        self.bias = Parameter(f"{name}.bias", np.zeros(out_features, dtype=dtype))
        self._x = None

    @property
    def out_features(self) -> int:
        return self.weight.shape[0]

    def parameters(self) -> List[Parameter]:
        return [self.weight, self.bias]

    def forward(self, x, mode, rng=None):
        self._x = x
        return F.dense_forward(x, self.weight.value, self.bias.value)

    def backward(self, grad):
        dx, dw, db = F.dense_backward(grad, self._x, self.weight.value)
        self.weight.grad += dw
        self.bias.grad += db
        return dx


class ReLU(Layer):
    def forward(self, x, mode, rng=None):
        self._x = x
        return F.relu(x)

    def backward(self, grad):
        return F.relu_backward(grad, self._x)


class Sigmoid(Layer):
    def forward(self, x, mode, rng=None):
        self._out = F.sigmoid(x)
        return self._out

    def backward(self, grad):
        return F.sigmoid_backward(grad, self._out)


class Dropout(Layer):
    """Inverted dropout; identity in Eval mode."""

    consumes_rng = True

    def __init__(self, name: str, p: float = 0.5):
        super().__init__(name)
        if not 0 <= p < 1:
            raise ParameterError(f"{name}: dropout probability must lie in [0, 1), got {p}")
        self.p = p
        self._mask = None

    def forward(self, x, mode, rng=None):
        out, self._mask = F.dropout_forward(x, self.p, mode, rng)
        return out

    def backward(self, grad):
        return F.dropout_backward(grad, self._mask)


class BatchNorm(Layer):
    """
    Batch normalisation over features (B x F) or channels (B x C x H x W).

    Four-dimensional inputs are normalised per channel over (B, H, W).
    """

    def __init__(self, name: str, features: int, dtype=np.float32):
        super().__init__(name)
        self.gamma = Parameter(f"{name}.gamma", np.ones(features, dtype=dtype))
        self.beta = Parameter(f"{name}.beta", np.zeros(features, dtype=dtype))
        self.state = F.BatchNormState.fresh(features, dtype)
        self._x2d = None
        self._shape = None
        self._mode = LayerMode.EVAL

    def parameters(self) -> List[Parameter]:
        return [self.gamma, self.beta]

    def buffers(self) -> Dict[str, np.ndarray]:
        return {
            f"{self.name}.running_mean": self.state.running_mean,
            f"{self.name}.running_var": self.state.running_var,
        }

    def load_buffer(self, name: str, value: np.ndarray) -> None:
        attr = name[len(self.name) + 1:]
        if attr not in ("running_mean", "running_var"):
            raise KeyError(name)
        current = getattr(self.state, attr)
        if value.shape != current.shape:
            raise DimensionError(f"{name}: archive shape {value.shape} != layer shape {current.shape}")
        setattr(self.state, attr, value.astype(current.dtype))

    def _flatten(self, x: np.ndarray) -> np.ndarray:
        if x.ndim == 2:
            return x
        if x.ndim == 4:
            return x.transpose(0, 2, 3, 1).reshape(-1, x.shape[1])
        raise DimensionError(f"{self.name}: batch norm expects 2-D or 4-D input, got {tuple(x.shape)}")

    def _unflatten(self, y: np.ndarray, shape) -> np.ndarray:
        if len(shape) == 2:
            return y
        b, c, h, w = shape
        return y.reshape(b, h, w, c).transpose(0, 3, 1, 2)

    def forward(self, x, mode, rng=None):
        self._shape = x.shape
        self._mode = mode
        self._x2d = self._flatten(x)
        out = F.batchnorm1d_forward(self._x2d, self.gamma.value, self.beta.value, self.state, mode)
        return self._unflatten(out, x.shape)

    def backward(self, grad):
        g2d = self._flatten(grad)
        if self._mode is LayerMode.EVAL:
            return self._unflatten(F.batchnorm_eval_backward(g2d, self.gamma.value, self.state), self._shape)
        dx, dgamma, dbeta = F.batchnorm1d_backward(g2d, self._x2d, self.gamma.value, self.state.eps)
        self.gamma.grad += dgamma
        self.beta.grad += dbeta
        return self._unflatten(dx, self._shape)


class Conv2d(Layer):
    """2-D convolution (cross-correlation) with square kernels."""

    def __init__(self, name: str, in_channels: int, out_channels: int, kernel_size: int,
                 rng: RngState, stride: int = 1, padding: F.Padding = 0, bias: bool = True,
                 dtype=np.float32):
        super().__init__(name)
        if min(in_channels, out_channels, kernel_size, stride) < 1:
            raise ParameterError(f"{name}: conv sizes must be positive")
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        fan_in = in_channels * kernel_size * kernel_size
        self.kernel = Parameter(f"{name}.kernel", he_normal(rng, shape, fan_in, dtype))
        self.bias = Parameter(f"{name}.bias", np.zeros(out_channels, dtype=dtype)) if bias else None
        self.stride = stride
        self.padding = padding
        self._x = None

    @property
    def out_channels(self) -> int:
        return self.kernel.shape[0]

    def parameters(self) -> List[Parameter]:
        return [self.kernel] + ([self.bias] if self.bias is not None else [])

    def forward(self, x, mode, rng=None):
        self._x = x
        bias = self.bias.value if self.bias is not None else None
        return F.conv2d_forward(x, self.kernel.value, bias, self.stride, self.padding)

    def backward(self, grad):
        dx, dk, db = F.conv2d_backward(grad, self._x, self.kernel.value, self.stride, self.padding)
        self.kernel.grad += dk
        if self.bias is not None:
            self.bias.grad += db
        return dx


class GlobalAvgPool(Layer):
    def forward(self, x, mode, rng=None):
        self._shape = x.shape
        return F.global_avg_pool(x)

    def backward(self, grad):
        return F.global_avg_pool_backward(grad, self._shape)


class Sequential(Layer):
    """Layers applied in order; used for residual branches."""

    def __init__(self, name: str, layers: Sequence[Layer]):
        super().__init__(name)
        self.layers = list(layers)

    @property
    def consumes_rng(self) -> bool:
        return any(layer.consumes_rng for layer in self.layers)

    def parameters(self) -> List[Parameter]:
        return [p for layer in self.layers for p in layer.parameters()]

    def buffers(self) -> Dict[str, np.ndarray]:
        merged = {}
        for layer in self.layers:
            merged.update(layer.buffers())
        return merged

    def load_buffer(self, name: str, value: np.ndarray) -> None:
        for layer in self.layers:
            if name.startswith(layer.name + "."):
                layer.load_buffer(name, value)
                return
        raise KeyError(name)

    def forward(self, x, mode, rng=None):
        for layer in self.layers:
            x = layer.forward(x, mode, rng)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad


class ResidualBlock(Layer):
    """
    out = relu(F(x) + shortcut(x)).

    ``branch`` is F; ``shortcut`` is None for the identity or a projection
    (1x1 conv + batch norm) when the shape changes.
    """

    def __init__(self, name: str, branch: Sequential, shortcut: Optional[Sequential] = None):
        super().__init__(name)
        self.branch = branch
        self.shortcut = shortcut
        self._sum = None

    def _parts(self) -> List[Layer]:
        return [self.branch] + ([self.shortcut] if self.shortcut is not None else [])

    def parameters(self) -> List[Parameter]:
        return [p for part in self._parts() for p in part.parameters()]

    def buffers(self) -> Dict[str, np.ndarray]:
        merged = {}
        for part in self._parts():
            merged.update(part.buffers())
        return merged

    def load_buffer(self, name: str, value: np.ndarray) -> None:
        for part in self._parts():
            try:
                part.load_buffer(name, value)
                return
            except KeyError:
                continue
        raise KeyError(name)

    def forward(self, x, mode, rng=None):
        fx = self.branch.forward(x, mode, rng)
        sx = self.shortcut.forward(x, mode, rng) if self.shortcut is not None else x
        if fx.shape != sx.shape:
            raise DimensionError(
                f"{self.name}: residual branch {tuple(fx.shape)} does not match shortcut {tuple(sx.shape)}"
            )
        self._sum = fx + sx
        return F.relu(self._sum)

    def backward(self, grad):
        g = F.relu_backward(grad, self._sum)
        dx = self.branch.backward(g)
        if self.shortcut is not None:
            dx = dx + self.shortcut.backward(g)
        else:
            dx = dx + g
        return dx


def basic_block(name: str, in_channels: int, out_channels: int, stride: int,
                rng: RngState, dtype=np.float32) -> ResidualBlock:
    """conv3x3 -> bn -> relu -> conv3x3 -> bn, plus projection when needed."""
    branch = Sequential(f"{name}.branch", [
        Conv2d(f"{name}.conv1", in_channels, out_channels, 3, rng, stride, "same", bias=False, dtype=dtype),
        BatchNorm(f"{name}.bn1", out_channels, dtype),
        ReLU(f"{name}.relu1"),
        Conv2d(f"{name}.conv2", out_channels, out_channels, 3, rng, 1, "same", bias=False, dtype=dtype),
        BatchNorm(f"{name}.bn2", out_channels, dtype),
    ])
    return ResidualBlock(name, branch, _projection(name, in_channels, out_channels, stride, rng, dtype))


def bottleneck_block(name: str, in_channels: int, mid_channels: int, stride: int,
                     rng: RngState, dtype=np.float32, expansion: int = 4) -> ResidualBlock:
    """1x1 reduce -> 3x3 -> 1x1 expand, each followed by batch norm."""
    out_channels = mid_channels * expansion
    branch = Sequential(f"{name}.branch", [
        Conv2d(f"{name}.conv1", in_channels, mid_channels, 1, rng, 1, "same", bias=False, dtype=dtype),
        BatchNorm(f"{name}.bn1", mid_channels, dtype),
        ReLU(f"{name}.relu1"),
        Conv2d(f"{name}.conv2", mid_channels, mid_channels, 3, rng, stride, "same", bias=False, dtype=dtype),
        BatchNorm(f"{name}.bn2", mid_channels, dtype),
        ReLU(f"{name}.relu2"),
        Conv2d(f"{name}.conv3", mid_channels, out_channels, 1, rng, 1, "same", bias=False, dtype=dtype),
        BatchNorm(f"{name}.bn3", out_channels, dtype),
    ])
    return ResidualBlock(name, branch, _projection(name, in_channels, out_channels, stride, rng, dtype))


def _projection(name, in_channels, out_channels, stride, rng, dtype) -> Optional[Sequential]:
    if stride == 1 and in_channels == out_channels:
        return None
    return Sequential(f"{name}.shortcut", [
        Conv2d(f"{name}.proj", in_channels, out_channels, 1, rng, stride, "same", bias=False, dtype=dtype),
        BatchNorm(f"{name}.proj_bn", out_channels, dtype),
    ])


def residual_block_forward(x: np.ndarray, block: ResidualBlock, mode: LayerMode,
                           rng: Optional[RngState] = None) -> np.ndarray:
    """Functional entry point for one residual block."""
    return block.forward(x, mode, rng)
