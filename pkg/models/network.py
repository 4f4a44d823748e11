"""
Built networks and the decision rules applied to their outputs.

A Network is an ordered list of layers with named embedding taps. Its
parameters and batch-norm buffers round-trip through the named-tensor
archive.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from errors import ConfigError, DimensionError, IngestionError, ParameterError, TapError
from numerics.layers import BatchNorm, Layer, Parameter
from numerics.rng import RngState
from numerics.tensor import LayerMode
from storage.archive import load_archive, save_archive

logger = logging.getLogger(__name__)

# Per-sample input shape; None matches any size on that axis.
InputShape = Tuple[Optional[int], ...]


@dataclass(frozen=True)
class EmbeddingTap:
    name: str
    layer: str
    dim: int


class Network:
    """
    A sequential model with embedding taps.

    Eval-mode forward passes never touch the RNG, so inference on a trained
    network is deterministic and reentrant.
    """

    def __init__(
        self,
        name: str,
        layers: Sequence[Layer],
        input_shape: InputShape,
        taps: Sequence[EmbeddingTap] = (),
        dtype=np.float32,
    ):
        self.name = name
        self.layers = list(layers)
        self.input_shape = tuple(input_shape)
        self.dtype = np.dtype(dtype)
        self.mode = LayerMode.EVAL
        self._layer_index = {}
        for i, layer in enumerate(self.layers):
            if layer.name in self._layer_index:
                raise ConfigError(f"{name}: duplicate layer name '{layer.name}'")
            self._layer_index[layer.name] = i

        seen = set()
        for param in self.parameters():
            if param.name in seen:
                raise ConfigError(f"{name}: duplicate parameter name '{param.name}'")
            seen.add(param.name)

        self.taps: Dict[str, EmbeddingTap] = OrderedDict()
        for tap in taps:
            if tap.layer not in self._layer_index:
                raise ConfigError(f"{name}: tap '{tap.name}' names unknown layer '{tap.layer}'")
            self.taps[tap.name] = tap
        self._stop: Optional[int] = None

    @property
    def consumes_rng(self) -> bool:
        return any(layer.consumes_rng for layer in self.layers)

    @property
    def has_batchnorm(self) -> bool:
        return any(isinstance(layer, BatchNorm) or layer.buffers() for layer in self.layers)

    def parameters(self) -> List[Parameter]:
        return [p for layer in self.layers for p in layer.parameters()]

    def buffers(self) -> Dict[str, np.ndarray]:
        merged = OrderedDict()
        for layer in self.layers:
            merged.update(layer.buffers())
        return merged

    def tap(self, name: str) -> EmbeddingTap:
        if name not in self.taps:
            raise TapError(f"{self.name} has no tap '{name}'; registered: {', '.join(self.taps) or 'none'}")
        return self.taps[name]

    def check_input(self, x: np.ndarray) -> None:
        sample = tuple(x.shape[1:])
        ok = len(sample) == len(self.input_shape) and all(
            want is None or want == got for want, got in zip(self.input_shape, sample)
        )
        if x.ndim < 1 or not ok:
            expected = "x".join("S" if d is None else str(d) for d in self.input_shape)
            raise DimensionError(f"{self.name} expects B x {expected} input, got {tuple(x.shape)}")

    def _run(self, x: np.ndarray, mode: LayerMode, rng: Optional[RngState], stop: int) -> np.ndarray:
        self.check_input(x)
        if mode is LayerMode.TRAIN and rng is None and any(l.consumes_rng for l in self.layers[:stop + 1]):
            raise ParameterError(f"{self.name}: Train-mode forward needs an RngState for dropout")
        self.mode = mode
        out = np.asarray(x, dtype=self.dtype)
        for layer in self.layers[:stop + 1]:
            out = layer.forward(out, mode, rng)
        self._stop = stop
        return out

    def forward(self, x: np.ndarray, mode: LayerMode = LayerMode.EVAL, rng: Optional[RngState] = None) -> np.ndarray:
        return self._run(x, mode, rng, len(self.layers) - 1)

    def forward_to(self, x: np.ndarray, tap: str, mode: LayerMode = LayerMode.EVAL,
                   rng: Optional[RngState] = None) -> np.ndarray:
        """Activation at a tap; only the layers up to the tap run."""
        return self._run(x, mode, rng, self._layer_index[self.tap(tap).layer])

    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Backpropagate from the last layer that ran forward."""
        if self._stop is None:
            raise ParameterError(f"{self.name}: backward called before forward")
        for layer in reversed(self.layers[:self._stop + 1]):
            grad = layer.backward(grad)
        return grad

    def backward_from(self, tap: str, grad: np.ndarray) -> np.ndarray:
        stop = self._layer_index[self.tap(tap).layer]
        if self._stop is None or self._stop < stop:
            raise ParameterError(f"{self.name}: forward did not reach tap '{tap}'")
        for layer in reversed(self.layers[:stop + 1]):
            grad = layer.backward(grad)
        return grad

    def embed(self, x: np.ndarray, tap: str) -> np.ndarray:
        return self.forward_to(x, tap, LayerMode.EVAL)

    def state_dict(self) -> Dict[str, np.ndarray]:
        tensors = OrderedDict((p.name, p.value) for p in self.parameters())
        tensors.update(self.buffers())
        return tensors

    def load_state_dict(self, tensors: Mapping[str, np.ndarray], strict: bool = True, source: str = "<state>") -> None:
        """
        Copy named tensors into parameters and buffers.

        With ``strict`` every name must match in both directions.
        """
        params = {p.name: p for p in self.parameters()}
        buffers = self.buffers()
        if strict:
            missing = [n for n in list(params) + list(buffers) if n not in tensors]
            unknown = [n for n in tensors if n not in params and n not in buffers]
            if missing or unknown:
                raise IngestionError(
                    f"{source}: weights do not match {self.name} "
                    f"(missing {missing[:3]}, unexpected {unknown[:3]})"
                )
        for name, value in tensors.items():
            if name in params:
                param = params[name]
                if tuple(value.shape) != tuple(param.shape):
                    raise IngestionError(
                        f"{source}: '{name}' has shape {tuple(value.shape)}, model expects {tuple(param.shape)}"
                    )
                param.value = np.array(value, dtype=self.dtype)
                param.grad = np.zeros_like(param.value)
            elif name in buffers:
                for layer in self.layers:
                    if name in layer.buffers():
                        layer.load_buffer(name, np.asarray(value))
                        break

    def save(self, path: str) -> None:
        save_archive(path, self.state_dict())
        logger.debug("saved %s weights to %s", self.name, path)

    def load(self, path: str, strict: bool = True) -> None:
        self.load_state_dict(load_archive(path), strict=strict, source=path)
        logger.info("loaded %s weights from %s", self.name, path)

    def __repr__(self) -> str:
        count = sum(p.value.size for p in self.parameters())
        return f"Network({self.name}, layers={len(self.layers)}, params={count}, taps={list(self.taps)})"


def forward(model, batch, mode: LayerMode = LayerMode.EVAL, rng: Optional[RngState] = None) -> np.ndarray:
    """B x 2 independent sigmoid probabilities."""
    return model.forward(batch, mode, rng)


def extract_embedding(model: Network, batch: np.ndarray, tap: str) -> np.ndarray:
    """Eval-mode activation at ``tap``, shape B x tap.dim."""
    return model.embed(batch, tap)


def predict_class(probs: np.ndarray) -> np.ndarray:
    """Argmax per row; ties go to class 0 (negative)."""
    probs = np.asarray(probs)
    if probs.ndim != 2 or probs.shape[1] != 2:
        raise DimensionError(f"class probabilities must be B x 2, got {tuple(probs.shape)}")
    return (probs[:, 1] > probs[:, 0]).astype(np.int64)


def late_fusion_predict(probs_a: np.ndarray, probs_b: np.ndarray) -> np.ndarray:
    """Class with the highest mean probability of two models."""
    probs_a = np.asarray(probs_a, dtype=np.float64)
    probs_b = np.asarray(probs_b, dtype=np.float64)
    if probs_a.shape != probs_b.shape:
        raise DimensionError(
            f"late fusion needs equal shapes, got {tuple(probs_a.shape)} and {tuple(probs_b.shape)}"
        )
    return predict_class((probs_a + probs_b) / 2)
