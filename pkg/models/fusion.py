"""
Early fusion of two unimodal models.

Embeddings from a tap on each model are concatenated [emb_a || emb_b] and
classified by a four-layer head:

    FC1 -> ReLU -> dropout -> FC2 -> ReLU -> dropout -> FC3 -> ReLU -> batch norm -> FC4 -> sigmoid

By default the unimodal models are frozen; with ``fine_tune`` gradients flow
from the head back into both models up to their taps.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from errors import ConfigError, DimensionError
from models.network import EmbeddingTap, Network
from numerics.layers import BatchNorm, Dense, Dropout, Parameter, ReLU, Sigmoid
from numerics.rng import RngState
from numerics.tensor import LayerMode


@dataclass
class EarlyFusionConfig:
    tap_a: EmbeddingTap
    tap_b: EmbeddingTap
    head_sizes: List[int] = field(default_factory=lambda: [256, 128, 64, 2])
    dropout_p: float = 0.5
    fine_tune: bool = False

    @property
    def input_width(self) -> int:
        return self.tap_a.dim + self.tap_b.dim

    def validate(self) -> None:
        if len(self.head_sizes) != 4 or any(int(s) < 1 for s in self.head_sizes) or self.head_sizes[-1] != 2:
            raise ConfigError(f"fusion head needs four positive widths ending in 2, got {self.head_sizes}")
        if not 0 <= self.dropout_p < 1:
            raise ConfigError(f"fusion dropout_p must lie in [0, 1), got {self.dropout_p}")


def build_early_fusion(cfg: EarlyFusionConfig, rng: RngState, dtype=np.float32,
                       input_width: Optional[int] = None) -> Network:
    """
    Build the fusion head.

    ``input_width``, when given, must equal tap_a.dim + tap_b.dim.
    """
    cfg.validate()
    width = cfg.input_width
    if input_width is not None and input_width != width:
        raise ConfigError(
            f"fusion head input width {input_width} != tap dims {cfg.tap_a.dim} + {cfg.tap_b.dim} = {width}"
        )
    s1, s2, s3, s4 = cfg.head_sizes
    layers = [
        Dense("fusion.fc1", width, s1, rng, dtype),
        ReLU("fusion.relu1"),
        Dropout("fusion.drop1", cfg.dropout_p),
        Dense("fusion.fc2", s1, s2, rng, dtype),
        ReLU("fusion.relu2"),
        Dropout("fusion.drop2", cfg.dropout_p),
        Dense("fusion.fc3", s2, s3, rng, dtype),
        ReLU("fusion.relu3"),
        BatchNorm("fusion.bn3", s3, dtype),
        Dense("fusion.fc4", s3, s4, rng, dtype, init="xavier"),
        Sigmoid("fusion.out"),
    ]
    return Network("early_fusion_head", layers, (width,), dtype=dtype)


class EarlyFusionModel:
    """
    Two unimodal networks plus a fusion head, driven as one model.

    Inputs are pairs (x_a, x_b) of equally sized batches.
    """

    def __init__(self, model_a: Network, model_b: Network, head: Network, cfg: EarlyFusionConfig):
        for model, tap in ((model_a, cfg.tap_a), (model_b, cfg.tap_b)):
            registered = model.tap(tap.name)
            if registered.dim != tap.dim:
                raise ConfigError(f"tap '{tap.name}' on {model.name} emits {registered.dim}, config says {tap.dim}")
        if head.input_shape != (cfg.input_width,):
            raise ConfigError(f"fusion head takes {head.input_shape}, taps give {cfg.input_width}")
        self.model_a = model_a
        self.model_b = model_b
        self.head = head
        self.cfg = cfg
        self.name = "early_fusion"
        self.dtype = head.dtype

    @property
    def consumes_rng(self) -> bool:
        return self.head.consumes_rng or (self.cfg.fine_tune and (self.model_a.consumes_rng or self.model_b.consumes_rng))

    @property
    def has_batchnorm(self) -> bool:
        return self.head.has_batchnorm or (self.cfg.fine_tune and (self.model_a.has_batchnorm or self.model_b.has_batchnorm))

    def parameters(self) -> List[Parameter]:
        params = self.head.parameters()
        if self.cfg.fine_tune:
            params = self.model_a.parameters() + self.model_b.parameters() + params
        return params

    def embeddings(self, inputs: Tuple[np.ndarray, np.ndarray], mode: LayerMode = LayerMode.EVAL,
                   rng: Optional[RngState] = None) -> np.ndarray:
        x_a, x_b = inputs
        if len(x_a) != len(x_b):
            raise DimensionError(f"fusion inputs differ in batch size: {len(x_a)} vs {len(x_b)}")
        if not self.cfg.fine_tune:
            mode, rng = LayerMode.EVAL, None
        emb_a = self.model_a.forward_to(x_a, self.cfg.tap_a.name, mode, rng)
        emb_b = self.model_b.forward_to(x_b, self.cfg.tap_b.name, mode, rng)
        return np.concatenate([emb_a, emb_b], axis=1).astype(self.dtype, copy=False)

    def forward(self, inputs: Tuple[np.ndarray, np.ndarray], mode: LayerMode = LayerMode.EVAL,
                rng: Optional[RngState] = None) -> np.ndarray:
        return self.head.forward(self.embeddings(inputs, mode, rng), mode, rng)

    def backward(self, grad: np.ndarray) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        d_concat = self.head.backward(grad)
        if not self.cfg.fine_tune:
            return None
        split = self.cfg.tap_a.dim
        return (
            self.model_a.backward_from(self.cfg.tap_a.name, d_concat[:, :split]),
            self.model_b.backward_from(self.cfg.tap_b.name, d_concat[:, split:]),
        )
