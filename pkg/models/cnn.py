"""
Residual CNN for the image modalities.

Backbone: stem conv -> batch norm -> ReLU, then stages of residual blocks
(the first stage keeps resolution, later stages halve it). Head: global
average pool -> FC(512) -> ReLU -> dropout -> batch norm -> FC(2) -> sigmoid.
The post-ReLU 512-vector is the "embedding" tap.

Two depths are provided: a desk-scale basic-block variant and the 50-layer
bottleneck pattern.
"""

from dataclasses import dataclass, field
from typing import List

import numpy as np

from errors import ConfigError
from models.network import EmbeddingTap, Network
from numerics.layers import (
    BatchNorm,
    Conv2d,
    Dense,
    Dropout,
    GlobalAvgPool,
    ReLU,
    Sigmoid,
    basic_block,
    bottleneck_block,
)
from numerics.rng import RngState

BASIC = "basic"
BOTTLENECK = "bottleneck"
EXPANSION = 4


@dataclass
class BackboneConfig:
    stage_blocks: List[int] = field(default_factory=lambda: [2, 2, 2, 2])
    base_channels: int = 16
    block: str = BASIC
    stem_kernel: int = 3
    stem_stride: int = 2
    head_hidden: int = 512
    dropout_p: float = 0.5
    in_channels: int = 3

    @classmethod
    def desk(cls, in_channels: int = 3) -> "BackboneConfig":
        return cls(in_channels=in_channels)

    @classmethod
    def reference(cls, in_channels: int = 3) -> "BackboneConfig":
        return cls(stage_blocks=[3, 4, 6, 3], base_channels=64, block=BOTTLENECK,
                   stem_kernel=7, in_channels=in_channels)

    @property
    def reference_depth(self) -> bool:
        return self.block == BOTTLENECK and list(self.stage_blocks) == [3, 4, 6, 3]

    def validate(self) -> None:
        if not self.stage_blocks or any(int(n) < 1 for n in self.stage_blocks):
            raise ConfigError(f"stage block counts must be positive, got {self.stage_blocks}")
        if self.block not in (BASIC, BOTTLENECK):
            raise ConfigError(f"unknown residual block '{self.block}', expected '{BASIC}' or '{BOTTLENECK}'")
        if min(self.base_channels, self.stem_kernel, self.stem_stride, self.head_hidden, self.in_channels) < 1:
            raise ConfigError("backbone sizes must be positive")
        if not 0 <= self.dropout_p < 1:
            raise ConfigError(f"head dropout_p must lie in [0, 1), got {self.dropout_p}")


def build_cnn(cfg: BackboneConfig, rng: RngState, dtype=np.float32) -> Network:
    cfg.validate()
    base = cfg.base_channels
    layers = [
        Conv2d("stem.conv", cfg.in_channels, base, cfg.stem_kernel, rng, cfg.stem_stride, "same",
               bias=False, dtype=dtype),
        BatchNorm("stem.bn", base, dtype),
        ReLU("stem.relu"),
    ]
    channels = base
    for stage, count in enumerate(cfg.stage_blocks):
        width = base * 2 ** stage
        for i in range(count):
            stride = 2 if stage > 0 and i == 0 else 1
            name = f"stage{stage + 1}.block{i + 1}"
            if cfg.block == BASIC:
                layers.append(basic_block(name, channels, width, stride, rng, dtype))
                channels = width
            else:
                layers.append(bottleneck_block(name, channels, width, stride, rng, dtype, EXPANSION))
                channels = width * EXPANSION

    layers += [
        GlobalAvgPool("pool"),
        Dense("head.fc", channels, cfg.head_hidden, rng, dtype),
        ReLU("head.relu"),
        Dropout("head.dropout", cfg.dropout_p),
        BatchNorm("head.bn", cfg.head_hidden, dtype),
        Dense("head.out", cfg.head_hidden, 2, rng, dtype, init="xavier"),
        Sigmoid("head.sigmoid"),
    ]
    taps = [EmbeddingTap("embedding", "head.relu", cfg.head_hidden)]
    kind = "dual_cnn" if cfg.in_channels == 6 else "cnn"
    return Network(kind, layers, (cfg.in_channels, None, None), taps, dtype)


def build_dual_image_cnn(cfg: BackboneConfig, rng: RngState, dtype=np.float32) -> Network:
    """Single backbone over the 6-channel [RGB || BnW] stack."""
    if cfg.in_channels != 6:
        cfg = BackboneConfig(**{**cfg.__dict__, "in_channels": 6})
    return build_cnn(cfg, rng, dtype)
