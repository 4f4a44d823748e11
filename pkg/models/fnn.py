"""
Feed-forward networks for the structured modalities.

    FC1 -> dropout -> ReLU -> FC2 -> batch norm -> ReLU -> FC3 -> ReLU -> FC4 -> sigmoid

Hidden activations are exposed as taps hidden1..hidden3.
"""

from dataclasses import dataclass, field
from typing import List

import numpy as np

from errors import ConfigError
from models.network import EmbeddingTap, Network
from numerics.layers import BatchNorm, Dense, Dropout, ReLU, Sigmoid
from numerics.rng import RngState

COORDS = "coords"
BLENDSHAPES = "blendshapes"


@dataclass
class FnnConfig:
    input_dim: int
    layer_sizes: List[int] = field(default_factory=list)
    dropout_p: float = 0.5
    variant: str = COORDS

    @classmethod
    def coords(cls) -> "FnnConfig":
        return cls(input_dim=250, layer_sizes=[128, 64, 32, 2], variant=COORDS)

    @classmethod
    def blendshapes(cls) -> "FnnConfig":
        return cls(input_dim=52, layer_sizes=[64, 32, 10, 2], variant=BLENDSHAPES)

    @classmethod
    def preset(cls, variant: str) -> "FnnConfig":
        if variant == COORDS:
            return cls.coords()
        if variant == BLENDSHAPES:
            return cls.blendshapes()
        raise ConfigError(f"unknown FNN variant '{variant}', expected '{COORDS}' or '{BLENDSHAPES}'")

    def validate(self) -> None:
        if self.input_dim < 1:
            raise ConfigError(f"FNN input_dim must be positive, got {self.input_dim}")
        if len(self.layer_sizes) != 4 or any(int(s) < 1 for s in self.layer_sizes):
            raise ConfigError(f"FNN needs four positive layer sizes, got {self.layer_sizes}")
        if self.layer_sizes[-1] != 2:
            raise ConfigError(f"FNN output layer must have 2 units, got {self.layer_sizes[-1]}")
        if not 0 <= self.dropout_p < 1:
            raise ConfigError(f"FNN dropout_p must lie in [0, 1), got {self.dropout_p}")


def build_fnn(cfg: FnnConfig, rng: RngState, dtype=np.float32) -> Network:
    cfg.validate()
    s1, s2, s3, s4 = cfg.layer_sizes
    layers = [
        Dense("fc1", cfg.input_dim, s1, rng, dtype),
        Dropout("drop1", cfg.dropout_p),
        ReLU("relu1"),
        Dense("fc2", s1, s2, rng, dtype),
        BatchNorm("bn2", s2, dtype),
        ReLU("relu2"),
        Dense("fc3", s2, s3, rng, dtype),
        ReLU("relu3"),
        Dense("fc4", s3, s4, rng, dtype, init="xavier"),
        Sigmoid("out"),
    ]
    taps = [
        EmbeddingTap("hidden1", "relu1", s1),
        EmbeddingTap("hidden2", "relu2", s2),
        EmbeddingTap("hidden3", "relu3", s3),
    ]
    return Network(f"fnn_{cfg.variant}", layers, (cfg.input_dim,), taps, dtype)
