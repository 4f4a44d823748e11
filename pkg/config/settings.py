"""
Run configuration.

A run is described by a YAML file validated with pydantic. Relative paths
resolve against the file's directory; CLI flags override individual fields.
"""

import logging
import os
from typing import Any, Dict, List, Literal, Optional

import yaml
from pydantic import BaseModel, Field, ValidationError

from errors import ConfigError
from evaluation.experiments import UNIMODAL, ExperimentSettings, check_modality
from models.cnn import BackboneConfig

logger = logging.getLogger(__name__)

CONFIG_DIR = os.path.dirname(os.path.abspath(__file__))
DEFAULT_SUBSET = os.path.join(CONFIG_DIR, "landmark_subset.txt")
DEFAULT_CONTOURS = os.path.join(CONFIG_DIR, "contours.yaml")


class ImageSettings(BaseModel):
    size: int = Field(224, ge=8, description="CNN input side length S")
    raster_size: Optional[int] = Field(None, ge=8, description="BnW canvas side; defaults to size")
    rgb_mean: Optional[List[float]] = Field(None, min_length=3, max_length=3)
    rgb_std: Optional[List[float]] = Field(None, min_length=3, max_length=3)

    @property
    def canvas(self) -> int:
        return self.raster_size or self.size


class BackboneSettings(BaseModel):
    depth: Literal["desk", "reference"] = "desk"
    stage_blocks: Optional[List[int]] = None
    base_channels: Optional[int] = Field(None, ge=1)
    head_hidden: int = Field(512, ge=1)
    dropout_p: float = Field(0.5, ge=0, lt=1)

    def to_config(self) -> BackboneConfig:
        cfg = BackboneConfig.reference() if self.depth == "reference" else BackboneConfig.desk()
        if self.stage_blocks is not None:
            cfg.stage_blocks = list(self.stage_blocks)
        if self.base_channels is not None:
            cfg.base_channels = self.base_channels
        cfg.head_hidden = self.head_hidden
        cfg.dropout_p = self.dropout_p
        return cfg


class HyperParams(BaseModel):
    lr: Optional[float] = Field(None, gt=0, description="Defaults to the model preset")
    epochs: Optional[int] = Field(None, ge=1, description="Defaults to the model preset")
    batch_size: int = Field(32, ge=1)
    seed_base: int = Field(0, ge=0, lt=2 ** 64)
    precision: Literal["single", "double"] = "single"


class FusionSettings(BaseModel):
    modality_a: str = "bnw"
    modality_b: str = "blendshapes"
    tap_a: Optional[str] = None
    tap_b: Optional[str] = None
    head_sizes: List[int] = Field(default_factory=lambda: [256, 128, 64, 2])
    dropout_p: float = Field(0.5, ge=0, lt=1)
    fine_tune: bool = False
    weights_a: Optional[str] = None
    weights_b: Optional[str] = None


class RunConfig(BaseModel):
    manifest: str
    modality: str = "blendshapes"
    subset_indices: str = DEFAULT_SUBSET
    contours: str = DEFAULT_CONTOURS
    cache_dir: Optional[str] = Field(None, description="Defaults to <out_dir>/cache")
    out_dir: str = "runs"
    workers: int = Field(1, ge=1)
    holdout_patient: Optional[str] = Field(None, description="Patient excluded by the train command")
    pretrained_weights: Optional[str] = None
    image: ImageSettings = Field(default_factory=ImageSettings)
    backbone: BackboneSettings = Field(default_factory=BackboneSettings)
    hyper: HyperParams = Field(default_factory=HyperParams)
    fusion: FusionSettings = Field(default_factory=FusionSettings)

    @property
    def cache_root(self) -> str:
        return self.cache_dir or os.path.join(self.out_dir, "cache")

    def experiment_settings(self) -> ExperimentSettings:
        return ExperimentSettings(
            backbone=self.backbone.to_config(),
            lr=self.hyper.lr,
            epochs=self.hyper.epochs,
            batch_size=self.hyper.batch_size,
            precision=self.hyper.precision,
            pretrained_weights=self.pretrained_weights,
            fusion_a=self.fusion.modality_a,
            fusion_b=self.fusion.modality_b,
            tap_a=self.fusion.tap_a,
            tap_b=self.fusion.tap_b,
            fusion_head=list(self.fusion.head_sizes),
            fusion_dropout=self.fusion.dropout_p,
            fine_tune=self.fusion.fine_tune,
            weights_a=self.fusion.weights_a,
            weights_b=self.fusion.weights_b,
        )


_PATH_FIELDS = ("manifest", "subset_indices", "contours", "cache_dir", "out_dir", "pretrained_weights")
_FUSION_PATH_FIELDS = ("weights_a", "weights_b")


def _resolve(base: str, value: Optional[str]) -> Optional[str]:
    if value is None or os.path.isabs(value):
        return value
    return os.path.normpath(os.path.join(base, value))


def load_run_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Load a run config file and apply CLI overrides.

    Args:
        path: YAML file; relative paths inside resolve against its directory
        overrides: Top-level field -> value (None values are ignored); the
            key "seed_base" targets hyper.seed_base

    Raises:
        ConfigError for unreadable or invalid files, UsageError for an
        unknown modality token
    """
    raw: Dict[str, Any] = {}
    base = os.getcwd()
    if path is not None:
        try:
            with open(path, 'r') as f:
                raw = yaml.safe_load(f) or {}
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}")
        except yaml.YAMLError as e:
            raise ConfigError(f"config {path} is not valid YAML: {e}")
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must be a mapping")
        base = os.path.dirname(os.path.abspath(path))
        for key in _PATH_FIELDS:
            if key in raw:
                raw[key] = _resolve(base, raw[key])
        fusion = raw.get("fusion") or {}
        for key in _FUSION_PATH_FIELDS:
            if key in fusion:
                fusion[key] = _resolve(base, fusion[key])

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "seed_base":
            raw.setdefault("hyper", {})["seed_base"] = value
        else:
            raw[key] = value

    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise ConfigError(f"config {path or '<flags>'}: {location}: {first['msg']}")

    check_modality(cfg.modality)
    for token in (cfg.fusion.modality_a, cfg.fusion.modality_b):
        if token not in UNIMODAL:
            raise ConfigError(f"fusion constituent '{token}' must be one of {', '.join(UNIMODAL)}")
    if cfg.fusion.modality_a == cfg.fusion.modality_b:
        raise ConfigError("fusion.modality_a and fusion.modality_b must differ")
    logger.debug("run config: %s", cfg.model_dump())
    return cfg
