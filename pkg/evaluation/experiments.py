"""
Experiments: one modality/model combination, trainable on any split.

Every experiment follows the same contract so the LOPO runner and the
train command can drive them uniformly:

    fit(arrays, labels, rows, seed)   -> Trained
    predict(trained, arrays, rows)    -> class indices

``arrays`` maps an input kind ("coords", "rgb", ...) to the stacked inputs
of every frame in the corpus; ``rows`` selects a split.
"""

import logging
from abc import ABC, abstractmethod
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import ConfigError, UsageError
from models.cnn import BackboneConfig, build_cnn, build_dual_image_cnn
from models.fnn import FnnConfig, build_fnn
from models.fusion import EarlyFusionConfig, EarlyFusionModel, build_early_fusion
from models.network import Network, late_fusion_predict, predict_class
from models.training import TrainingHyper, predict_proba, train_model
from numerics.rng import RngState
from numerics.tensor import resolve_dtype

logger = logging.getLogger(__name__)

INIT_STREAM = 2
MODEL_A_STREAM = 10
MODEL_B_STREAM = 11
HEAD_STREAM = 12

UNIMODAL = ("coords", "blendshapes", "rgb", "bnw", "bnw+rgb")
FUSION = ("early_fusion", "late_fusion")
MODALITIES = UNIMODAL + FUSION

MODALITY_LABELS = OrderedDict([
    ("coords", "Coordinates"),
    ("blendshapes", "Blendshapes"),
    ("rgb", "RGB"),
    ("bnw", "BnW"),
    ("bnw+rgb", "BnW+RGB"),
])
DEFAULT_TAPS = {
    "coords": "hidden3",
    "blendshapes": "hidden3",
    "rgb": "embedding",
    "bnw": "embedding",
    "bnw+rgb": "embedding",
}


@dataclass
class ExperimentSettings:
    """Everything an experiment needs besides data; built from the run config."""
    backbone: BackboneConfig = field(default_factory=BackboneConfig.desk)
    lr: Optional[float] = None
    epochs: Optional[int] = None
    batch_size: int = 32
    precision: str = "single"
    fnn_dropout: float = 0.5
    pretrained_weights: Optional[str] = None
    fusion_a: str = "bnw"
    fusion_b: str = "blendshapes"
    tap_a: Optional[str] = None
    tap_b: Optional[str] = None
    fusion_head: List[int] = field(default_factory=lambda: [256, 128, 64, 2])
    fusion_dropout: float = 0.5
    fine_tune: bool = False
    weights_a: Optional[str] = None
    weights_b: Optional[str] = None

    @property
    def dtype(self):
        return resolve_dtype(self.precision)


@dataclass
class Trained:
    """Fitted models of one experiment on one split."""
    models: Dict[str, object]
    histories: Dict[str, List[float]] = field(default_factory=dict)

    def state_dict(self) -> Dict[str, np.ndarray]:
        if len(self.models) == 1:
            return next(iter(self.models.values())).state_dict()
        tensors = OrderedDict()
        for prefix, model in self.models.items():
            tensors.update((f"{prefix}/{name}", value) for name, value in model.state_dict().items())
        return tensors


def preset_for(modality: str) -> str:
    if modality in ("coords", "blendshapes"):
        return "fnn"
    if modality == "bnw+rgb":
        return "dual_cnn"
    return "cnn"


def model_label(modality: str) -> str:
    return "FNN" if preset_for(modality) == "fnn" else "ResNet"


def fusion_modality_label(modality_a: str, modality_b: str) -> str:
    """Constituent labels joined in table order, independent of a/b order."""
    order = list(MODALITY_LABELS)
    pair = sorted((modality_a, modality_b), key=order.index)
    return "+".join(MODALITY_LABELS[m] for m in pair)


def check_modality(token: str) -> str:
    if token not in MODALITIES:
        raise UsageError(f"unknown modality '{token}'; valid: {', '.join(MODALITIES)}")
    return token


class BaseExperiment(ABC):
    """Base class for all experiments."""

    def __init__(self, settings: ExperimentSettings):
        self.settings = settings

    @property
    @abstractmethod
    def input_kinds(self) -> List[str]:
        pass

    @property
    @abstractmethod
    def label(self) -> Tuple[str, str]:
        """(data modality, model) row key of the report."""

    @abstractmethod
    def fit(self, arrays: Dict[str, np.ndarray], labels: np.ndarray, rows: Sequence[int], seed: int) -> Trained:
        pass

    @abstractmethod
    def predict(self, trained: Trained, arrays: Dict[str, np.ndarray], rows: Sequence[int]) -> np.ndarray:
        pass

    def hyper(self, preset: str, seed: int) -> TrainingHyper:
        s = self.settings
        return TrainingHyper.for_preset(preset, lr=s.lr, epochs=s.epochs, batch_size=s.batch_size, seed=seed)


class UnimodalExperiment(BaseExperiment):
    """One network on one input kind."""

    def __init__(self, modality: str, settings: ExperimentSettings, pretrained: Optional[str] = None):
        super().__init__(settings)
        if modality not in UNIMODAL:
            raise ConfigError(f"'{modality}' is not a single-model modality")
        self.modality = modality
        self.pretrained = pretrained

    @property
    def input_kinds(self) -> List[str]:
        return [self.modality]

    @property
    def label(self) -> Tuple[str, str]:
        return (MODALITY_LABELS[self.modality], model_label(self.modality))

    def build(self, rng: RngState) -> Network:
        s = self.settings
        if self.modality in ("coords", "blendshapes"):
            cfg = FnnConfig.preset(self.modality)
            cfg.dropout_p = s.fnn_dropout
            return build_fnn(cfg, rng, s.dtype)
        if self.modality == "bnw+rgb":
            return build_dual_image_cnn(s.backbone, rng, s.dtype)
        return build_cnn(BackboneConfig(**{**s.backbone.__dict__, "in_channels": 3}), rng, s.dtype)

    def fit(self, arrays, labels, rows, seed):
        rows = np.asarray(rows, dtype=np.int64)
        model = self.build(RngState(seed).child(INIT_STREAM))
        if self.pretrained:
            model.load(self.pretrained)
        result = train_model(model, arrays[self.modality][rows], labels[rows],
                             self.hyper(preset_for(self.modality), seed))
        return Trained({self.modality: model}, {self.modality: result.history})

    def probabilities(self, trained: Trained, arrays, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        return predict_proba(trained.models[self.modality], arrays[self.modality][rows])

    def predict(self, trained, arrays, rows):
        return predict_class(self.probabilities(trained, arrays, rows))


class _PairExperiment(BaseExperiment):
    """Shared plumbing of the two fusion strategies."""

    model_name = ""

    def __init__(self, settings: ExperimentSettings):
        super().__init__(settings)
        a, b = settings.fusion_a, settings.fusion_b
        for m in (a, b):
            if m not in UNIMODAL:
                raise ConfigError(f"fusion constituent '{m}' must be one of {', '.join(UNIMODAL)}")
        if a == b:
            raise ConfigError(f"fusion needs two different modalities, got '{a}' twice")
        self.part_a = UnimodalExperiment(a, settings, settings.weights_a)
        self.part_b = UnimodalExperiment(b, settings, settings.weights_b)

    @property
    def input_kinds(self) -> List[str]:
        return [self.part_a.modality, self.part_b.modality]

    @property
    def label(self) -> Tuple[str, str]:
        return (fusion_modality_label(self.part_a.modality, self.part_b.modality), self.model_name)

    def fit_parts(self, arrays, labels, rows, seed) -> Trained:
        root = RngState(seed)
        trained_a = self._fit_or_load(self.part_a, arrays, labels, rows, root.child(MODEL_A_STREAM).seed)
        trained_b = self._fit_or_load(self.part_b, arrays, labels, rows, root.child(MODEL_B_STREAM).seed)
        return Trained(
            OrderedDict([("a", trained_a.models[self.part_a.modality]), ("b", trained_b.models[self.part_b.modality])]),
            {"a": trained_a.histories.get(self.part_a.modality, []),
             "b": trained_b.histories.get(self.part_b.modality, [])},
        )

    @staticmethod
    def _fit_or_load(part: UnimodalExperiment, arrays, labels, rows, seed) -> Trained:
        # Pretrained constituents are used as-is, without further training.
        if part.pretrained:
            model = part.build(RngState(seed).child(INIT_STREAM))
            model.load(part.pretrained)
            return Trained({part.modality: model})
        return part.fit(arrays, labels, rows, seed)


class LateFusionExperiment(_PairExperiment):
    """Average the two models' probabilities; predict the higher mean class."""

    model_name = "LateFusion"

    def fit(self, arrays, labels, rows, seed):
        return self.fit_parts(arrays, labels, rows, seed)

    def predict(self, trained, arrays, rows):
        rows = np.asarray(rows, dtype=np.int64)
        probs_a = predict_proba(trained.models["a"], arrays[self.part_a.modality][rows])
        probs_b = predict_proba(trained.models["b"], arrays[self.part_b.modality][rows])
        return late_fusion_predict(probs_a, probs_b)


class EarlyFusionExperiment(_PairExperiment):
    """
    Train a head on concatenated tap embeddings [emb_a || emb_b].

    With frozen constituents the embeddings are computed once per split and
    the head trains on them directly.
    """

    model_name = "EarlyFusion"

    def config(self, model_a: Network, model_b: Network) -> EarlyFusionConfig:
        s = self.settings
        tap_a = model_a.tap(s.tap_a or DEFAULT_TAPS[self.part_a.modality])
        tap_b = model_b.tap(s.tap_b or DEFAULT_TAPS[self.part_b.modality])
        return EarlyFusionConfig(tap_a, tap_b, list(s.fusion_head), s.fusion_dropout, s.fine_tune)

    def _pair(self, arrays, rows):
        rows = np.asarray(rows, dtype=np.int64)
        return arrays[self.part_a.modality][rows], arrays[self.part_b.modality][rows]

    def embed(self, trained: Trained, cfg: EarlyFusionConfig, arrays, rows) -> np.ndarray:
        x_a, x_b = self._pair(arrays, rows)
        emb_a = embed_batches(trained.models["a"], x_a, cfg.tap_a.name)
        emb_b = embed_batches(trained.models["b"], x_b, cfg.tap_b.name)
        return np.concatenate([emb_a, emb_b], axis=1)

    def fit(self, arrays, labels, rows, seed):
        trained = self.fit_parts(arrays, labels, rows, seed)
        cfg = self.config(trained.models["a"], trained.models["b"])
        rows = np.asarray(rows, dtype=np.int64)
        head_rng = RngState(seed).child(HEAD_STREAM)
        head_seed = head_rng.child(0).seed
        if cfg.fine_tune:
            head = build_early_fusion(cfg, head_rng, self.settings.dtype)
            fused = EarlyFusionModel(trained.models["a"], trained.models["b"], head, cfg)
            result = train_model(fused, self._pair(arrays, rows), labels[rows], self.hyper("fusion", head_seed))
        else:
            features = self.embed(trained, cfg, arrays, rows)
            head = build_early_fusion(cfg, head_rng, self.settings.dtype, input_width=features.shape[1])
            result = train_model(head, features, labels[rows], self.hyper("fusion", head_seed))
        trained.models["head"] = head
        trained.histories["head"] = result.history
        return trained

    def predict(self, trained, arrays, rows):
        cfg = self.config(trained.models["a"], trained.models["b"])
        probs = predict_proba(trained.models["head"], self.embed(trained, cfg, arrays, rows))
        return predict_class(probs)


def embed_batches(model: Network, x: np.ndarray, tap: str, batch_size: int = 256) -> np.ndarray:
    if len(x) == 0:
        return np.empty((0, model.tap(tap).dim), dtype=model.dtype)
    return np.concatenate([model.embed(x[i:i + batch_size], tap) for i in range(0, len(x), batch_size)])


def make_experiment(modality: str, settings: ExperimentSettings) -> BaseExperiment:
    """Experiment for a modality token of the run config."""
    modality = check_modality(modality)
    if modality == "early_fusion":
        return EarlyFusionExperiment(settings)
    if modality == "late_fusion":
        return LateFusionExperiment(settings)
    return UnimodalExperiment(modality, settings, settings.pretrained_weights)
