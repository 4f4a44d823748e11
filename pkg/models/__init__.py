"""
Models: feed-forward and residual networks, early/late fusion and training.
"""

from .network import EmbeddingTap, Network, extract_embedding, forward, late_fusion_predict, predict_class
from .fnn import FnnConfig, build_fnn
from .cnn import BackboneConfig, build_cnn, build_dual_image_cnn
from .fusion import EarlyFusionConfig, EarlyFusionModel, build_early_fusion
from .training import TrainingHyper, TrainingResult, predict_proba, train_model, write_history

__all__ = [
    'EmbeddingTap',
    'Network',
    'forward',
    'extract_embedding',
    'predict_class',
    'late_fusion_predict',
    'FnnConfig',
    'build_fnn',
    'BackboneConfig',
    'build_cnn',
    'build_dual_image_cnn',
    'EarlyFusionConfig',
    'EarlyFusionModel',
    'build_early_fusion',
    'TrainingHyper',
    'TrainingResult',
    'train_model',
    'predict_proba',
    'write_history',
]
