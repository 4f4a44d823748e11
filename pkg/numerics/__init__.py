"""
Numerics core: tensors, layers with analytic gradients, BCE loss and SGD.
"""

from .tensor import LayerMode, as_tensor, resolve_dtype
from .rng import RngState
from .functional import (
    dense_forward,
    relu,
    sigmoid,
    dropout_forward,
    batchnorm1d_forward,
    conv2d_forward,
    BatchNormState,
)
from .layers import (
    Parameter,
    Layer,
    Dense,
    ReLU,
    Sigmoid,
    Dropout,
    BatchNorm,
    Conv2d,
    GlobalAvgPool,
    Sequential,
    ResidualBlock,
    basic_block,
    bottleneck_block,
    residual_block_forward,
)
from .loss import bce_loss
from .optim import sgd_step
from .gradcheck import finite_diff_check, run_gradcheck_suite, GradCheckReport

__all__ = [
    'LayerMode',
    'as_tensor',
    'resolve_dtype',
    'RngState',
    'dense_forward',
    'relu',
    'sigmoid',
    'dropout_forward',
    'batchnorm1d_forward',
    'conv2d_forward',
    'BatchNormState',
    'Parameter',
    'Layer',
    'Dense',
    'ReLU',
    'Sigmoid',
    'Dropout',
    'BatchNorm',
    'Conv2d',
    'GlobalAvgPool',
    'Sequential',
    'ResidualBlock',
    'basic_block',
    'bottleneck_block',
    'residual_block_forward',
    'bce_loss',
    'sgd_step',
    'finite_diff_check',
    'run_gradcheck_suite',
    'GradCheckReport',
]
