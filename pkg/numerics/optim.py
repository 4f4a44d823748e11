"""
Plain stochastic gradient descent.
"""

from typing import Iterable

from errors import ParameterError
from numerics.layers import Parameter


def sgd_step(params: Iterable[Parameter], lr: float) -> None:
    """value <- value - lr * grad for every parameter, then zero the gradients."""
    if not lr > 0:
        raise ParameterError(f"learning rate must be positive, got {lr}")
    for param in params:
        param.value -= param.value.dtype.type(lr) * param.grad
        param.zero_grad()


def zero_grad(params: Iterable[Parameter]) -> None:
    for param in params:
        param.zero_grad()
