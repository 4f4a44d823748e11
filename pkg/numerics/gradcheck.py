"""
Central finite-difference verification of analytic gradients.

Compares the gradient of a scalar loss w.r.t. every parameter element (and
optionally every input element) against (f(t + h) - f(t - h)) / 2h. Runs in
double precision; every loss evaluation replays the same RNG seed so dropout
masks stay fixed across perturbations.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Optional, Tuple

import numpy as np

from errors import NumericError, ParameterError
from numerics.layers import BatchNorm, Conv2d, Dense, Sequential, Sigmoid, basic_block
from numerics.loss import bce_loss
from numerics.optim import zero_grad
from numerics.rng import RngState
from numerics.tensor import LayerMode

LossFn = Callable[[np.ndarray], Tuple[float, np.ndarray]]

# Denominator floor so near-zero gradients are compared absolutely.
_REL_FLOOR = 1e-4


@dataclass
class GradCheckReport:
    """Max relative error per checked tensor."""
    errors: Dict[str, float] = field(default_factory=dict)
    tol: float = 1e-4

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_error < self.tol

    def worst(self) -> Optional[str]:
        if not self.errors:
            return None
        return max(self.errors, key=self.errors.get)


def bce_objective(targets: np.ndarray) -> LossFn:
    return lambda out: bce_loss(out, targets)


def projection_objective(shape, seed: int = 0) -> LossFn:
    """Loss = sum(out * w) for a fixed random w; works for any layer output."""
    w = RngState(seed).normal(0.0, 1.0, shape)
    return lambda out: (float(np.sum(out * w)), w.copy())


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    if analytic.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), _REL_FLOOR)
    return float(np.max(np.abs(analytic - numeric) / denom))


def finite_diff_check(
    model,
    inputs: np.ndarray,
    loss_fn: Optional[LossFn] = None,
    targets: Optional[np.ndarray] = None,
    h: float = 1e-5,
    tol: float = 1e-4,
    mode: LayerMode = LayerMode.TRAIN,
    seed: int = 0,
    check_inputs: bool = True,
) -> GradCheckReport:
    """
    Check analytic gradients of ``model`` against central differences.

    Args:
        model: Anything with forward(x, mode, rng), backward(grad), parameters()
        inputs: Double-precision input batch
        loss_fn: Maps model output to (loss, dloss/doutput); BCE on ``targets`` by default
        targets: Targets for the default BCE objective
        h: Finite-difference step
        tol: Relative tolerance for ``passed``
        mode: Layer mode used for every evaluation
        seed: RNG seed replayed for every evaluation
        check_inputs: Also check the gradient w.r.t. ``inputs``

    Returns:
        GradCheckReport keyed by parameter name (and "input")
    """
    if loss_fn is None:
        if targets is None:
            raise ParameterError("finite_diff_check needs a loss_fn or targets")
        loss_fn = bce_objective(targets)
    params = model.parameters()
    if inputs.dtype != np.float64 or any(p.value.dtype != np.float64 for p in params):
        raise ParameterError("gradient checks must run in double precision")

    x = inputs.copy()

    def evaluate() -> float:
        out = model.forward(x, mode, RngState(seed))
        loss, _ = loss_fn(out)
        if not np.isfinite(loss):
            raise NumericError(f"loss is not finite ({loss})")
        return loss

    zero_grad(params)
    out = model.forward(x, mode, RngState(seed))
    loss, grad_out = loss_fn(out)
    if not np.isfinite(loss):
        raise NumericError(f"loss is not finite ({loss})")
    analytic_input = model.backward(grad_out)
    analytic = {p.name: p.grad.copy() for p in params}
    zero_grad(params)

    report = GradCheckReport(tol=tol)
    for param in params:
        numeric = _numeric_gradient(param.value, evaluate, h)
        report.errors[param.name] = relative_error(analytic[param.name], numeric)
    if check_inputs:
        numeric = _numeric_gradient(x, evaluate, h)
        report.errors["input"] = relative_error(analytic_input, numeric)
    return report


def _numeric_gradient(array: np.ndarray, evaluate: Callable[[], float], h: float) -> np.ndarray:
    grad = np.zeros_like(array)
    for idx in np.ndindex(array.shape):
        original = array[idx]
        array[idx] = original + h
        plus = evaluate()
        array[idx] = original - h
        minus = evaluate()
        array[idx] = original
        grad[idx] = (plus - minus) / (2 * h)
    return grad


def _dense_case(rng: RngState):
    return Dense("dense", 4, 3, rng, dtype=np.float64), rng.normal(0.0, 1.0, (5, 4)), None


def _conv_case(rng: RngState):
    layer = Conv2d("conv", 2, 3, 3, rng, stride=1, padding="same", dtype=np.float64)
    return layer, rng.normal(0.0, 1.0, (2, 2, 5, 5)), None


def _batchnorm_case(rng: RngState):
    return BatchNorm("bn", 4, dtype=np.float64), rng.normal(0.0, 1.0, (6, 4)), None


def _residual_case(rng: RngState):
    block = basic_block("block", 2, 3, 2, rng, dtype=np.float64)
    return block, rng.normal(0.0, 1.0, (3, 2, 6, 6)), None


def _sigmoid_bce_case(rng: RngState):
    model = Sequential("head", [Dense("fc", 4, 2, rng, dtype=np.float64), Sigmoid("sigmoid")])
    labels = rng.integers(0, 2, 6)
    targets = np.eye(2)[labels]
    return model, rng.normal(0.0, 1.0, (6, 4)), bce_objective(targets)


GRADCHECK_CASES: Dict[str, Callable] = {
    "dense": _dense_case,
    "conv": _conv_case,
    "batchnorm": _batchnorm_case,
    "residual": _residual_case,
    "sigmoid+bce": _sigmoid_bce_case,
}


def run_gradcheck_suite(seeds: int = 20, h: float = 1e-5, tol: float = 1e-4,
                        cases: Optional[Iterable[str]] = None) -> Dict[str, GradCheckReport]:
    """
    Check every layer type over ``seeds`` random initialisations.

    Returns one report per case; error keys read "<tensor>@<seed>".
    """
    if seeds < 1:
        raise ParameterError(f"seed count must be >= 1, got {seeds}")
    names = list(cases) if cases is not None else list(GRADCHECK_CASES)
    unknown = [name for name in names if name not in GRADCHECK_CASES]
    if unknown:
        raise ParameterError(f"unknown gradcheck case(s) {unknown}; valid: {', '.join(GRADCHECK_CASES)}")

    reports: Dict[str, GradCheckReport] = {}
    for name in names:
        report = GradCheckReport(tol=tol)
        for seed in range(seeds):
            model, x, loss_fn = GRADCHECK_CASES[name](RngState(seed))
            if loss_fn is None:
                out = model.forward(x, LayerMode.TRAIN, RngState(seed))
                loss_fn = projection_objective(out.shape, seed)
            single = finite_diff_check(model, x, loss_fn, h=h, tol=tol, seed=seed)
            report.errors.update((f"{tensor}@{seed}", err) for tensor, err in single.errors.items())
        reports[name] = report
    return reports
