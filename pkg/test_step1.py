#!/usr/bin/env python3
"""
STEP 1 VALIDATION: Numerics Core

Tests:
1. Dense, activation, dropout, batch-norm and convolution kernels
2. BCE point values and SGD arithmetic
3. Residual identity
4. Finite-difference gradient verification (every layer type, 20 seeds)
5. Weights archive layout and determinism
"""

import math
import os
import tempfile

import numpy as np
import pytest

from errors import BatchSizeError, DimensionError, IngestionError, LabelError, ParameterError, ShapeError
from numerics import functional as F
from numerics.gradcheck import finite_diff_check, projection_objective, run_gradcheck_suite
from numerics.layers import (
    BatchNorm, Conv2d, Dense, Parameter, ReLU, Sequential, Sigmoid, basic_block, residual_block_forward,
)
from numerics.loss import EPSILON, bce_loss
from numerics.optim import sgd_step
from numerics.rng import RngState
from numerics.tensor import LayerMode, as_tensor, resolve_dtype
from storage.archive import decode_archive, encode_archive, load_archive, save_archive


def test_dense_and_activations():
    """Dense products, ReLU and sigmoid values."""
    print("\n" + "="*70)
    print("TESTING DENSE / ACTIVATIONS")
    print("="*70 + "\n")

    out = F.dense_forward(np.array([[1.0, 0.0], [0.0, 1.0]]), np.eye(2), np.zeros(2))
    assert np.array_equal(out, [[1, 0], [0, 1]])
    out = F.dense_forward(np.array([[1.0, 1.0]]), np.array([[1.0, 2.0], [3.0, 4.0]]), np.zeros(2))
    assert np.array_equal(out, [[3, 7]])
    out = F.dense_forward(np.array([[2.0]]), np.array([[0.0]]), np.array([5.0]))
    assert np.array_equal(out, [[5]])
    print("✅ Dense forward matches hand products")

    with pytest.raises(DimensionError):
        F.dense_forward(np.ones((2, 3)), np.ones((4, 2)), np.zeros(4))
    print("✅ Non-conforming dense shapes rejected")

    assert np.array_equal(F.relu(np.array([-1.0, 0.0, 2.0])), [0, 0, 2])
    assert not F.relu(-np.ones(5)).any()
    assert F.relu(np.array([3.5]))[0] == 3.5
    print("✅ ReLU")

    assert F.sigmoid(np.array([0.0]))[0] == 0.5
    with np.errstate(over='raise'):
        high = F.sigmoid(np.array([40.0]))[0]
        low = F.sigmoid(np.array([-1000.0]))[0]
    assert abs(high - 1.0) < 1e-6
    assert 0.0 <= low < 1e-6
    print("✅ Sigmoid symmetric and overflow-free")


def test_dropout():
    """Eval identity, p=0 identity, inverted scaling keeps the mean."""
    print("\n" + "="*70)
    print("TESTING DROPOUT")
    print("="*70 + "\n")

    x = np.arange(12, dtype=np.float32).reshape(3, 4)
    out, mask = F.dropout_forward(x, 0.5, LayerMode.EVAL, None)
    assert mask is None and np.array_equal(out, x)
    out, _ = F.dropout_forward(x, 0.0, LayerMode.TRAIN, RngState(1))
    assert np.array_equal(out, x)
    print("✅ Eval mode and p=0 are identities")

    ones = np.ones(100_000)
    out, _ = F.dropout_forward(ones, 0.5, LayerMode.TRAIN, RngState(7))
    assert 0.98 <= out.mean() <= 1.02
    print(f"✅ p=0.5 sample mean {out.mean():.4f}")

    with pytest.raises(ParameterError):
        F.dropout_forward(x, 1.0, LayerMode.TRAIN, RngState(0))
    with pytest.raises(ParameterError):
        F.dropout_forward(x, 0.5, LayerMode.TRAIN, None)

    a, _ = F.dropout_forward(ones[:64], 0.3, LayerMode.TRAIN, RngState(3))
    b, _ = F.dropout_forward(ones[:64], 0.3, LayerMode.TRAIN, RngState(3))
    assert np.array_equal(a, b)
    print("✅ Same seed gives the same mask")


def test_batchnorm():
    """Zero-variance columns, gamma=0 and the singleton-batch guard."""
    print("\n" + "="*70)
    print("TESTING BATCH NORM")
    print("="*70 + "\n")

    x = np.array([[2.0, 1.0], [2.0, 3.0], [2.0, 5.0]])
    beta = np.array([0.25, -1.0])
    state = F.BatchNormState.fresh(2, np.float64)
    out = F.batchnorm1d_forward(x, np.ones(2), beta, state, LayerMode.TRAIN)
    assert np.allclose(out[:, 0], 0.25)
    assert abs(out[:, 1].mean() + 1.0) < 1e-12
    print("✅ Constant column maps to beta")

    out = F.batchnorm1d_forward(x, np.zeros(2), beta, F.BatchNormState.fresh(2, np.float64), LayerMode.TRAIN)
    assert np.allclose(out, np.broadcast_to(beta, out.shape))
    print("✅ gamma=0 gives beta everywhere")

    # running mean after one step: 0.9 * 0 + 0.1 * batch mean
    assert np.allclose(state.running_mean, [0.2, 0.3])
    assert np.allclose(state.running_var, [0.9, 0.9 + 0.1 * 4.0])
    print("✅ Running statistics use momentum 0.1 and unbiased variance")

    with pytest.raises(BatchSizeError):
        F.batchnorm1d_forward(np.ones((1, 2)), np.ones(2), np.zeros(2),
                              F.BatchNormState.fresh(2, np.float64), LayerMode.TRAIN)
    out = F.batchnorm1d_forward(np.ones((1, 2)), np.ones(2), np.zeros(2),
                                F.BatchNormState.fresh(2, np.float64), LayerMode.EVAL)
    assert out.shape == (1, 2)
    print("✅ Single-row batch rejected in Train mode only")


def test_conv2d():
    """Identity, all-ones and zero kernels; geometry errors."""
    print("\n" + "="*70)
    print("TESTING CONVOLUTION")
    print("="*70 + "\n")

    x = RngState(0).normal(0.0, 1.0, (2, 1, 5, 5))
    out = F.conv2d_forward(x, np.ones((1, 1, 1, 1)), None)
    assert np.allclose(out, x)
    print("✅ 1x1 unit kernel is the identity")

    c = 1.5
    out = F.conv2d_forward(np.full((1, 1, 6, 6), c), np.ones((1, 1, 3, 3)), np.zeros(1))
    assert out.shape == (1, 1, 4, 4)
    assert np.allclose(out, 9 * c)
    print("✅ All-ones 3x3 kernel sums nine pixels")

    out = F.conv2d_forward(x, np.zeros((3, 1, 3, 3)), np.array([1.0, -2.0, 0.5]), padding=1)
    assert out.shape == (2, 3, 5, 5)
    assert np.allclose(out[:, 1], -2.0)
    print("✅ Zero kernel outputs the bias")

    out = F.conv2d_forward(np.ones((1, 2, 7, 7)), np.ones((4, 2, 3, 3)), None, stride=2, padding="same")
    assert out.shape == (1, 4, 4, 4)
    print("✅ 'same' padding gives ceil(H / stride)")

    with pytest.raises(ShapeError):
        F.conv2d_forward(np.ones((1, 1, 6, 6)), np.ones((1, 1, 3, 3)), None, stride=2)
    with pytest.raises(DimensionError):
        F.conv2d_forward(np.ones((1, 2, 6, 6)), np.ones((1, 3, 3, 3)), None)
    print("✅ Non-integral output and channel mismatch rejected")


def test_bce_and_sgd():
    """BCE point values and SGD arithmetic."""
    print("\n" + "="*70)
    print("TESTING BCE LOSS / SGD")
    print("="*70 + "\n")

    loss, _ = bce_loss(np.array([[1.0]]), np.array([[1.0]]))
    assert loss == 0.0
    loss, _ = bce_loss(np.array([[0.5]]), np.array([[1.0]]))
    assert abs(loss - 0.693147) < 1e-6
    loss, grad = bce_loss(np.array([[1.0]]), np.array([[0.0]]))
    assert math.isfinite(loss) and abs(loss + math.log(EPSILON)) < 1e-9
    assert np.all(np.isfinite(grad))
    print(f"✅ BCE: perfect=0, p=0.5 -> {math.log(2):.6f}, worst={loss:.3f}")

    with pytest.raises(LabelError):
        bce_loss(np.array([[0.3]]), np.array([[0.5]]))
    with pytest.raises(DimensionError):
        bce_loss(np.ones((2, 2)) * 0.5, np.ones((2, 1)))
    print("✅ Invalid targets and shapes rejected")

    param = Parameter("w", np.array([1.0]))
    param.grad[...] = 0.5
    sgd_step([param], 0.1)
    assert abs(param.value[0] - 0.95) < 1e-12
    assert param.grad[0] == 0
    print("✅ SGD: 1.0 - 0.1 * 0.5 = 0.95, gradient zeroed")

    param = Parameter("w", np.array([2.0]))
    sgd_step([param], 0.1)
    assert param.value[0] == 2.0
    for _ in range(2):
        param.grad[...] = 0.25
        sgd_step([param], 0.1)
    assert abs(param.value[0] - (2.0 - 2 * 0.1 * 0.25)) < 1e-12
    print("✅ Zero gradient keeps the value; two steps move by 2*lr*g")

    with pytest.raises(ParameterError):
        sgd_step([param], 0.0)


def test_residual_identity():
    """Zero-kernel branch with identity shortcut gives relu(x)."""
    print("\n" + "="*70)
    print("TESTING RESIDUAL BLOCK")
    print("="*70 + "\n")

    block = basic_block("block", 3, 3, 1, RngState(0), dtype=np.float64)
    assert block.shortcut is None
    for param in block.parameters():
        if param.name.endswith("kernel"):
            param.value[...] = 0
    x = RngState(1).normal(0.0, 1.0, (2, 3, 5, 5))
    out = residual_block_forward(x, block, LayerMode.TRAIN)
    assert np.allclose(out, np.maximum(x, 0))
    print("✅ F = 0 gives relu(x)")

    projected = basic_block("down", 3, 6, 2, RngState(0), dtype=np.float64)
    assert projected.forward(x, LayerMode.TRAIN).shape == (2, 6, 3, 3)
    print("✅ Projection shortcut on stride/channel change")


def test_gradient_checks():
    """Analytic gradients against central differences."""
    print("\n" + "="*70)
    print("TESTING GRADIENTS (finite differences)")
    print("="*70 + "\n")

    rng = RngState(5)
    model = Sequential("head", [Dense("fc", 3, 2, rng, dtype=np.float64), Sigmoid("sigmoid")])
    x = rng.normal(0.0, 1.0, (4, 3))
    targets = np.eye(2)[[0, 1, 1, 0]]
    report = finite_diff_check(model, x, targets=targets)
    assert report.passed, report.errors
    print(f"✅ dense+sigmoid+BCE max rel. error {report.max_error:.2e}")

    report = finite_diff_check(ReLU("relu"), x, projection_objective((4, 3)), check_inputs=False)
    assert report.errors == {} and report.passed
    print("✅ Parameter-free layer gives an empty, passing report")

    class Corrupted(Dense):
        def backward(self, grad):
            dx = super().backward(grad)
            self.weight.grad *= 1.1
            return dx

    corrupted = Corrupted("bad", 3, 2, RngState(2), dtype=np.float64)
    report = finite_diff_check(corrupted, x, projection_objective((4, 2)), check_inputs=False)
    assert not report.passed
    print(f"✅ +10% corrupted gradient detected (error {report.max_error:.2e})")

    with pytest.raises(ParameterError):
        finite_diff_check(Dense("f32", 3, 2, RngState(0)), x.astype(np.float32), targets=targets[:, :2])

    reports = run_gradcheck_suite(seeds=20)
    for name, layer_report in reports.items():
        print(f"   {name:14} {layer_report.max_error:.2e}")
        assert layer_report.passed, (name, layer_report.worst(), layer_report.max_error)
    assert set(reports) == {"dense", "conv", "batchnorm", "residual", "sigmoid+bce"}
    print("✅ Every layer type within 1e-4 over 20 seeds")


def test_archive():
    """Entry layout, bit-exact float32 round trip and error reporting."""
    print("\n" + "="*70)
    print("TESTING WEIGHTS ARCHIVE")
    print("="*70 + "\n")

    tensors = {"fc1.weight": np.arange(6, dtype=np.float32).reshape(2, 3), "scale": np.array(2.5, dtype=np.float32)}
    blob = encode_archive(tensors)
    name = b"fc1.weight"
    expected = 4 + len(name) + 4 + 2 * 8 + 6 * 4 + 4 + len(b"scale") + 4 + 4
    assert len(blob) == expected
    assert blob[:4] == len(name).to_bytes(4, "little")
    assert blob[4:4 + len(name)] == name
    print(f"✅ Layout: {len(blob)} bytes, no header")

    decoded = decode_archive(blob)
    assert list(decoded) == list(tensors)
    assert decoded["fc1.weight"].tobytes() == tensors["fc1.weight"].tobytes()
    assert decoded["scale"].shape == ()
    print("✅ Names, order and float32 payload preserved")

    with pytest.raises(IngestionError):
        decode_archive(blob[:-3])
    print("✅ Truncated archive rejected")

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "nested", "w.tensor")
        save_archive(path, tensors)
        assert load_archive(path)["fc1.weight"].tolist() == tensors["fc1.weight"].tolist()
    print("✅ save/load through the filesystem")


def test_precision_and_rng():
    assert resolve_dtype("single") == np.float32
    assert resolve_dtype("double") == np.float64
    assert as_tensor([[1, 2]], "double").dtype == np.float64
    with pytest.raises(ParameterError):
        resolve_dtype("half")
    with pytest.raises(ParameterError):
        RngState(-1)

    a, b = RngState(9), RngState(9)
    assert np.array_equal(a.random(5), b.random(5))
    assert RngState(9).child(0).seed != RngState(9).child(1).seed
    draw = RngState(9).uniform(0.2, 0.35)
    assert np.ndim(draw) == 0 and 0.2 <= float(draw) < 0.35
    assert RngState(9).uniform(0.0, 1.0, (2, 3)).shape == (2, 3)
    assert np.ndim(RngState(9).normal(0.0, 1.0)) == 0
    print("✅ Precision names and RNG streams")


def main():
    """Run all numerics tests."""
    print("\n" + "="*70)
    print("STEP 1 VALIDATION: NUMERICS CORE")
    print("="*70)

    tests = {
        'Dense / Activations': test_dense_and_activations,
        'Dropout': test_dropout,
        'Batch Norm': test_batchnorm,
        'Convolution': test_conv2d,
        'BCE / SGD': test_bce_and_sgd,
        'Residual Block': test_residual_identity,
        'Gradient Checks': test_gradient_checks,
        'Weights Archive': test_archive,
        'Precision / RNG': test_precision_and_rng,
    }
    results = {}
    for name, test in tests.items():
        try:
            test()
            results[name] = True
        except Exception as e:
            print(f"❌ {name} failed: {e!r}")
            results[name] = False

    print("\n" + "="*70)
    print("VALIDATION SUMMARY")
    print("="*70 + "\n")

    passed = sum(1 for r in results.values() if r)
    for name, result in results.items():
        status = "✅ PASS" if result else "❌ FAIL"
        print(f"{status} - {name}")
    print(f"\nResult: {passed}/{len(results)} tests passed")

    if passed == len(results):
        print("\n🎉 STEP 1 COMPLETE! Numerics core validated successfully.\n")
        return 0
    print("\n❌ STEP 1 INCOMPLETE. Fix failing tests before proceeding.\n")
    return 1


if __name__ == "__main__":
    import sys
    sys.exit(main())
