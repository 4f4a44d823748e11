#!/usr/bin/env python3
"""
STEP 4 VALIDATION: Models & Training

Tests:
1. FNN presets: shapes, taps, forward contract
2. Residual CNN and the dual-image variant
3. Decision rules: predict_class and late fusion
4. Early fusion head width and fine-tuning
5. Learnability on separable blendshape data (>= 95% in 15 epochs)
6. Bit-identical training under a fixed seed
"""

import os
import tempfile
import time

import numpy as np
import pytest

from dataset.synthetic import separable_blendshape_data
from errors import ConfigError, DimensionError, IngestionError, ParameterError, ProtocolError, TapError
from models.cnn import BackboneConfig, build_cnn, build_dual_image_cnn
from models.fnn import FnnConfig, build_fnn
from models.fusion import EarlyFusionConfig, EarlyFusionModel, build_early_fusion
from models.network import EmbeddingTap, extract_embedding, forward, late_fusion_predict, predict_class
from models.training import TrainingHyper, predict_proba, read_history, train_model, write_history
from numerics.rng import RngState
from numerics.tensor import LayerMode
from storage.archive import encode_archive


def tiny_backbone(in_channels: int = 3, head_hidden: int = 16) -> BackboneConfig:
    return BackboneConfig(stage_blocks=[1, 1], base_channels=4, head_hidden=head_hidden, in_channels=in_channels)


def test_fnn():
    """Parameter shapes, taps and the forward contract."""
    print("\n" + "="*70)
    print("TESTING FEED-FORWARD NETWORKS")
    print("="*70 + "\n")

    coords = build_fnn(FnnConfig.coords(), RngState(0))
    shapes = {p.name: p.shape for p in coords.parameters()}
    assert shapes["fc1.weight"] == (128, 250)
    assert shapes["fc2.weight"] == (64, 128)
    assert shapes["fc3.weight"] == (32, 64)
    assert shapes["fc4.weight"] == (2, 32)
    print("✅ Coordinates preset: 250 -> 128 -> 64 -> 32 -> 2")

    model = build_fnn(FnnConfig.blendshapes(), RngState(1))
    assert model.tap("hidden3").dim == 10
    x = RngState(2).uniform(0.0, 1.0, (8, 52))
    probs = forward(model, x)
    assert probs.shape == (8, 2) and np.all((probs > 0) & (probs < 1))
    assert extract_embedding(model, x, "hidden3").shape == (8, 10)
    assert np.array_equal(forward(model, x), probs)
    print("✅ Blendshapes preset: 8 x 2 probabilities, 10-dim hidden3 tap, deterministic Eval")

    with pytest.raises(DimensionError):
        forward(model, np.ones((4, 51)))
    with pytest.raises(TapError):
        model.tap("hidden9")
    with pytest.raises(ParameterError):
        forward(model, x, LayerMode.TRAIN)
    with pytest.raises(ConfigError):
        build_fnn(FnnConfig(input_dim=52, layer_sizes=[64, 32, 10, 3]), RngState(0))
    print("✅ Bad width, unknown tap, Train without RNG, bad preset rejected")

    twin = build_fnn(FnnConfig.blendshapes(), RngState(99))
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "fnn.tensor")
        model.save(path)
        twin.load(path)
        assert np.allclose(forward(twin, x), probs)
        with pytest.raises(IngestionError):
            coords.load(path)
    print("✅ Weights round-trip through the archive; mismatched models refuse them")


def test_cnn():
    """Desk backbone shapes, embedding tap and the 6-channel variant."""
    print("\n" + "="*70)
    print("TESTING RESIDUAL CNN")
    print("="*70 + "\n")

    start = time.time()
    model = build_cnn(BackboneConfig.desk(), RngState(0))
    x = RngState(1).uniform(0.0, 1.0, (2, 3, 224, 224)).astype(np.float32)
    probs = forward(model, x)
    assert probs.shape == (2, 2) and np.all((probs > 0) & (probs < 1))
    assert extract_embedding(model, x, "embedding").shape == (2, 512)
    print(f"✅ Desk CNN: 2 x 3 x 224 x 224 -> 2 x 2, 512-dim embedding ({time.time() - start:.1f}s)")

    dual = build_dual_image_cnn(BackboneConfig.desk(), RngState(0))
    assert dual.name == "dual_cnn"
    x6 = RngState(2).uniform(0.0, 1.0, (2, 6, 224, 224)).astype(np.float32)
    assert forward(dual, x6).shape == (2, 2)
    with pytest.raises(DimensionError):
        forward(dual, x)
    print("✅ Dual-image CNN takes the 6-channel stack")

    small = build_cnn(tiny_backbone(), RngState(3))
    batch = RngState(4).uniform(0.0, 1.0, (3, 3, 20, 28)).astype(np.float32)
    out = small.forward(batch, LayerMode.TRAIN, RngState(5))
    assert out.shape == (3, 2)
    print("✅ Train-mode forward on non-square input")

    reference = BackboneConfig.reference()
    reference.validate()
    assert reference.reference_depth and not BackboneConfig.desk().reference_depth
    with pytest.raises(ConfigError):
        BackboneConfig(block="dense").validate()
    print("✅ Reference depth: bottleneck [3, 4, 6, 3]")


def test_decision_rules():
    """Tie-break to class 0; late fusion averages and is symmetric."""
    print("\n" + "="*70)
    print("TESTING DECISION RULES")
    print("="*70 + "\n")

    assert predict_class(np.array([[0.2, 0.8], [0.8, 0.2], [0.5, 0.5]])).tolist() == [1, 0, 0]
    assert late_fusion_predict(np.array([[0.9, 0.1]]), np.array([[0.5, 0.5]])).tolist() == [0]
    assert late_fusion_predict(np.array([[0.5, 0.5]]), np.array([[0.5, 0.5]])).tolist() == [0]
    print("✅ Argmax with ties to negative; mean([0.9,0.1],[0.5,0.5]) -> 0")

    rng = RngState(6)
    a = rng.uniform(0.0, 1.0, (10_000, 2))
    b = rng.uniform(0.0, 1.0, (10_000, 2))
    assert np.array_equal(late_fusion_predict(a, b), late_fusion_predict(b, a))
    assert np.array_equal(late_fusion_predict(a, a), predict_class(a))
    print("✅ Late fusion symmetric on 10^4 pairs, idempotent on equal inputs")

    with pytest.raises(DimensionError):
        late_fusion_predict(a[:3], b[:4])
    with pytest.raises(DimensionError):
        predict_class(np.ones((3, 3)))


def test_early_fusion():
    """Head width equals the tap dims; fine-tuning reaches the constituents."""
    print("\n" + "="*70)
    print("TESTING EARLY FUSION")
    print("="*70 + "\n")

    cfg = EarlyFusionConfig(EmbeddingTap("embedding", "head.relu", 512), EmbeddingTap("hidden3", "relu3", 10))
    assert cfg.input_width == 522
    head = build_early_fusion(cfg, RngState(0))
    assert head.input_shape == (522,)
    assert head.parameters()[0].shape == (256, 522)
    with pytest.raises(ConfigError):
        build_early_fusion(cfg, RngState(0), input_width=500)
    print("✅ Taps 512 + 10 -> head input width 522")

    rng = RngState(7)
    x_img = rng.uniform(0.0, 1.0, (8, 3, 16, 16)).astype(np.float32)
    x_bs = rng.uniform(0.0, 1.0, (8, 52)).astype(np.float32)
    labels = np.array([0, 1] * 4)

    for fine_tune in (False, True):
        model_a = build_cnn(tiny_backbone(), RngState(1))
        model_b = build_fnn(FnnConfig.blendshapes(), RngState(2))
        fcfg = EarlyFusionConfig(model_a.tap("embedding"), model_b.tap("hidden3"), fine_tune=fine_tune)
        fusion = EarlyFusionModel(model_a, model_b, build_early_fusion(fcfg, RngState(3)), fcfg)
        before = model_a.parameters()[0].value.copy()
        result = train_model(fusion, (x_img, x_bs), labels, TrainingHyper(lr=0.01, epochs=2, batch_size=4))
        assert len(result.history) == 2 and all(np.isfinite(result.history))
        probs = predict_proba(fusion, (x_img, x_bs))
        assert probs.shape == (8, 2)
        changed = not np.array_equal(before, model_a.parameters()[0].value)
        assert changed == fine_tune
        print(f"✅ fine_tune={fine_tune}: constituent weights {'updated' if changed else 'frozen'}")

    with pytest.raises(ConfigError):
        EarlyFusionModel(model_a, model_b, head, cfg)


def test_learnability():
    """Blendshape FNN preset on two separable clusters."""
    print("\n" + "="*70)
    print("TESTING LEARNABILITY")
    print("="*70 + "\n")

    start = time.time()
    x, y = separable_blendshape_data(n_per_class=500, seed=0)
    model = build_fnn(FnnConfig.blendshapes(), RngState(0).child(2))
    hyper = TrainingHyper.for_preset("fnn", batch_size=32, seed=0)
    assert (hyper.lr, hyper.epochs) == (0.01, 15)
    result = train_model(model, x.astype(np.float32), y, hyper)
    accuracy = float(np.mean(predict_class(predict_proba(model, x.astype(np.float32))) == y))
    elapsed = time.time() - start
    print(f"   loss {result.history[0]:.4f} -> {result.history[-1]:.4f}, accuracy {accuracy:.1%}, {elapsed:.1f}s")
    assert result.history[-1] < result.history[0]
    assert accuracy >= 0.95
    assert elapsed < 60
    print("✅ >= 95% training accuracy within 15 epochs")

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "history.tsv")
        write_history(path, result.history)
        with open(path) as f:
            assert f.readline() == "epoch\tmean_loss\n"
        assert np.allclose(read_history(path), result.history, atol=1e-8)
    print("✅ Loss history file")


def test_training_determinism():
    """Same seed and data give byte-identical weights; edge cases."""
    print("\n" + "="*70)
    print("TESTING TRAINING DETERMINISM")
    print("="*70 + "\n")

    x, y = separable_blendshape_data(n_per_class=40, seed=3)
    x = x.astype(np.float32)
    blobs = []
    for _ in range(2):
        model = build_fnn(FnnConfig.blendshapes(), RngState(11))
        train_model(model, x, y, TrainingHyper(lr=0.01, epochs=3, batch_size=16, seed=5))
        blobs.append(encode_archive(model.state_dict()))
    assert blobs[0] == blobs[1]
    print("✅ Identical archive bytes across reruns")

    model = build_fnn(FnnConfig.blendshapes(), RngState(11))
    train_model(model, x, y, TrainingHyper(lr=0.01, epochs=1, batch_size=16, seed=6))
    assert encode_archive(model.state_dict()) != blobs[0]

    model = build_fnn(FnnConfig.blendshapes(), RngState(0))
    result = train_model(model, x[:33], y[:33], TrainingHyper(lr=0.01, epochs=2, batch_size=32))
    assert len(result.history) == 2
    print("✅ Trailing single-sample batch skipped for batch norm")

    before = encode_archive(model.state_dict())
    with pytest.raises(ProtocolError, match="batch norm"):
        train_model(model, x[:1], y[:1], TrainingHyper(lr=0.01, epochs=1, batch_size=32))
    with pytest.raises(ProtocolError, match="batch norm"):
        train_model(model, x, y, TrainingHyper(lr=0.01, epochs=1, batch_size=1))
    assert encode_archive(model.state_dict()) == before
    print("✅ Single-row training set and batch size 1 rejected for batch norm")

    with pytest.raises(ProtocolError):
        train_model(model, x[:0], y[:0], TrainingHyper(lr=0.01, epochs=1))
    with pytest.raises(ConfigError):
        train_model(model, x, y, TrainingHyper(lr=0.0, epochs=1))
    assert predict_proba(model, x[:0]).shape == (0, 2)
    print("✅ Empty training set and bad hyperparameters rejected")


def main():
    """Run all model tests."""
    print("\n" + "="*70)
    print("STEP 4 VALIDATION: MODELS & TRAINING")
    print("="*70)

    tests = {
        'Feed-Forward Networks': test_fnn,
        'Residual CNN': test_cnn,
        'Decision Rules': test_decision_rules,
        'Early Fusion': test_early_fusion,
        'Learnability': test_learnability,
        'Training Determinism': test_training_determinism,
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
        print("\n🎉 STEP 4 COMPLETE! Models and training validated successfully.\n")
        return 0
    print("\n❌ STEP 4 INCOMPLETE. Fix failing tests before proceeding.\n")
    return 1


if __name__ == "__main__":
    import sys
    sys.exit(main())
