#!/usr/bin/env python3
"""
STEP 3 VALIDATION: Dataset & Fold Plan

Tests:
1. Binary label rule (all 9 intensity pairs)
2. Manifest ingestion and validation errors
3. Leave-one-patient-out fold plan integrity
4. Seeded mini-batch iteration
5. Synthetic corpus generator
"""

import itertools
import json
import os
import tempfile

import numpy as np
import pytest

from dataset.batching import batch_iterator
from dataset.folds import lopo_folds
from dataset.labels import VALID_TOKENS, BinaryLabel, RegionIntensity, derive_binary_label, one_hot
from dataset.manifest import load_manifest
from dataset.synthetic import generate_synthetic_corpus, separable_blendshape_data
from errors import IngestionError, ParameterError, ProtocolError
from numerics.rng import RngState


def frame(index, eye="none", mouth="none"):
    stem = f"f{index}"
    return {"index": index, "rgb": f"{stem}.png", "landmarks": f"{stem}_lm.txt",
            "blendshapes": f"{stem}_bs.txt", "eye": eye, "mouth": mouth}


def write_manifest(directory, patients):
    path = os.path.join(directory, "manifest.json")
    with open(path, 'w') as f:
        json.dump({"patients": patients}, f)
    return path


def two_patients():
    return [
        {"patient_id": "p1", "videos": [{"video_id": "v1", "fps": 6, "frames": [frame(0, "strong"), frame(1)]}]},
        {"patient_id": "p2", "videos": [{"video_id": "v1", "fps": 6, "frames": [frame(0, "slight", "slight")]}]},
    ]


def test_label_rule():
    """Positive iff a region is Strong or both are Slight."""
    print("\n" + "="*70)
    print("TESTING LABEL RULE")
    print("="*70 + "\n")

    for eye, mouth in itertools.product(RegionIntensity, repeat=2):
        strong = RegionIntensity.STRONG in (eye, mouth)
        both_slight = eye == mouth == RegionIntensity.SLIGHT
        expected = BinaryLabel.POSITIVE if strong or both_slight else BinaryLabel.NEGATIVE
        assert derive_binary_label(eye, mouth) == expected
        print(f"   ({eye.token:6}, {mouth.token:6}) -> {expected.name.lower()}")
    print("✅ All 9 intensity pairs follow the rule")

    assert derive_binary_label(RegionIntensity.STRONG, RegionIntensity.ABSENT) == BinaryLabel.POSITIVE
    assert derive_binary_label(RegionIntensity.SLIGHT, RegionIntensity.ABSENT) == BinaryLabel.NEGATIVE

    assert RegionIntensity.parse("Strong") == RegionIntensity.STRONG
    with pytest.raises(IngestionError) as exc:
        RegionIntensity.parse("moderate")
    assert all(token in str(exc.value) for token in VALID_TOKENS)
    print(f"✅ Closed vocabulary: {exc.value}")

    assert one_hot([0, 1, 1]).tolist() == [[1, 0], [0, 1], [0, 1]]


def test_manifest():
    """Schema, uniqueness, vocabulary and file checks."""
    print("\n" + "="*70)
    print("TESTING MANIFEST INGESTION")
    print("="*70 + "\n")

    with tempfile.TemporaryDirectory() as tmp:
        manifest = load_manifest(write_manifest(tmp, two_patients()), check_files=False)
        assert manifest.patient_ids == ["p1", "p2"]
        labels = [int(record.label) for record in manifest.frames()]
        assert labels == [1, 0, 1]
        assert manifest.stats()['positive_frames'] == 2
        assert manifest.frames()[0].rgb_path == os.path.join(tmp, "f0.png")
        print(f"✅ Two-patient manifest: {manifest.stats()}")

        patients = two_patients()
        patients[0]["videos"][0]["frames"].append(frame(1))
        with pytest.raises(IngestionError) as exc:
            load_manifest(write_manifest(tmp, patients), check_files=False)
        assert "p1/v1/1" in str(exc.value)
        print(f"✅ Duplicate key: {exc.value}")

        patients = two_patients()
        patients[1]["videos"][0]["frames"][0]["mouth"] = "moderate"
        with pytest.raises(IngestionError) as exc:
            load_manifest(write_manifest(tmp, patients), check_files=False)
        assert "moderate" in str(exc.value) and "slight" in str(exc.value)
        print(f"✅ Unknown token: {exc.value}")

        patients = two_patients()
        patients[0]["videos"][0]["frames"] = [frame(3), frame(2)]
        with pytest.raises(IngestionError):
            load_manifest(write_manifest(tmp, patients), check_files=False)
        print("✅ Frame indices must increase within a video")

        with pytest.raises(IngestionError):
            load_manifest(write_manifest(tmp, two_patients()), check_files=True)
        with open(os.path.join(tmp, "broken.json"), 'w') as f:
            f.write("{not json")
        with pytest.raises(IngestionError):
            load_manifest(os.path.join(tmp, "broken.json"))
        with pytest.raises(IngestionError):
            load_manifest(write_manifest(tmp, [{"patient_id": "p1"}]))
        print("✅ Missing files, bad JSON and schema violations rejected")


def test_lopo_folds():
    """One fold per patient, disjoint splits, videos kept together."""
    print("\n" + "="*70)
    print("TESTING LEAVE-ONE-PATIENT-OUT FOLDS")
    print("="*70 + "\n")

    with tempfile.TemporaryDirectory() as tmp:
        corpus = generate_synthetic_corpus(tmp, n_patients=21, frames_per_video=2, image_size=16, seed=1)
        manifest = load_manifest(corpus.manifest_path)
        plan = lopo_folds(manifest)
        assert len(plan) == 21
        assert [fold.held_out_patient_id for fold in plan] == sorted(manifest.patient_ids)
        all_keys = {record.key for record in manifest.frames()}
        for fold in plan:
            train_patients = {record.patient_id for record in fold.train}
            test_patients = {record.patient_id for record in fold.test}
            assert test_patients == {fold.held_out_patient_id}
            assert not train_patients & test_patients
            assert {r.key for r in fold.train} | {r.key for r in fold.test} == all_keys
            for record in manifest.frames():
                side = "test" if record.patient_id == fold.held_out_patient_id else "train"
                assert (record in fold.test) == (side == "test")
        multi = [p for p in manifest.patients if len(p.videos) == 2]
        assert len(multi) == 7
        print(f"✅ 21 folds, zero overlap, {len(multi)} two-video patients kept whole")

    with tempfile.TemporaryDirectory() as tmp:
        manifest = load_manifest(write_manifest(tmp, two_patients()), check_files=False)
        plan = lopo_folds(manifest)
        assert len(plan) == 2
        assert [len(fold.test) for fold in plan] == [2, 1]
        print("✅ Two patients give two folds")

        single = write_manifest(tmp, two_patients()[:1])
        with pytest.raises(ProtocolError):
            lopo_folds(load_manifest(single, check_files=False))
        print("✅ Fewer than 2 patients is a protocol error")


def test_batching():
    """Batch sizes, coverage and seeded order."""
    print("\n" + "="*70)
    print("TESTING BATCH ITERATION")
    print("="*70 + "\n")

    items = list(range(10))
    batches = list(batch_iterator(items, 4, RngState(0)))
    assert [len(b) for b in batches] == [4, 4, 2]
    assert sorted(i for b in batches for i in b) == items
    assert batches == list(batch_iterator(items, 4, RngState(0)))
    assert list(batch_iterator(items, 4, shuffle=False))[0] == [0, 1, 2, 3]
    assert list(batch_iterator([], 4, RngState(0))) == []
    print("✅ 10 items / batch 4 -> [4, 4, 2], same seed same order")

    with pytest.raises(ParameterError):
        list(batch_iterator(items, 0, RngState(0)))
    with pytest.raises(ParameterError):
        list(batch_iterator(items, 4, None, shuffle=True))


def test_synthetic_data():
    """Corpus counts and the separable blendshape set."""
    print("\n" + "="*70)
    print("TESTING SYNTHETIC DATA")
    print("="*70 + "\n")

    with tempfile.TemporaryDirectory() as tmp:
        first = generate_synthetic_corpus(os.path.join(tmp, "a"), n_patients=6, frames_per_video=3,
                                          image_size=24, seed=9)
        second = generate_synthetic_corpus(os.path.join(tmp, "b"), n_patients=6, frames_per_video=3,
                                           image_size=24, seed=9)
        assert (first.patients, first.videos, first.frames) == (6, 8, 24)
        assert first.positives == second.positives
        manifest = load_manifest(first.manifest_path)
        assert manifest.stats()['positive_frames'] == first.positives
        with open(manifest.frames()[5].blendshape_path) as fa, \
                open(load_manifest(second.manifest_path).frames()[5].blendshape_path) as fb:
            assert fa.read() == fb.read()
        print(f"✅ Corpus: {first.patients} patients, {first.videos} videos, "
              f"{first.frames} frames, {first.positives} positive; seeded")

        with pytest.raises(ParameterError):
            generate_synthetic_corpus(os.path.join(tmp, "c"), n_patients=0)

    x, y = separable_blendshape_data(n_per_class=500, seed=0)
    assert x.shape == (1000, 52) and y.shape == (1000,)
    assert np.bincount(y).tolist() == [500, 500]
    assert x.min() >= 0 and x.max() <= 1
    print("✅ Separable blendshape set: 2 x 500 samples in [0, 1]")


def main():
    """Run all dataset tests."""
    print("\n" + "="*70)
    print("STEP 3 VALIDATION: DATASET & FOLD PLAN")
    print("="*70)

    tests = {
        'Label Rule': test_label_rule,
        'Manifest Ingestion': test_manifest,
        'LOPO Folds': test_lopo_folds,
        'Batch Iteration': test_batching,
        'Synthetic Data': test_synthetic_data,
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
        print("\n🎉 STEP 3 COMPLETE! Dataset and fold plan validated successfully.\n")
        return 0
    print("\n❌ STEP 3 INCOMPLETE. Fix failing tests before proceeding.\n")
    return 1


if __name__ == "__main__":
    import sys
    sys.exit(main())
