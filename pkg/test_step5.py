#!/usr/bin/env python3
"""
STEP 5 VALIDATION: Evaluation & Reports

Tests:
1. Confusion counts against a brute-force tally
2. Precision / recall / F1 with zero-denominator flags
3. LOPO averaging
4. Report formatting, parsing and merging
5. LOPO runner: worker-count independence and fusion experiments
"""

import os
import random
import tempfile

import numpy as np
import pytest

from dataset.folds import lopo_folds
from dataset.manifest import load_manifest
from dataset.synthetic import generate_synthetic_corpus
from errors import InputError, ParameterError, ProtocolError, ReportParseError, UsageError
from evaluation.experiments import ExperimentSettings, make_experiment
from evaluation.lopo import LopoRunner
from evaluation.metrics import ConfusionCounts, FoldMetrics, aggregate_lopo, confusion, degenerate_folds, prf
from evaluation.report import (CANONICAL_ROWS, REPORT_HEADER, ReportRow, emit_report, format_score,
                               merge_reports, read_report)
from models.cnn import BackboneConfig
from modalities.inputs import ModalityLoader, preprocess_frames
from modalities.readers import read_contour_spec, read_subset_indices
from storage.cache import ModalityCache

CONFIG_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "config")


def test_confusion():
    """sklearn-backed counts match a plain tally."""
    print("\n" + "="*70)
    print("TESTING CONFUSION COUNTS")
    print("="*70 + "\n")

    rng = random.Random(0)
    for _ in range(10_000):
        n = rng.randint(0, 12)
        preds = [rng.randint(0, 1) for _ in range(n)]
        labels = [rng.randint(0, 1) for _ in range(n)]
        expected = ConfusionCounts(
            tp=sum(p == 1 and y == 1 for p, y in zip(preds, labels)),
            fp=sum(p == 1 and y == 0 for p, y in zip(preds, labels)),
            tn=sum(p == 0 and y == 0 for p, y in zip(preds, labels)),
            fn=sum(p == 0 and y == 1 for p, y in zip(preds, labels)),
        )
        assert confusion(preds, labels) == expected
    print("✅ 10^4 random cases agree with the brute-force tally")

    with pytest.raises(InputError):
        confusion([0, 1], [0])
    with pytest.raises(InputError):
        confusion([0, 2], [0, 1])
    print("✅ Length mismatch and non-binary values rejected")


def test_prf():
    """Percent scores and degenerate flags."""
    print("\n" + "="*70)
    print("TESTING PRECISION / RECALL / F1")
    print("="*70 + "\n")

    scores = prf(ConfusionCounts(tp=3, fp=1, tn=5, fn=2))
    assert scores.precision == pytest.approx(75.0)
    assert scores.recall == pytest.approx(60.0)
    assert scores.f1 == pytest.approx(66.6667, abs=1e-4)
    assert not (scores.degenerate_precision or scores.degenerate_recall or scores.degenerate_f1)
    print(f"✅ tp=3 fp=1 fn=2 -> P={scores.precision:.2f} R={scores.recall:.2f} F1={scores.f1:.2f}")

    all_negative = prf(ConfusionCounts(tn=4))
    assert all_negative.as_tuple() == (0.0, 0.0, 0.0)
    assert all_negative.degenerate_precision and all_negative.degenerate_recall and all_negative.degenerate_f1

    missed = prf(ConfusionCounts(fp=2, fn=3))
    assert missed.as_tuple() == (0.0, 0.0, 0.0)
    assert not missed.degenerate_precision and missed.degenerate_f1
    print("✅ Zero denominators score 0 and are flagged")

    rng = random.Random(11)
    for _ in range(10_000):
        tp, fp, tn, fn = (rng.randint(0, 12) for _ in range(4))
        scores = prf(ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn))
        expected_p = 100.0 * tp / (tp + fp) if tp + fp else 0.0
        expected_r = 100.0 * tp / (tp + fn) if tp + fn else 0.0
        # F1 straight from counts: 2tp / (2tp + fp + fn)
        expected_f1 = 100.0 * 2 * tp / (2 * tp + fp + fn) if tp else 0.0
        assert scores.precision == pytest.approx(expected_p)
        assert scores.recall == pytest.approx(expected_r)
        assert scores.f1 == pytest.approx(expected_f1)
        assert scores.degenerate_precision == (tp + fp == 0)
        assert scores.degenerate_recall == (tp + fn == 0)
        assert scores.degenerate_f1 == (tp == 0)
    print("✅ 10^4 random confusion counts match the closed-form scores")


def test_aggregation():
    """Unweighted mean over folds, degenerate folds included."""
    print("\n" + "="*70)
    print("TESTING LOPO AGGREGATION")
    print("="*70 + "\n")

    folds = [
        FoldMetrics.from_counts("p1", ConfusionCounts(tp=3, fp=1, tn=5, fn=2)),
        FoldMetrics.from_counts("p2", ConfusionCounts(tp=4, tn=1)),
        FoldMetrics.from_counts("p3", ConfusionCounts(tn=6)),
    ]
    scores = aggregate_lopo(folds)
    assert scores.folds == 3
    assert scores.precision == pytest.approx((75.0 + 100.0 + 0.0) / 3)
    assert scores.recall == pytest.approx((60.0 + 100.0 + 0.0) / 3)
    assert scores.f1 == pytest.approx((200.0 / 3 + 100.0 + 0.0) / 3)
    assert degenerate_folds(folds) == ["p3"]
    print(f"✅ Macro average over 3 folds: F1={scores.f1:.2f}, degenerate: {degenerate_folds(folds)}")

    with pytest.raises(ProtocolError):
        aggregate_lopo([])


def write_report(directory, name, rows):
    path = os.path.join(directory, name)
    emit_report(rows, path)
    return path


def test_reports():
    """Two-decimal half-up formatting, parse errors and canonical merge."""
    print("\n" + "="*70)
    print("TESTING REPORTS")
    print("="*70 + "\n")

    assert format_score(66.6667) == "66.67"
    assert format_score(2.675) == "2.68"
    assert format_score(0.125) == "0.13"
    assert format_score(79) == "79.00"
    print("✅ Half-up rounding to two decimals")

    with tempfile.TemporaryDirectory() as tmp:
        path = write_report(tmp, "bs.csv", [ReportRow("Blendshapes", "FNN", 71.2149, 76.22, 79.0)])
        with open(path) as f:
            assert f.read() == ",".join(REPORT_HEADER) + "\nBlendshapes,FNN,71.21,76.22,79.00\n"
        empty = write_report(tmp, "empty.csv", [])
        with open(empty) as f:
            assert f.read() == ",".join(REPORT_HEADER) + "\n"
        assert read_report(empty) == []
        print("✅ Report line: Blendshapes,FNN,71.21,76.22,79.00")

        bad = os.path.join(tmp, "bad.csv")
        for content, line in (("model,modality\n", ":1:"),
                              (",".join(REPORT_HEADER) + "\nRGB,ResNet,1,2,3\nRGB,ResNet,1,2\n", ":3:"),
                              (",".join(REPORT_HEADER) + "\nRGB,ResNet,1,two,3\n", ":2:")):
            with open(bad, 'w') as f:
                f.write(content)
            with pytest.raises(ReportParseError) as exc:
                read_report(bad)
            assert line in str(exc.value)
        print("✅ Parse errors cite the line")

        shuffled = list(CANONICAL_ROWS)
        random.Random(3).shuffle(shuffled)
        paths = [write_report(tmp, f"r{i}.csv", [ReportRow(modality, model, 10.0 + i, 20.0, 30.0)])
                 for i, (modality, model) in enumerate(shuffled)]
        merged = merge_reports(paths)
        assert [row.key for row in merged] == CANONICAL_ROWS
        print("✅ Seven reports merge into canonical row order")

        assert merge_reports([paths[0]]) == read_report(paths[0])
        with pytest.raises(ReportParseError) as exc:
            merge_reports([paths[0], paths[0]])
        assert "duplicate" in str(exc.value)
        with pytest.raises(ReportParseError):
            merge_reports([])
        print("✅ Single report passes through; duplicate rows rejected")


def small_corpus(tmp, n_patients=4):
    corpus = generate_synthetic_corpus(os.path.join(tmp, "corpus"), n_patients=n_patients,
                                       frames_per_video=4, image_size=16, seed=2)
    manifest = load_manifest(corpus.manifest_path)
    cache = ModalityCache(os.path.join(tmp, "cache"))
    preprocess_frames(manifest.frames(), cache,
                      read_subset_indices(os.path.join(CONFIG_DIR, "landmark_subset.txt")),
                      read_contour_spec(os.path.join(CONFIG_DIR, "contours.yaml")),
                      raster_size=16)
    return manifest, ModalityLoader(cache, image_size=16)


def test_lopo_runner():
    """Identical results for any worker count; fusion experiments run end to end."""
    print("\n" + "="*70)
    print("TESTING LOPO RUNNER")
    print("="*70 + "\n")

    with tempfile.TemporaryDirectory() as tmp:
        manifest, loader = small_corpus(tmp)
        plan = lopo_folds(manifest)
        settings = ExperimentSettings(epochs=3, batch_size=8)

        reports = []
        for workers in (1, 4):
            out_dir = os.path.join(tmp, f"w{workers}")
            result = LopoRunner(make_experiment("blendshapes", settings), loader,
                                workers=workers, seed_base=7, out_dir=out_dir).run(plan)
            assert [f.patient_id for f in result.folds] == sorted(manifest.patient_ids)
            report_path = os.path.join(out_dir, "report.csv")
            emit_report([result.row], report_path, folds=result.folds)
            with open(report_path) as f, open(os.path.join(out_dir, "report_folds.csv")) as g:
                reports.append((f.read(), g.read()))
            first = os.path.join(out_dir, "folds", plan.folds[0].held_out_patient_id, "weights.tensor")
            with open(first, 'rb') as f:
                reports[-1] += (f.read(),)
        assert reports[0] == reports[1]
        assert reports[0][0].splitlines()[1].startswith("Blendshapes,FNN,")
        print("✅ workers=1 and workers=4 give byte-identical reports and weights")

        tiny = BackboneConfig(stage_blocks=[1, 1], base_channels=4, head_hidden=16)
        fusion_settings = ExperimentSettings(backbone=tiny, epochs=1, batch_size=8)
        late = LopoRunner(make_experiment("late_fusion", fusion_settings), loader, workers=2).run(plan)
        assert late.row.key == ("Blendshapes+BnW", "LateFusion")
        early = LopoRunner(make_experiment("early_fusion", fusion_settings), loader, workers=2).run(plan)
        assert early.row.key == ("Blendshapes+BnW", "EarlyFusion")
        for result in (late, early):
            assert len(result.folds) == len(plan)
            assert all(0 <= v <= 100 for v in result.row.scores())
        print(f"✅ Late fusion F1={format_score(late.row.avg_f1)}, "
              f"early fusion F1={format_score(early.row.avg_f1)}")

        with pytest.raises(ParameterError):
            LopoRunner(make_experiment("blendshapes", settings), loader, workers=0)
        with pytest.raises(UsageError):
            make_experiment("thermal", settings)
        print("✅ Bad worker count and unknown modality rejected")


def main():
    """Run all evaluation tests."""
    print("\n" + "="*70)
    print("STEP 5 VALIDATION: EVALUATION & REPORTS")
    print("="*70)

    tests = {
        'Confusion Counts': test_confusion,
        'Precision / Recall / F1': test_prf,
        'LOPO Aggregation': test_aggregation,
        'Reports': test_reports,
        'LOPO Runner': test_lopo_runner,
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
        print("\n🎉 STEP 5 COMPLETE! Evaluation and reports validated successfully.\n")
        return 0
    print("\n❌ STEP 5 INCOMPLETE. Fix failing tests before proceeding.\n")
    return 1


if __name__ == "__main__":
    import sys
    sys.exit(main())
