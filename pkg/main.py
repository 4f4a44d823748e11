#!/usr/bin/env python3
"""
Facial Palsy Detection - Main Entry Point

Batch experiments on a frame manifest: cache the derived modalities, train
one modality/model combination, evaluate it leave-one-patient-out and merge
the resulting reports into one comparison table.

Usage:
    python main.py synth --out corpus                  # Write a synthetic 21-patient corpus
    python main.py preprocess --config run.yaml        # Build the modality cache
    python main.py train --config run.yaml             # Train on the configured split
    python main.py eval-lopo --config run.yaml         # Leave-one-patient-out evaluation
    python main.py report runs/*/report.csv            # Merge reports into one table
    python main.py gradcheck --seeds 20                # Verify analytic gradients

Errors print a single ``error[<category>]: <message>`` line on stderr and
exit with status 2; unexpected failures exit with status 1.
"""

import argparse
import logging
import os
import sys
import time

from config.settings import RunConfig, load_run_config
from dataset.folds import lopo_folds
from dataset.manifest import load_manifest
from dataset.synthetic import generate_synthetic_corpus
from errors import NumericError, PalsyError, UsageError
from evaluation.experiments import MODALITIES, make_experiment
from evaluation.lopo import CorpusArrays, LopoRunner
from evaluation.metrics import FoldMetrics, confusion, degenerate_folds
from evaluation.report import emit_report, format_score, merge_reports, print_comparison_table
from models.training import write_history
from modalities.inputs import ModalityLoader, preprocess_frames
from modalities.readers import read_contour_spec, read_subset_indices
from numerics.gradcheck import GRADCHECK_CASES, run_gradcheck_suite
from storage.archive import save_archive
from storage.cache import ModalityCache

logger = logging.getLogger("palsy")


def _banner(title: str) -> None:
    print("\n" + "="*70)
    print(title)
    print("="*70 + "\n")


def _config(args) -> RunConfig:
    if not args.config:
        raise UsageError(f"'{args.command}' needs --config <path>")
    overrides = {
        'out_dir': args.out,
        'workers': args.workers,
        'seed_base': args.seed,
        'modality': getattr(args, 'modality', None),
    }
    return load_run_config(args.config, overrides)


def _loader(cfg: RunConfig) -> ModalityLoader:
    settings = cfg.experiment_settings()
    return ModalityLoader(
        ModalityCache(cfg.cache_root),
        image_size=cfg.image.size,
        rgb_mean=cfg.image.rgb_mean,
        rgb_std=cfg.image.rgb_std,
        dtype=settings.dtype,
    )


def cmd_preprocess(args) -> int:
    """Write coordinate, blendshape and BnW cache entries for every frame."""
    cfg = _config(args)
    _banner("PREPROCESSING MODALITIES")

    manifest = load_manifest(cfg.manifest)
    subset = read_subset_indices(cfg.subset_indices)
    contours = read_contour_spec(cfg.contours)
    cache = ModalityCache(cfg.cache_root)

    stats = manifest.stats()
    print(f"Manifest: {stats['patients']} patients, {stats['videos']} videos, {stats['frames']} frames")
    print(f"Cache:    {cfg.cache_root}\n")

    start_time = time.time()
    summary = preprocess_frames(
        manifest.frames(), cache, subset, contours,
        raster_size=cfg.image.canvas,
        config_sources=[cfg.subset_indices, cfg.contours],
        workers=cfg.workers,
    )
    print(f"✅ Processed {summary.frames} frames in {time.time() - start_time:.2f}s")
    print(f"   Entries written: {summary.written}")
    print(f"   Entries skipped (up to date): {summary.skipped}\n")
    return 0


def cmd_train(args) -> int:
    """Train one modality/model on every patient except the optional holdout."""
    cfg = _config(args)
    experiment = make_experiment(cfg.modality, cfg.experiment_settings())
    modality, model = experiment.label
    _banner(f"TRAINING {modality} / {model}")

    manifest = load_manifest(cfg.manifest)
    holdout = cfg.holdout_patient
    if holdout is not None and holdout not in manifest.patient_ids:
        raise UsageError(f"holdout patient '{holdout}' is not in the manifest")

    corpus = CorpusArrays.load(manifest.frames(), _loader(cfg), experiment.input_kinds)
    train = [record for record in corpus.records if record.patient_id != holdout]
    test = [record for record in corpus.records if record.patient_id == holdout]

    start_time = time.time()
    trained = experiment.fit(corpus.arrays, corpus.labels, corpus.rows(train), cfg.hyper.seed_base)
    print(f"✅ Trained on {len(train)} frames in {time.time() - start_time:.2f}s")

    weights_path = os.path.join(cfg.out_dir, "weights.tensor")
    save_archive(weights_path, trained.state_dict())
    print(f"✅ Weights written to {weights_path}")
    for part, history in trained.histories.items():
        if not history:
            continue
        history_path = os.path.join(cfg.out_dir, f"history_{part.replace('+', '_')}.tsv")
        write_history(history_path, history)
        print(f"✅ Loss history written to {history_path} "
              f"(epoch 1: {history[0]:.4f}, epoch {len(history)}: {history[-1]:.4f})")

    if test:
        rows = corpus.rows(test)
        preds = experiment.predict(trained, corpus.arrays, rows)
        fold = FoldMetrics.from_counts(holdout, confusion(preds, corpus.labels[rows]))
        print(f"\nHeld-out patient {holdout} ({len(test)} frames):")
        print(f"   Precision: {format_score(fold.precision)}")
        print(f"   Recall:    {format_score(fold.recall)}")
        print(f"   F1:        {format_score(fold.f1)}")
    print()
    return 0


def cmd_eval_lopo(args) -> int:
    """Run the full leave-one-patient-out plan and write the report files."""
    cfg = _config(args)
    experiment = make_experiment(cfg.modality, cfg.experiment_settings())
    modality, model = experiment.label
    _banner(f"LEAVE-ONE-PATIENT-OUT: {modality} / {model}")

    manifest = load_manifest(cfg.manifest)
    plan = lopo_folds(manifest)
    print(f"Folds: {len(plan)}   Workers: {cfg.workers}   Seed base: {cfg.hyper.seed_base}\n")

    runner = LopoRunner(experiment, _loader(cfg), workers=cfg.workers,
                        seed_base=cfg.hyper.seed_base, out_dir=cfg.out_dir)
    result = runner.run(plan)

    report_path = os.path.join(cfg.out_dir, "report.csv")
    emit_report([result.row], report_path, folds=result.folds)

    print(f"{'Patient':16} {'Precision':>10} {'Recall':>10} {'F1':>10}")
    print(f"{'─'*50}")
    for fold in result.folds:
        print(f"{fold.patient_id:16} {format_score(fold.precision):>10} "
              f"{format_score(fold.recall):>10} {format_score(fold.f1):>10}")
    print(f"{'─'*50}")
    print(f"{'Average':16} {format_score(result.scores.precision):>10} "
          f"{format_score(result.scores.recall):>10} {format_score(result.scores.f1):>10}\n")

    flagged = degenerate_folds(result.folds)
    if flagged:
        print(f"⚠️  {len(flagged)} fold(s) with a zero denominator (scored 0): {', '.join(flagged)}")
    print(f"✅ Report written to {report_path} ({result.elapsed_seconds}s)\n")
    return 0


def cmd_report(args) -> int:
    """Merge run reports into one comparison table."""
    rows = merge_reports(args.paths)
    print_comparison_table(rows)
    if args.out:
        merged_path = os.path.join(args.out, "merged_report.csv")
        emit_report(rows, merged_path)
        print(f"✅ Merged report written to {merged_path}\n")
    return 0


def cmd_synth(args) -> int:
    """Write a synthetic corpus with a manifest."""
    root = args.out or "corpus"
    _banner("GENERATING SYNTHETIC CORPUS")
    corpus = generate_synthetic_corpus(
        root,
        n_patients=args.patients,
        frames_per_video=args.frames,
        image_size=args.image_size,
        seed=args.seed or 0,
    )
    print(f"✅ {corpus.patients} patients, {corpus.videos} videos, {corpus.frames} frames "
          f"({corpus.positives} palsy-positive)")
    print(f"   Manifest: {corpus.manifest_path}\n")
    return 0


def cmd_gradcheck(args) -> int:
    """Compare analytic gradients with central finite differences."""
    _banner(f"GRADIENT VERIFICATION ({args.seeds} seeds per layer type)")
    start_time = time.time()
    reports = run_gradcheck_suite(seeds=args.seeds, h=args.step, tol=args.tol, cases=args.case or None)

    print(f"{'Layer type':16} {'Max rel. error':>16}  Worst tensor")
    print(f"{'─'*60}")
    failed = []
    for name, report in reports.items():
        status = "✅" if report.passed else "❌"
        print(f"{status} {name:14} {report.max_error:>16.3e}  {report.worst()}")
        if not report.passed:
            failed.append(name)
    print(f"\nElapsed: {time.time() - start_time:.2f}s\n")
    if failed:
        raise NumericError(f"gradient check above tolerance {args.tol} for: {', '.join(failed)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Run config file (YAML)")
    common.add_argument("--out", help="Output directory")
    common.add_argument("--workers", type=int, help="Maximum concurrent workers")
    common.add_argument("--seed", type=int, help="Seed base (fold i uses seed + i)")
    common.add_argument("--verbose", "-v", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(description="Facial palsy detection: multimodal LOPO experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", parents=[common], help="Build the modality cache")
    p.set_defaults(handler=cmd_preprocess)

    for name, handler, text in (("train", cmd_train, "Train one modality/model"),
                                ("eval-lopo", cmd_eval_lopo, "Leave-one-patient-out evaluation")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--modality", help=f"One of: {', '.join(MODALITIES)}")
        p.set_defaults(handler=handler)

    p = sub.add_parser("report", parents=[common], help="Merge run reports into one table")
    p.add_argument("paths", nargs="+", help="Report files written by eval-lopo")
    p.set_defaults(handler=cmd_report)

    p = sub.add_parser("synth", parents=[common], help="Write a synthetic corpus")
    p.add_argument("--patients", type=int, default=21)
    p.add_argument("--frames", type=int, default=6, help="Frames per video")
    p.add_argument("--image-size", type=int, default=64)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("gradcheck", parents=[common], help="Verify analytic gradients")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--case", action="append", choices=list(GRADCHECK_CASES))
    p.set_defaults(handler=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    """Main entry point."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    if args.workers is not None and args.workers < 1:
        print(UsageError(f"--workers must be >= 1, got {args.workers}").one_line(), file=sys.stderr)
        return 2

    try:
        return args.handler(args)
    except PalsyError as e:
        print(e.one_line(), file=sys.stderr)
        return 2
    except Exception as e:
        logger.exception("unexpected failure")
        print(f"error[internal]: {' '.join(str(e).split())}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n\nInterrupted.")
        sys.exit(130)
