"""
Leave-one-patient-out runner.

Each fold trains a fresh experiment on every other patient and scores the
held-out patient. Folds run concurrently on a thread pool; fold i is seeded
with seed_base + i and results are ordered by fold index, so reports do not
depend on the worker count.
"""

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from dataset.folds import Fold, FoldPlan
from errors import ParameterError, ProtocolError
from evaluation.experiments import BaseExperiment, Trained
from evaluation.metrics import AverageScores, FoldMetrics, aggregate_lopo, confusion
from evaluation.report import ReportRow
from models.training import write_history
from modalities.inputs import ModalityLoader, labels_for
from storage.archive import save_archive
from storage.records import FrameKey, FrameRecord

logger = logging.getLogger(__name__)


@dataclass
class FoldOutcome:
    fold_index: int
    patient_id: str
    metrics: FoldMetrics
    histories: Dict[str, List[float]] = field(default_factory=dict)
    state: Dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class LopoResult:
    row: ReportRow
    scores: AverageScores
    outcomes: List[FoldOutcome]
    elapsed_seconds: float = 0.0

    @property
    def folds(self) -> List[FoldMetrics]:
        return [outcome.metrics for outcome in self.outcomes]


class CorpusArrays:
    """All frames' inputs stacked once; folds select rows by frame key."""

    def __init__(self, records: List[FrameRecord], arrays: Dict[str, np.ndarray]):
        self.records = records
        self.arrays = arrays
        self.labels = labels_for(records)
        self._rows: Dict[FrameKey, int] = {record.key: i for i, record in enumerate(records)}

    @classmethod
    def load(cls, records: List[FrameRecord], loader: ModalityLoader, kinds: List[str]) -> "CorpusArrays":
        for kind in kinds:
            loader.require(records, kind)
        return cls(records, loader.load_many(records, kinds))

    def rows(self, records) -> np.ndarray:
        return np.asarray([self._rows[record.key] for record in records], dtype=np.int64)


class LopoRunner:
    """
    Runs one experiment over a fold plan.

    Args:
        experiment: Modality/model combination to evaluate
        loader: Reads cached modality tensors
        workers: Maximum concurrent folds
        seed_base: Fold i uses seed_base + i
        out_dir: When set, per-fold weights and histories go to out_dir/folds/<patient>/
    """

    def __init__(self, experiment: BaseExperiment, loader: ModalityLoader, workers: int = 1,
                 seed_base: int = 0, out_dir: Optional[str] = None):
        if workers < 1:
            raise ParameterError(f"worker count must be >= 1, got {workers}")
        self.experiment = experiment
        self.loader = loader
        self.workers = workers
        self.seed_base = seed_base
        self.out_dir = out_dir

    def _run_fold(self, fold: Fold, corpus: CorpusArrays) -> FoldOutcome:
        if not fold.train:
            raise ProtocolError(f"fold {fold.index} has no training frames")
        seed = self.seed_base + fold.index
        train_rows = corpus.rows(fold.train)
        test_rows = corpus.rows(fold.test)
        trained: Trained = self.experiment.fit(corpus.arrays, corpus.labels, train_rows, seed)
        preds = self.experiment.predict(trained, corpus.arrays, test_rows)
        metrics = FoldMetrics.from_counts(fold.held_out_patient_id, confusion(preds, corpus.labels[test_rows]))
        logger.info("fold %d (%s): P=%.2f R=%.2f F1=%.2f", fold.index, fold.held_out_patient_id,
                    metrics.precision, metrics.recall, metrics.f1)
        return FoldOutcome(fold.index, fold.held_out_patient_id, metrics, trained.histories, trained.state_dict())

    def run(self, plan: FoldPlan) -> LopoResult:
        if len(plan) < 2:
            raise ProtocolError(f"leave-one-patient-out needs at least 2 folds, plan has {len(plan)}")
        start_time = time.time()
        records = [frame for fold in plan.folds[:1] for frame in fold.train + fold.test]
        corpus = CorpusArrays.load(records, self.loader, self.experiment.input_kinds)

        outcomes: List[FoldOutcome] = []
        if self.workers == 1:
            outcomes = [self._run_fold(fold, corpus) for fold in plan]
        else:
            with ThreadPoolExecutor(max_workers=self.workers) as executor:
                futures = {executor.submit(self._run_fold, fold, corpus): fold.index for fold in plan}
                for future in as_completed(futures):
                    outcomes.append(future.result())
        outcomes.sort(key=lambda outcome: outcome.fold_index)

        if self.out_dir:
            self._save(outcomes)

        scores = aggregate_lopo([outcome.metrics for outcome in outcomes])
        modality, model = self.experiment.label
        return LopoResult(
            row=ReportRow.from_scores(modality, model, scores),
            scores=scores,
            outcomes=outcomes,
            elapsed_seconds=round(time.time() - start_time, 2),
        )

    def _save(self, outcomes: List[FoldOutcome]) -> None:
        for outcome in outcomes:
            directory = os.path.join(self.out_dir, "folds", outcome.patient_id)
            save_archive(os.path.join(directory, "weights.tensor"), outcome.state)
            for part, history in outcome.histories.items():
                if history:
                    write_history(os.path.join(directory, f"history_{part.replace('+', '_')}.tsv"), history)
