"""
Result reports.

Report file (comma-separated, two decimals, half-up rounding):

    modality,model,avg_f1,avg_precision,avg_recall
    Blendshapes,FNN,71.21,76.22,79.00

Each report has a per-fold detail file next to it with the held-out
patient, raw confusion counts, per-fold scores and degenerate flags.
"""

import csv
import os
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Dict, List, Optional, Sequence, Tuple

from errors import OutputError, ReportParseError
from evaluation.metrics import AverageScores, FoldMetrics

REPORT_HEADER = ["modality", "model", "avg_f1", "avg_precision", "avg_recall"]
DETAIL_HEADER = [
    "patient_id", "tp", "fp", "tn", "fn", "precision", "recall", "f1",
    "degenerate_precision", "degenerate_recall", "degenerate_f1",
]
DISPLAY_COLUMNS = ["Average F1", "Average Precision", "Average Recall"]

# Row order of the comparison table.
CANONICAL_ROWS = [
    ("Coordinates", "FNN"),
    ("Blendshapes", "FNN"),
    ("RGB", "ResNet"),
    ("BnW", "ResNet"),
    ("BnW+RGB", "ResNet"),
    ("Blendshapes+BnW", "EarlyFusion"),
    ("Blendshapes+BnW", "LateFusion"),
]
FUSION_MODELS = ("EarlyFusion", "LateFusion")

_CENT = Decimal("0.01")


@dataclass(frozen=True)
class ReportRow:
    modality: str
    model: str
    avg_f1: float
    avg_precision: float
    avg_recall: float

    @property
    def key(self) -> Tuple[str, str]:
        return (self.modality, self.model)

    @property
    def single_modality(self) -> bool:
        return self.model not in FUSION_MODELS and "+" not in self.modality

    @classmethod
    def from_scores(cls, modality: str, model: str, scores: AverageScores) -> "ReportRow":
        return cls(modality, model, scores.f1, scores.precision, scores.recall)

    def scores(self) -> Tuple[float, float, float]:
        return (self.avg_f1, self.avg_precision, self.avg_recall)


def format_score(value: float) -> str:
    """Two decimals, rounding half up on the shortest decimal form of ``value``."""
    return str(Decimal(repr(float(value))).quantize(_CENT, rounding=ROUND_HALF_UP))


def format_row(row: ReportRow) -> List[str]:
    return [row.modality, row.model] + [format_score(v) for v in row.scores()]


def _open_for_write(path: str):
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        return open(path, 'w', newline='')
    except OSError as e:
        raise OutputError(f"cannot write report {path}: {e}")


def detail_path_for(report_path: str) -> str:
    root, ext = os.path.splitext(report_path)
    return f"{root}_folds{ext or '.csv'}"


def emit_report(rows: Sequence[ReportRow], path: str,
                folds: Optional[Sequence[FoldMetrics]] = None,
                folds_path: Optional[str] = None) -> None:
    """
    Write the report and, when ``folds`` is given, its per-fold detail file.

    Raises:
        OutputError when a file cannot be written
    """
    try:
        with _open_for_write(path) as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(REPORT_HEADER)
            writer.writerows(format_row(row) for row in rows)
    except OSError as e:
        raise OutputError(f"cannot write report {path}: {e}")

    if folds is not None:
        write_fold_details(folds, folds_path or detail_path_for(path))


def write_fold_details(folds: Sequence[FoldMetrics], path: str) -> None:
    try:
        with _open_for_write(path) as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(DETAIL_HEADER)
            for fold in folds:
                c = fold.counts
                writer.writerow([
                    fold.patient_id, c.tp, c.fp, c.tn, c.fn,
                    format_score(fold.precision), format_score(fold.recall), format_score(fold.f1),
                    int(fold.degenerate.get('precision', False)),
                    int(fold.degenerate.get('recall', False)),
                    int(fold.degenerate.get('f1', False)),
                ])
    except OSError as e:
        raise OutputError(f"cannot write fold details {path}: {e}")


def read_report(path: str) -> List[ReportRow]:
    """Parse a report file; errors cite the file and line number."""
    try:
        with open(path, 'r', newline='') as f:
            lines = list(csv.reader(f))
    except OSError as e:
        raise ReportParseError(f"cannot read report {path}: {e}")

    if not lines or [cell.strip() for cell in lines[0]] != REPORT_HEADER:
        raise ReportParseError(f"{path}:1: expected header '{','.join(REPORT_HEADER)}'")
    rows = []
    for number, cells in enumerate(lines[1:], start=2):
        if not cells:
            continue
        if len(cells) != len(REPORT_HEADER):
            raise ReportParseError(f"{path}:{number}: expected {len(REPORT_HEADER)} fields, got {len(cells)}")
        try:
            values = [float(cell) for cell in cells[2:]]
        except ValueError:
            raise ReportParseError(f"{path}:{number}: scores must be numeric, got {cells[2:]}")
        rows.append(ReportRow(cells[0].strip(), cells[1].strip(), *values))
    return rows


def merge_reports(paths: Sequence[str]) -> List[ReportRow]:
    """
    Merge run reports into one table in canonical row order.

    Rows outside the canonical set follow in input order.
    """
    if not paths:
        raise ReportParseError("no report files given")
    seen: Dict[Tuple[str, str], str] = {}
    rows: List[ReportRow] = []
    for path in paths:
        for row in read_report(path):
            if row.key in seen:
                raise ReportParseError(
                    f"duplicate row ({row.modality}, {row.model}) in {path} and {seen[row.key]}"
                )
            seen[row.key] = path
            rows.append(row)
    order = {key: i for i, key in enumerate(CANONICAL_ROWS)}
    return sorted(rows, key=lambda row: order.get(row.key, len(order)))


def best_per_column(rows: Sequence[ReportRow]) -> List[float]:
    return [max(row.scores()[i] for row in rows) for i in range(3)] if rows else []


def top_single_modalities(rows: Sequence[ReportRow], count: int = 2) -> List[ReportRow]:
    """Best single-modality rows by average F1 (candidates for a fusion pair)."""
    singles = [row for row in rows if row.single_modality]
    return sorted(singles, key=lambda row: row.avg_f1, reverse=True)[:count]


def print_comparison_table(rows: Sequence[ReportRow]) -> None:
    """Print the merged table; '*' marks the best value in each column."""
    if not rows:
        print("\n❌ No report rows to compare.\n")
        return

    print(f"\n{'='*78}")
    print(f"RESULTS BY DATA MODALITY AND MODEL: {len(rows)} rows")
    print(f"{'='*78}\n")
    print(f"{'Data Modality':22} {'Model':12} " + " ".join(f"{c:>18}" for c in DISPLAY_COLUMNS))
    print(f"{'─'*78}")
    best = best_per_column(rows)
    for row in rows:
        cells = []
        for value, top in zip(row.scores(), best):
            mark = "*" if format_score(value) == format_score(top) else " "
            cells.append(f"{format_score(value) + mark:>18}")
        print(f"{row.modality:22} {row.model:12} " + " ".join(cells))

    leaders = top_single_modalities(rows)
    if leaders:
        print(f"\n🏆 TOP SINGLE MODALITIES (by Average F1):")
        for row in leaders:
            print(f"   {row.modality} / {row.model}: {format_score(row.avg_f1)}")
    print(f"{'='*78}\n")
